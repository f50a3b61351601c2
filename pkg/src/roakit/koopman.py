"""Generator matrices, principal eigenpairs and Lyapunov candidates.

The infinitesimal generator acts on an observable f as grad(f) . F.  Its
matrix on a finite basis is assembled either by exact truncation (polynomial
field, monomial basis) or by a Monte-Carlo Galerkin L2 projection.  The
candidate Lyapunov function is a weighted sum of squared moduli of the
eigenfunctions matched to the Jacobian spectrum.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np

from .dynamics import VectorField, jacobian_at_origin
from .polycore import SparsePoly, monomials_up_to


class Basis:
    """Monomial or Gaussian-RBF basis over n variables."""

    def __init__(self, kind: str, dim: int, degree: int | None = None,
                 centers: np.ndarray | None = None, eta: float | None = None):
        self.kind = kind
        self.dim = dim
        if kind == "monomial":
            if degree is None or degree < 0:
                raise ValueError("monomial basis requires degree >= 0")
            self.degree = degree
            self.exponents = monomials_up_to(dim, degree)
            self.size = len(self.exponents)
        elif kind == "rbf":
            centers = np.asarray(centers, dtype=float)
            if centers.ndim != 2 or centers.shape[1] != dim:
                raise ValueError("centers must be (N, dim)")
            if eta is None or eta <= 0:
                raise ValueError("rbf basis requires eta > 0")
            dists = np.linalg.norm(centers[:, None] - centers[None, :], axis=2)
            np.fill_diagonal(dists, np.inf)
            if np.min(dists) == 0.0:
                raise ValueError("duplicate RBF centers")
            self.centers = centers
            self.eta = float(eta)
            self.size = centers.shape[0]
        else:
            raise ValueError(f"unknown basis kind: {kind}")

    @staticmethod
    def monomial(dim: int, degree: int) -> "Basis":
        return Basis("monomial", dim, degree=degree)

    @staticmethod
    def gaussian_rbf(centers: np.ndarray, eta: float) -> "Basis":
        centers = np.asarray(centers, dtype=float)
        return Basis("rbf", centers.shape[1], centers=centers, eta=eta)

    # -- evaluation --------------------------------------------------------

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """(m, n) points -> (m, N) basis values."""
        pts = np.asarray(pts, dtype=float)
        if self.kind == "monomial":
            cols = [np.prod(pts ** np.array(a), axis=1) for a in self.exponents]
            return np.stack(cols, axis=1)
        d2 = np.sum((pts[:, None, :] - self.centers[None, :, :]) ** 2, axis=2)
        return np.exp(-self.eta ** 2 * d2)

    def grad_many(self, pts: np.ndarray) -> np.ndarray:
        """(m, n) points -> (m, N, n) gradients of each basis function."""
        pts = np.asarray(pts, dtype=float)
        m = pts.shape[0]
        if self.kind == "monomial":
            out = np.zeros((m, self.size, self.dim))
            for k, a in enumerate(self.exponents):
                for j in range(self.dim):
                    if a[j] == 0:
                        continue
                    b = list(a)
                    b[j] -= 1
                    out[:, k, j] = a[j] * np.prod(pts ** np.array(b), axis=1)
            return out
        diff = pts[:, None, :] - self.centers[None, :, :]  # (m, N, n)
        vals = np.exp(-self.eta ** 2 * np.sum(diff ** 2, axis=2))
        return -2.0 * self.eta ** 2 * diff * vals[:, :, None]

    def element_poly(self, k: int) -> SparsePoly:
        if self.kind != "monomial":
            raise ValueError("only monomial basis elements are polynomials")
        return SparsePoly.monomial(self.dim, self.exponents[k])


@dataclass
class GeneratorMatrix:
    L: np.ndarray
    basis: Basis
    projection: str  # "truncation" or "l2"
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {"projection": self.projection,
                "size": int(self.L.shape[0]),
                "matrix": [[float(v) for v in row] for row in self.L],
                "meta": {k: v for k, v in self.meta.items()
                         if isinstance(v, (int, float, str))}}


@dataclass
class EigenPair:
    lam: complex
    vec: np.ndarray
    target: complex  # Jacobian eigenvalue this pair was matched to

    def to_json_dict(self) -> dict:
        return {"lambda": [self.lam.real, self.lam.imag],
                "target": [self.target.real, self.target.imag],
                "vec_re": [float(v) for v in self.vec.real],
                "vec_im": [float(v) for v in self.vec.imag]}


def apply_generator(F: VectorField, psi: SparsePoly) -> SparsePoly:
    """grad(psi) . F for a polynomial observable over a polynomial field."""
    if not F.is_polynomial:
        raise ValueError("apply_generator (exact) requires a polynomial field")
    out = SparsePoly.zero(F.dim)
    for j in range(F.dim):
        dj = psi.partial(j)
        if not dj.is_zero():
            out = out + dj * F.components[j]
    return out


def build_generator_truncation(F: VectorField, basis: Basis) -> GeneratorMatrix:
    """Finite-section generator: column k = coefficients of the projection of
    grad(psi_k) . F onto monomials of total degree <= d."""
    if basis.kind != "monomial":
        raise ValueError("truncation projection requires a monomial basis")
    if not F.is_polynomial:
        raise ValueError("truncation projection requires a polynomial field")
    index = {a: i for i, a in enumerate(basis.exponents)}
    N = basis.size
    L = np.zeros((N, N))
    for k in range(N):
        lp = apply_generator(F, basis.element_poly(k))
        for a, c in lp.terms.items():
            if sum(a) <= basis.degree:
                L[index[a], k] = c
    return GeneratorMatrix(L, basis, "truncation")


def build_generator_l2(F: VectorField, basis: Basis, X_pi,
                       M: int | None = None, seed: int = 0,
                       ridge_rel: float = 1e-10) -> GeneratorMatrix:
    """Monte-Carlo Galerkin L2 projection of the generator onto the basis.

    Draws M uniform samples in X_pi, forms the Gram matrix G and the mixed
    matrix A with entries <psi_i, L psi_j>, and solves G L = A with a
    trace-relative Tikhonov ridge.
    """
    N = basis.size
    if M is None:
        M = max(10 * N, 5000)
    if M < 10 * N:
        raise ValueError(f"require M >= 10*N = {10 * N}")
    rng = np.random.default_rng(seed)
    pts = rng.uniform(X_pi.lo, X_pi.hi, size=(M, basis.dim))
    Psi = basis.eval_many(pts)                     # (M, N)
    Gpsi = basis.grad_many(pts)                    # (M, N, n)
    Fvals = F.eval_many(pts)                       # (M, n)
    LPsi = np.einsum("mkj,mj->mk", Gpsi, Fvals)    # (M, N)
    G = Psi.T @ Psi / M
    A = Psi.T @ LPsi / M
    ridge = ridge_rel * np.trace(G) / N
    Greg = G + ridge * np.eye(N)
    try:
        L, *_ = np.linalg.lstsq(Greg, A, rcond=None)
    except np.linalg.LinAlgError as exc:
        raise RuntimeError("Gram matrix numerically singular "
                           "(ill-chosen basis?)") from exc
    cond = np.linalg.cond(Greg)
    if not np.isfinite(cond) or cond > 1e15:
        raise RuntimeError(f"Gram matrix numerically singular (cond={cond:.2e})")
    return GeneratorMatrix(L, basis, "l2",
                           meta={"M": M, "seed": seed, "gram_cond": float(cond)})


def principal_eigenpairs(gen: GeneratorMatrix, J: np.ndarray,
                         tol_rel: float = 0.1) -> List[EigenPair]:
    """Match generator eigenvalues to the Jacobian spectrum (greedy, nearest).

    J must be Hurwitz.  Eigenvectors are normalized so their largest-modulus
    entry is 1 + 0i, and each returned pair satisfies the residual bound
    ||L v - lam v|| <= 1e-8 ||L|| ||v||.
    """
    mu = np.linalg.eigvals(J)
    if np.max(mu.real) >= 0:
        raise ValueError("Jacobian is not Hurwitz")
    lam, vecs = np.linalg.eig(gen.L)
    Lnorm = np.linalg.norm(gen.L, 2)
    used: set = set()
    pairs: List[EigenPair] = []
    for m in sorted(mu, key=lambda z: (z.real, z.imag)):
        free = [i for i in range(len(lam)) if i not in used]
        i = min(free, key=lambda i: abs(lam[i] - m))
        used.add(i)
        dist = abs(lam[i] - m)
        if dist > tol_rel * max(abs(m), 1e-12):
            warnings.warn(f"eigenvalue match for {m:.4g} is off by {dist:.3g}")
        v = vecs[:, i].astype(complex)
        k = int(np.argmax(np.abs(v)))
        v = v / v[k]
        res = np.linalg.norm(gen.L @ v - lam[i] * v)
        if res > 1e-8 * max(Lnorm, 1.0) * np.linalg.norm(v):
            warnings.warn(f"eigenpair residual {res:.3g} exceeds tolerance")
        pairs.append(EigenPair(complex(lam[i]), v, complex(m)))
    return pairs


def dedupe_conjugates(pairs: Sequence[EigenPair],
                      alphas: Sequence[float]) -> List[tuple]:
    """Collapse conjugate eigenvalue pairs: keep one member, double its alpha.

    |phi_lam|^2 == |phi_conj(lam)|^2, so the duplicate term is pure scaling.
    """
    out = []
    skip = [False] * len(pairs)
    for i, p in enumerate(pairs):
        if skip[i]:
            continue
        alpha = float(alphas[i])
        if abs(p.lam.imag) > 1e-12:
            for j in range(i + 1, len(pairs)):
                if not skip[j] and abs(pairs[j].lam - p.lam.conjugate()) < 1e-9:
                    skip[j] = True
                    alpha += float(alphas[j])
                    break
        out.append((p, alpha))
    return out


class LyapunovCandidate:
    """V = sum_i alpha_i |phi_i|^2 with an analytic gradient.

    For monomial bases V is expanded to an exact SparsePoly; for RBF bases it
    stays a squared-modulus evaluator.
    """

    def __init__(self, pairs: Sequence[EigenPair], alphas: Sequence[float],
                 basis: Basis):
        if len(pairs) != len(alphas):
            raise ValueError("one alpha per eigenpair required")
        if any(a <= 0 for a in alphas):
            raise ValueError("alphas must be positive")
        self.basis = basis
        self.terms = dedupe_conjugates(pairs, alphas)
        self.poly: Optional[SparsePoly] = None
        if basis.kind == "monomial":
            V = SparsePoly.zero(basis.dim)
            for p, alpha in self.terms:
                re = SparsePoly.zero(basis.dim)
                im = SparsePoly.zero(basis.dim)
                for k, a in enumerate(basis.exponents):
                    c = p.vec[k]
                    if c.real != 0.0:
                        re = re + SparsePoly.monomial(basis.dim, a, c.real)
                    if c.imag != 0.0:
                        im = im + SparsePoly.monomial(basis.dim, a, c.imag)
                V = V + (re * re + im * im) * alpha
            self.poly = V
            self._grad = V.gradient()

    @property
    def dim(self) -> int:
        return self.basis.dim

    def __call__(self, x) -> float:
        if self.poly is not None:
            return self.poly(x)
        return float(self.eval_many(np.asarray(x, dtype=float)[None, :])[0])

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        if self.poly is not None:
            return self.poly.eval_many(pts)
        Psi = self.basis.eval_many(pts)
        out = np.zeros(pts.shape[0])
        for p, alpha in self.terms:
            phi = Psi @ p.vec
            out += alpha * np.abs(phi) ** 2
        return out

    def grad(self, x) -> np.ndarray:
        return self.grad_many(np.asarray(x, dtype=float)[None, :])[0]

    def grad_many(self, pts: np.ndarray) -> np.ndarray:
        if self.poly is not None:
            return np.stack([g.eval_many(pts) for g in self._grad], axis=1)
        Psi = self.basis.eval_many(pts)           # (m, N)
        GPsi = self.basis.grad_many(pts)          # (m, N, n)
        out = np.zeros((pts.shape[0], self.dim))
        for p, alpha in self.terms:
            phi = Psi @ p.vec                     # (m,)
            gphi = np.einsum("mkj,k->mj", GPsi, p.vec)
            out += 2.0 * alpha * np.real(np.conj(phi)[:, None] * gphi)
        return out


def assemble_candidate(pairs: Sequence[EigenPair], basis: Basis,
                       alphas: Sequence[float] | None = None) -> LyapunovCandidate:
    if alphas is None:
        alphas = [1.0] * len(pairs)
    return LyapunovCandidate(pairs, alphas, basis)


def candidate_for(F: VectorField, basis: Basis, projection: str = "truncation",
                  X_pi=None, M: int | None = None, seed: int = 0,
                  alphas: Sequence[float] | None = None) -> LyapunovCandidate:
    """Convenience: generator -> principal eigenpairs -> candidate."""
    from .dynamics import Box
    J = jacobian_at_origin(F)
    if projection == "truncation":
        gen = build_generator_truncation(F, basis)
    elif projection == "l2":
        if X_pi is None:
            X_pi = Box((-0.1,) * F.dim, (0.1,) * F.dim)
        gen = build_generator_l2(F, basis, X_pi, M=M, seed=seed)
    else:
        raise ValueError(f"unknown projection: {projection}")
    pairs = principal_eigenpairs(gen, J)
    return assemble_candidate(pairs, basis, alphas)
