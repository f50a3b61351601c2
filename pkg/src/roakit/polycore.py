"""Sparse multivariate polynomial arithmetic over the reals.

A polynomial in n variables is a map from exponent tuples (one nonnegative
integer per variable) to float coefficients.  Terms are kept in graded
lexicographic order (total degree first, then lex) so that serialized output
and constraint indexing are deterministic.  After every arithmetic operation,
coefficients below 1e-14 times the largest magnitude are pruned.
"""

from __future__ import annotations

import json
import math
from typing import Dict, Iterable, List, Sequence, Tuple

import numpy as np

from . import kernels

Exponent = Tuple[int, ...]

PRUNE_REL = 1e-14


def grlex_key(alpha: Exponent):
    return (sum(alpha), alpha)


def grlex_sorted(alphas: Iterable[Exponent]) -> List[Exponent]:
    return sorted(alphas, key=grlex_key)


def monomials_up_to(dim: int, degree: int) -> List[Exponent]:
    """All exponent tuples of total degree <= degree, in graded-lex order."""
    out: List[Exponent] = []

    def rec(prefix, remaining, budget):
        if remaining == 0:
            out.append(tuple(prefix))
            return
        for e in range(budget + 1):
            rec(prefix + [e], remaining - 1, budget - e)

    rec([], dim, degree)
    return grlex_sorted(out)


class SparsePoly:
    """Immutable sparse polynomial: dim plus {exponent tuple: coefficient}."""

    __slots__ = ("dim", "terms", "_arrays")

    def __init__(self, dim: int, terms: Dict[Exponent, float] | None = None,
                 prune: bool = True):
        if dim < 1:
            raise ValueError("dim must be >= 1")
        terms = dict(terms or {})
        for alpha in terms:
            if len(alpha) != dim:
                raise ValueError(f"exponent {alpha} has wrong length for dim {dim}")
        if prune:
            terms = _pruned(terms)
        self.dim = dim
        self.terms = terms
        self._arrays = None

    # -- constructors ------------------------------------------------------

    @staticmethod
    def zero(dim: int) -> "SparsePoly":
        return SparsePoly(dim, {})

    @staticmethod
    def constant(dim: int, c: float) -> "SparsePoly":
        return SparsePoly(dim, {(0,) * dim: float(c)})

    @staticmethod
    def variable(dim: int, j: int) -> "SparsePoly":
        if not 0 <= j < dim:
            raise IndexError(f"axis {j} out of range for dim {dim}")
        alpha = [0] * dim
        alpha[j] = 1
        return SparsePoly(dim, {tuple(alpha): 1.0})

    @staticmethod
    def monomial(dim: int, alpha: Sequence[int], c: float = 1.0) -> "SparsePoly":
        return SparsePoly(dim, {tuple(int(a) for a in alpha): float(c)})

    # -- basic queries -----------------------------------------------------

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(a) for a in self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def sorted_terms(self) -> List[Tuple[Exponent, float]]:
        return [(a, self.terms[a]) for a in grlex_sorted(self.terms)]

    def arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """(exponent matrix, coefficient vector) in graded-lex order."""
        if self._arrays is None:
            items = self.sorted_terms()
            if items:
                expo = np.array([a for a, _ in items], dtype=np.int64)
                coef = np.array([c for _, c in items], dtype=np.float64)
            else:
                expo = np.zeros((0, self.dim), dtype=np.int64)
                coef = np.zeros(0, dtype=np.float64)
            self._arrays = (expo, coef)
        return self._arrays

    # -- arithmetic --------------------------------------------------------

    def __add__(self, other) -> "SparsePoly":
        other = self._coerce(other)
        terms = dict(self.terms)
        for a, c in other.terms.items():
            terms[a] = terms.get(a, 0.0) + c
        return SparsePoly(self.dim, terms)

    __radd__ = __add__

    def __neg__(self) -> "SparsePoly":
        return SparsePoly(self.dim, {a: -c for a, c in self.terms.items()},
                          prune=False)

    def __sub__(self, other) -> "SparsePoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other) -> "SparsePoly":
        return self._coerce(other) + (-self)

    def __mul__(self, other) -> "SparsePoly":
        if isinstance(other, (int, float)):
            return SparsePoly(self.dim,
                              {a: c * other for a, c in self.terms.items()})
        other = self._coerce(other)
        terms: Dict[Exponent, float] = {}
        for a1, c1 in self.terms.items():
            for a2, c2 in other.terms.items():
                a = tuple(x + y for x, y in zip(a1, a2))
                terms[a] = terms.get(a, 0.0) + c1 * c2
        return SparsePoly(self.dim, terms)

    __rmul__ = __mul__

    def __pow__(self, k: int) -> "SparsePoly":
        if k < 0:
            raise ValueError("negative power")
        result = SparsePoly.constant(self.dim, 1.0)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base if k > 1 else base
            k >>= 1
        return result

    def _coerce(self, other) -> "SparsePoly":
        if isinstance(other, SparsePoly):
            if other.dim != self.dim:
                raise ValueError(f"dimension mismatch: {self.dim} vs {other.dim}")
            return other
        if isinstance(other, (int, float)):
            return SparsePoly.constant(self.dim, other)
        raise TypeError(f"cannot combine SparsePoly with {type(other)}")

    def partial(self, j: int) -> "SparsePoly":
        """Exact partial derivative with respect to variable j."""
        if not 0 <= j < self.dim:
            raise IndexError(f"axis {j} out of range for dim {self.dim}")
        terms: Dict[Exponent, float] = {}
        for a, c in self.terms.items():
            e = a[j]
            if e == 0:
                continue
            b = list(a)
            b[j] = e - 1
            b = tuple(b)
            terms[b] = terms.get(b, 0.0) + c * e
        return SparsePoly(self.dim, terms)

    def gradient(self) -> List["SparsePoly"]:
        return [self.partial(j) for j in range(self.dim)]

    def truncate(self, d: int) -> "SparsePoly":
        """Drop all terms of total degree > d."""
        return SparsePoly(self.dim,
                          {a: c for a, c in self.terms.items() if sum(a) <= d},
                          prune=False)

    # -- evaluation --------------------------------------------------------

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"point has shape {x.shape}, expected ({self.dim},)")
        val = 0.0
        for a, c in self.terms.items():
            term = c
            for xi, e in zip(x, a):
                if e:
                    term *= xi ** e
            val += term
        return val

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """Evaluate at an (m, dim) array of points."""
        pts = np.ascontiguousarray(pts, dtype=np.float64)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise ValueError(f"points have shape {pts.shape}, expected (m, {self.dim})")
        expo, coef = self.arrays()
        return kernels.poly_eval_many(expo, coef, pts)

    # -- substitution ------------------------------------------------------

    def affine_substitute(self, scale: Sequence[float],
                          shift: Sequence[float] | None = None) -> "SparsePoly":
        """Return q with q(x) = p(scale * x + shift), by exact expansion."""
        scale = list(scale)
        shift = list(shift) if shift is not None else [0.0] * self.dim
        if len(scale) != self.dim or len(shift) != self.dim:
            raise ValueError("scale/shift length must equal dim")
        if any(s == 0 for s in scale):
            raise ValueError("zero scale component")
        subs = [SparsePoly(self.dim, {_unit(self.dim, j): float(scale[j]),
                                      (0,) * self.dim: float(shift[j])})
                for j in range(self.dim)]
        out = SparsePoly.zero(self.dim)
        # Cache powers of each substituted variable.
        pows: List[Dict[int, SparsePoly]] = [
            {0: SparsePoly.constant(self.dim, 1.0)} for _ in range(self.dim)]
        for a, c in self.terms.items():
            term = SparsePoly.constant(self.dim, c)
            for j, e in enumerate(a):
                if e == 0:
                    continue
                if e not in pows[j]:
                    k = max(k for k in pows[j] if k <= e)
                    p = pows[j][k]
                    while k < e:
                        p = p * subs[j]
                        k += 1
                        pows[j][k] = p
                term = term * pows[j][e]
            out = out + term
        return out

    # -- serialization -----------------------------------------------------

    def to_json_dict(self) -> dict:
        return {"dim": self.dim,
                "terms": [{"alpha": list(a), "c": c}
                          for a, c in self.sorted_terms()]}

    @staticmethod
    def from_json_dict(d: dict) -> "SparsePoly":
        return SparsePoly(int(d["dim"]),
                          {tuple(t["alpha"]): float(t["c"]) for t in d["terms"]})

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict())

    @staticmethod
    def from_json(s: str) -> "SparsePoly":
        return SparsePoly.from_json_dict(json.loads(s))

    # -- misc --------------------------------------------------------------

    def max_abs_coeff(self) -> float:
        return max((abs(c) for c in self.terms.values()), default=0.0)

    def allclose(self, other: "SparsePoly", rtol: float = 1e-10,
                 atol: float = 1e-12) -> bool:
        scale = max(self.max_abs_coeff(), other.max_abs_coeff(), 1.0)
        keys = set(self.terms) | set(other.terms)
        return all(abs(self.terms.get(a, 0.0) - other.terms.get(a, 0.0))
                   <= atol + rtol * scale for a in keys)

    def __repr__(self) -> str:
        parts = [f"{c:+g}*x^{list(a)}" for a, c in self.sorted_terms()[:8]]
        more = "..." if len(self.terms) > 8 else ""
        return f"SparsePoly(dim={self.dim}, {' '.join(parts)}{more})"


def _unit(dim: int, j: int) -> Exponent:
    a = [0] * dim
    a[j] = 1
    return tuple(a)


def _pruned(terms: Dict[Exponent, float]) -> Dict[Exponent, float]:
    if not terms:
        return {}
    mx = max(abs(c) for c in terms.values())
    if mx == 0.0:
        return {}
    thresh = PRUNE_REL * mx
    return {a: c for a, c in terms.items() if abs(c) > thresh}


def norm_power_poly(dim: int, s: int) -> SparsePoly:
    """The polynomial (x_1^2 + ... + x_n^2)^((s+1)/2) == ||x||_2^(s+1).

    s must be odd so that the power is an integer.
    """
    if s < 1 or s % 2 == 0:
        raise ValueError("s must be an odd integer >= 1")
    base = SparsePoly(dim, {tuple(2 * u for u in _unit(dim, j)): 1.0
                            for j in range(dim)})
    return base ** ((s + 1) // 2)


def poly_from_coeff_vector(dim: int, degree: int,
                           coeffs: Sequence[float]) -> SparsePoly:
    """Build a polynomial from coefficients over monomials_up_to(dim, degree)."""
    alphas = monomials_up_to(dim, degree)
    if len(coeffs) != len(alphas):
        raise ValueError(f"expected {len(alphas)} coefficients, got {len(coeffs)}")
    return SparsePoly(dim, {a: float(c) for a, c in zip(alphas, coeffs)})
