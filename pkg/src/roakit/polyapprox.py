"""Polynomial proxies: Taylor models with remainder constants, and discrete
minimax (Remez-type) approximation driven by a linear program.

The Taylor model certifies |f(x) - P(x)| <= c ||x||^(s+1) on the domain with
s odd; the minimax model certifies a constant error bound obtained from the
discrete minimax optimum inflated by a safety factor (1.5 by default).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np
from scipy.optimize import linprog

from .dynamics import BlackBox, Box, VectorField
from .polycore import SparsePoly, monomials_up_to, poly_from_coeff_vector


@dataclass
class ErrorModel:
    kind: str                 # "taylor" or "minimax"
    c: float = 0.0            # taylor remainder constant
    s: int = 1                # taylor order (odd)
    eps: float = 0.0          # minimax bound (safety margin included)

    def epsilon_poly(self, dim: int) -> SparsePoly:
        """The polynomial error envelope eps_j(x)."""
        from .polycore import norm_power_poly
        if self.kind == "taylor":
            return norm_power_poly(dim, self.s) * self.c
        return SparsePoly.constant(dim, self.eps)

    def bound_at(self, pts: np.ndarray) -> np.ndarray:
        if self.kind == "taylor":
            return self.c * np.linalg.norm(pts, axis=1) ** (self.s + 1)
        return np.full(pts.shape[0], self.eps)

    def to_json_dict(self) -> dict:
        if self.kind == "taylor":
            return {"type": "taylor", "c": self.c, "s": self.s}
        return {"type": "minimax", "eps": self.eps}


@dataclass
class PolyApprox:
    P: SparsePoly
    error_model: ErrorModel
    domain: Box
    flagged: bool = False     # set when the Remez loop hit its round budget

    def to_json_dict(self) -> dict:
        d = self.P.to_json_dict()
        d["error_model"] = self.error_model.to_json_dict()
        return d


@dataclass
class LinearProgram:
    """minimize c @ x  subject to  A_ub @ x <= b_ub (x free)."""
    c: np.ndarray
    A_ub: np.ndarray
    b_ub: np.ndarray


def solve_lp(lp: LinearProgram):
    """Dense LP solve; returns (optimal value, primal solution).

    Raises RuntimeError when infeasible or unbounded.
    """
    res = linprog(lp.c, A_ub=lp.A_ub, b_ub=lp.b_ub,
                  bounds=[(None, None)] * len(lp.c), method="highs")
    if not res.success:
        raise RuntimeError(f"LP solve failed: {res.message}")
    return float(res.fun), np.asarray(res.x)


# ---------------------------------------------------------------------------
# Taylor models
# ---------------------------------------------------------------------------


def taylor_approx(f, s: int, domain: Box, c: float | None = None,
                  grid_per_axis: int = 200, margin: float = 1.5) -> PolyApprox:
    """Taylor polynomial of f at 0 up to total order s, with remainder model.

    f is a BlackBox with a series provider, or a SparsePoly (its own Taylor
    expansion; remainder constant from the discarded tail).  If c is None it
    is estimated on a dense grid.
    """
    if s < 1 or s % 2 == 0:
        raise ValueError("Taylor order s must be odd")
    if isinstance(f, SparsePoly):
        P = f.truncate(s)
        fn = f
    elif isinstance(f, BlackBox):
        if f.series is None:
            raise ValueError("black-box component lacks a series provider")
        P = f.series(s)
        fn = f
    else:
        raise TypeError("f must be SparsePoly or BlackBox")
    if c is None:
        c = estimate_taylor_constant(fn, P, s, domain,
                                     grid_per_axis=grid_per_axis, margin=margin)
    return PolyApprox(P, ErrorModel("taylor", c=float(c), s=s), domain)


def estimate_taylor_constant(f, P: SparsePoly, s: int, domain: Box,
                             grid_per_axis: int = 200,
                             margin: float = 1.5) -> float:
    """c = margin * max over a dense grid of |f(x) - P(x)| / ||x||^(s+1)."""
    axes = [np.linspace(lo, hi, grid_per_axis)
            for lo, hi in zip(domain.lo, domain.hi)]
    grids = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([g.ravel() for g in grids], axis=1)
    norms = np.linalg.norm(pts, axis=1)
    keep = norms > 1e-9
    pts, norms = pts[keep], norms[keep]
    if isinstance(f, SparsePoly):
        fv = f.eval_many(pts)
    else:
        fv = np.array([f(p) for p in pts])
    ratio = np.abs(fv - P.eval_many(pts)) / norms ** (s + 1)
    if not np.isfinite(ratio).all():
        raise RuntimeError("non-finite remainder ratio on the sampling grid")
    return margin * float(np.max(ratio, initial=0.0))


# ---------------------------------------------------------------------------
# Remez-type discrete minimax
# ---------------------------------------------------------------------------


def chebyshev_tensor_nodes(domain: Box, degree: int,
                           cap: int = 2000) -> np.ndarray:
    """Tensor grid of 1-D Chebyshev nodes mapped to the domain, capped in size."""
    n = domain.dim
    k = degree + 1
    while k ** n > cap and k > 2:
        k -= 1
    nodes_1d = np.sin(np.pi * np.arange(-k + 1, k, 2) / (2 * (k - 1))) \
        if k > 1 else np.zeros(1)
    axes = []
    for lo, hi in zip(domain.lo, domain.hi):
        axes.append(0.5 * (hi - lo) * nodes_1d + 0.5 * (hi + lo))
    grids = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in grids], axis=1)


def _minimax_lp(fvals: np.ndarray, M: np.ndarray) -> tuple:
    """Discrete minimax: min eps s.t. |fvals - M p| <= eps.

    M is the (m, B) monomial design matrix; variables are (p, eps).
    """
    m, B = M.shape
    c = np.zeros(B + 1)
    c[-1] = 1.0
    ones = np.ones((m, 1))
    A_ub = np.block([[M, -ones], [-M, -ones]])
    b_ub = np.concatenate([fvals, -fvals])
    val, x = solve_lp(LinearProgram(c, A_ub, b_ub))
    return x[:B], val


def remez_minimax(f: Callable, degree: int, domain: Box,
                  tol: float = 1e-3, max_rounds: int = 30,
                  seed: int = 0, safety: float = 1.5,
                  violator_samples: int | None = None,
                  fix_origin: bool = False) -> PolyApprox:
    """Best discrete minimax polynomial of total degree <= degree.

    Alternates LP solves on a growing node set with random violator scans;
    stops when a scan finds no residual above eps_bar * (1 + tol).  The
    reported bound is safety * eps_bar; if the round budget is exhausted the
    bound is inflated to 2x the worst observed residual and flagged.

    fix_origin pins P(0) = 0 (constant coefficient excluded), needed when the
    fit stands in for a field component that must keep the equilibrium.
    """
    alphas = monomials_up_to(domain.dim, degree)
    fit_alphas = alphas[1:] if fix_origin else alphas
    nodes = chebyshev_tensor_nodes(domain, degree)
    if violator_samples is None:
        violator_samples = 50 * nodes.shape[0]
    rng = np.random.default_rng(seed)

    def feval(pts):
        if isinstance(f, SparsePoly):
            return f.eval_many(pts)
        if isinstance(f, BlackBox):
            return np.array([f(p) for p in pts])
        return np.array([float(f(p)) for p in pts])

    def design(pts):
        return np.stack([np.prod(pts ** np.array(a), axis=1)
                         for a in fit_alphas], axis=1)

    fvals = feval(nodes)
    eps_bar = 0.0
    worst_seen = 0.0
    P = SparsePoly.zero(domain.dim)
    flagged = True
    history: List[float] = []
    for _ in range(max_rounds):
        coeffs, eps_bar = _minimax_lp(fvals, design(nodes))
        history.append(eps_bar)
        if fix_origin:
            coeffs = np.concatenate([[0.0], coeffs])
        P = poly_from_coeff_vector(domain.dim, degree, coeffs)
        pts = domain.sample(violator_samples, rng)
        resid = np.abs(feval(pts) - P.eval_many(pts))
        worst_seen = max(worst_seen, float(np.max(resid, initial=0.0)))
        bad = resid > eps_bar * (1.0 + tol) + 1e-14
        if not bad.any():
            flagged = False
            break
        # Keep the worst violators to limit LP growth.
        idx = np.argsort(resid[bad])[::-1][:max(64, nodes.shape[0] // 4)]
        new_pts = pts[bad][idx]
        nodes = np.vstack([nodes, new_pts])
        fvals = np.concatenate([fvals, feval(new_pts)])
    eps = 2.0 * worst_seen if flagged else safety * eps_bar
    model = ErrorModel("minimax", eps=float(eps))
    pa = PolyApprox(P, model, domain, flagged=flagged)
    pa.eps_bar = float(eps_bar)
    pa.eps_history = history
    return pa


def approximate_field(F: VectorField, spec: dict) -> List[PolyApprox]:
    """Per-component polynomial proxies of a vector field.

    spec: {"kind": "none"} for exact polynomial fields (zero error),
          {"kind": "taylor", "s": odd, "c": float or None},
          {"kind": "minimax", "degree": int, "tol": ..., "seed": ...}.
    Components that are already polynomial within the requested degree keep a
    zero error bound.
    """
    kind = spec.get("kind", "none")
    out: List[PolyApprox] = []
    if kind == "none":
        if not F.is_polynomial:
            raise ValueError("exact model requires a polynomial field")
        for comp in F.components:
            out.append(PolyApprox(comp, ErrorModel("minimax", eps=0.0),
                                  F.domain))
        return out
    for comp in F.components:
        if isinstance(comp, SparsePoly):
            if kind == "taylor":
                s = int(spec["s"])
                if comp.degree() <= s:
                    out.append(PolyApprox(comp,
                                          ErrorModel("taylor", c=0.0, s=s),
                                          F.domain))
                    continue
                out.append(taylor_approx(comp, s, F.domain, c=spec.get("c")))
            else:
                d = int(spec["degree"])
                if comp.degree() <= d:
                    out.append(PolyApprox(comp, ErrorModel("minimax", eps=0.0),
                                          F.domain))
                    continue
                out.append(remez_minimax(comp, d, F.domain,
                                         tol=spec.get("tol", 1e-3),
                                         seed=spec.get("seed", 0),
                                         fix_origin=True))
        elif kind == "taylor":
            out.append(taylor_approx(comp, int(spec["s"]), F.domain,
                                     c=spec.get("c")))
        else:
            out.append(remez_minimax(comp, int(spec["degree"]), F.domain,
                                     tol=spec.get("tol", 1e-3),
                                     seed=spec.get("seed", 0),
                                     fix_origin=True))
    return out
