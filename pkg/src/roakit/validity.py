"""Semi-algebraic inner approximation of the validity region.

Given a polynomial Lyapunov candidate V and per-component polynomial proxies
P_j with error envelopes eps_j(x), the set where Vdot < 0 is inner-bounded by
the intersection over sign patterns (r_1..r_n) of

    R_r(x) = grad(V).P(x) + sum_j (-1)^(r_j) dV/dx_j eps_j(x) < 0,

whose pointwise maximum equals grad(V).P + sum_j |dV/dx_j| eps_j.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import product
from typing import List, Sequence

import numpy as np

from .dynamics import Box
from .polyapprox import PolyApprox
from .polycore import SparsePoly

MAX_PATTERN_DIM = 16


@dataclass
class ValiditySystem:
    V: SparsePoly
    gradV: List[SparsePoly]
    R: List[SparsePoly]              # indexed by sign pattern, lex over {0,1}^n
    patterns: List[tuple]
    domain: Box
    error_models: List[dict] = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.V.dim

    def distinct_R(self) -> List[SparsePoly]:
        """Unique sign-pattern polynomials (all 2^n coincide when eps = 0)."""
        out: List[SparsePoly] = []
        for r in self.R:
            if not any(r.allclose(q) for q in out):
                out.append(r)
        return out

    def max_R(self, x) -> float:
        return max(r(x) for r in self.R)

    def max_R_many(self, pts: np.ndarray) -> np.ndarray:
        vals = np.stack([r.eval_many(pts) for r in self.distinct_R()], axis=1)
        return vals.max(axis=1)

    def to_json_dict(self) -> dict:
        return {"V": self.V.to_json_dict(),
                "R": [r.to_json_dict() for r in self.R],
                "patterns": [list(p) for p in self.patterns],
                "error_models": self.error_models}


def build_validity_system(V, approx: Sequence[PolyApprox],
                          domain: Box | None = None) -> ValiditySystem:
    """Assemble the 2^n sign-pattern polynomials for a polynomial candidate.

    V may be a SparsePoly or a LyapunovCandidate whose .poly is set;
    non-polynomial candidates must be proxied through remez_minimax first.
    """
    Vp = V if isinstance(V, SparsePoly) else getattr(V, "poly", None)
    if Vp is None:
        raise ValueError("candidate is not polynomial; build a minimax proxy first")
    n = Vp.dim
    if len(approx) != n:
        raise ValueError("need one PolyApprox per component")
    if n > MAX_PATTERN_DIM:
        raise ValueError(f"2^n sign patterns materialized only for n <= {MAX_PATTERN_DIM}")
    if domain is None:
        domain = approx[0].domain
    grad = Vp.gradient()
    base = SparsePoly.zero(n)
    for j in range(n):
        base = base + grad[j] * approx[j].P
    eps_polys = [a.error_model.epsilon_poly(n) for a in approx]
    err_terms = [grad[j] * eps_polys[j] for j in range(n)]
    R: List[SparsePoly] = []
    patterns = list(product((0, 1), repeat=n))
    for r in patterns:
        acc = base
        for j in range(n):
            if not err_terms[j].is_zero():
                acc = acc + (err_terms[j] if r[j] == 0 else -err_terms[j])
        R.append(acc)
    return ValiditySystem(Vp, grad, R, patterns, domain,
                          [a.error_model.to_json_dict() for a in approx])


def abs_form_many(vs: ValiditySystem, approx: Sequence[PolyApprox],
                  pts: np.ndarray) -> np.ndarray:
    """Reference evaluation grad(V).P + sum_j |dV/dx_j| eps_j at many points."""
    out = np.zeros(pts.shape[0])
    for j in range(vs.dim):
        out += vs.gradV[j].eval_many(pts) * approx[j].P.eval_many(pts)
    for j, a in enumerate(approx):
        out += np.abs(vs.gradV[j].eval_many(pts)) * a.error_model.bound_at(pts)
    return out
