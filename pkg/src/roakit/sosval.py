"""SOS certification of the validity region via semidefinite feasibility.

Each probe of the bisection fixes (gamma1, gamma2) and asks for SOS
multipliers sigma1, sigma2 (shared across sign patterns) and, per sign
pattern, an SOS residual

    P_r = -R_r - sigma1 (V - gamma1) - sigma2 (gamma2 - V).

SOS unknowns are Gram matrices over graded-lex monomial vectors; coefficient
matching gives linear equality constraints.  Solver answers are verified
post hoc (PSD margin + identity residual) before being trusted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .polycore import SparsePoly, grlex_sorted, monomials_up_to
from .validity import ValiditySystem


@dataclass
class SdpInstance:
    """Feasibility SDP: PSD blocks plus linear equality constraints.

    Each constraint is (terms, rhs) with terms a list of
    (block index, row, col, coefficient); only upper-triangle entries appear
    (row <= col) and off-diagonal coefficients already include the symmetry
    factor 2.
    """
    block_sizes: List[int]
    constraints: List[Tuple[List[Tuple[int, int, int, float]], float]]
    block_names: List[str] = field(default_factory=list)

    def export_text(self, path: str):
        with open(path, "w") as fh:
            fh.write(f"blocks {' '.join(str(s) for s in self.block_sizes)}\n")
            for terms, rhs in self.constraints:
                parts = [f"{b}:{i}:{j}:{c:.17g}" for b, i, j, c in terms]
                fh.write(" ".join(parts) + f" = {rhs:.17g}\n")


@dataclass
class SosProgram:
    vs: ValiditySystem
    gamma1: float
    gamma2: float
    d_sigma1: int
    d_sigma2: int


def default_multiplier_degree(vs: ValiditySystem) -> int:
    """deg(R) - deg(V) rounded up to even (at least 0)."""
    dr = max(r.degree() for r in vs.R)
    d = max(dr - vs.V.degree(), 0)
    return d + (d % 2)


def _gram_coeff_map(z: List[tuple]) -> Dict[tuple, List[Tuple[int, int, float]]]:
    """monomial -> [(i, j, factor)] with i <= j for z z^T entries."""
    out: Dict[tuple, List[Tuple[int, int, float]]] = {}
    for i in range(len(z)):
        for j in range(i, len(z)):
            m = tuple(a + b for a, b in zip(z[i], z[j]))
            out.setdefault(m, []).append((i, j, 1.0 if i == j else 2.0))
    return out


def sos_to_sdp(prog: SosProgram) -> SdpInstance:
    """Reduce the feasibility program to one SDP instance."""
    vs = prog.vs
    n = vs.dim
    V = vs.V
    Rs = vs.distinct_R()
    degV = V.degree()
    D = max(max(r.degree() for r in Rs),
            prog.d_sigma1 + degV, prog.d_sigma2 + degV)
    D += D % 2
    z_s1 = monomials_up_to(n, prog.d_sigma1 // 2)
    z_s2 = monomials_up_to(n, prog.d_sigma2 // 2)
    z_p = monomials_up_to(n, D // 2)

    block_sizes = [len(z_s1), len(z_s2)] + [len(z_p)] * len(Rs)
    block_names = ["sigma1", "sigma2"] + [f"P_{k}" for k in range(len(Rs))]

    map_s1 = _gram_coeff_map(z_s1)
    map_s2 = _gram_coeff_map(z_s2)
    map_p = _gram_coeff_map(z_p)

    # sigma * W contributions: coefficient of monomial m picks up
    # Q[i,j] * W[m - z_i - z_j].
    W1 = (V - prog.gamma1)
    W2 = (SparsePoly.constant(n, prog.gamma2) - V)

    def mult_map(gram_map, W: SparsePoly):
        out: Dict[tuple, List[Tuple[int, int, float]]] = {}
        for mz, entries in gram_map.items():
            for aw, cw in W.terms.items():
                m = tuple(a + b for a, b in zip(mz, aw))
                lst = out.setdefault(m, [])
                for i, j, f in entries:
                    lst.append((i, j, f * cw))
        return out

    m_s1 = mult_map(map_s1, W1)
    m_s2 = mult_map(map_s2, W2)

    constraints = []
    for k, R in enumerate(Rs):
        monos = set(R.terms) | set(m_s1) | set(m_s2) | set(map_p)
        for m in grlex_sorted(monos):
            terms: List[Tuple[int, int, int, float]] = []
            for i, j, f in map_p.get(m, []):
                terms.append((2 + k, i, j, f))
            for i, j, f in m_s1.get(m, []):
                terms.append((0, i, j, f))
            for i, j, f in m_s2.get(m, []):
                terms.append((1, i, j, f))
            rhs = -R.terms.get(m, 0.0)
            if terms or rhs != 0.0:
                constraints.append((terms, rhs))
    return SdpInstance(block_sizes, constraints, block_names)


def solve_sdp(inst: SdpInstance, solver: str = "CLARABEL",
              psd_tol: float = 1e-7, res_tol: float = 1e-7):
    """Solve the feasibility SDP; returns ("feasible", blocks) /
    ("infeasible", None) / ("unknown", None).

    A solver answer is downgraded to unknown unless the returned blocks pass
    the post-hoc PSD and equality-residual checks.
    """
    import cvxpy as cp
    import scipy.sparse as spsparse

    Qs = [cp.Variable((s, s), symmetric=True) for s in inst.block_sizes]
    cons = [Q >> 0 for Q in Qs]
    # One sparse-matrix equality over the stacked column-major vec of all
    # blocks: much faster to canonicalize than per-coefficient scalar
    # constraints.  Off-diagonal coefficients split across (i, j) and (j, i).
    offs = np.cumsum([0] + [s * s for s in inst.block_sizes])
    rows: List[int] = []
    cols: List[int] = []
    vals: List[float] = []
    rhs_vec = np.empty(len(inst.constraints))
    for r, (terms, rhs) in enumerate(inst.constraints):
        rhs_vec[r] = rhs
        for b, i, j, c in terms:
            s = inst.block_sizes[b]
            if i == j:
                rows.append(r)
                cols.append(offs[b] + j * s + i)
                vals.append(c)
            else:
                rows.append(r)
                cols.append(offs[b] + j * s + i)
                vals.append(0.5 * c)
                rows.append(r)
                cols.append(offs[b] + i * s + j)
                vals.append(0.5 * c)
    A = spsparse.csr_matrix((vals, (rows, cols)),
                            shape=(len(inst.constraints), int(offs[-1])))
    xvec = cp.hstack([cp.vec(Q, order="F") for Q in Qs])
    cons.append(A @ xvec == rhs_vec)
    # Small trace objective keeps the returned witness bounded.
    obj = cp.Minimize(sum(cp.trace(Q) for Q in Qs))
    prob = cp.Problem(obj, cons)
    try:
        prob.solve(solver=solver)
    except Exception:
        try:
            prob.solve(solver="SCS")
        except Exception:
            return "unknown", None
    status = prob.status
    if status in ("infeasible", "infeasible_inaccurate"):
        return "infeasible", None
    if status not in ("optimal", "optimal_inaccurate"):
        return "unknown", None
    blocks = [np.asarray(Q.value) for Q in Qs]
    if any(b is None for b in blocks):
        return "unknown", None
    if verify_witness(inst, blocks, psd_tol=psd_tol, res_tol=res_tol):
        return "feasible", blocks
    return "unknown", None


def verify_witness(inst: SdpInstance, blocks: Sequence[np.ndarray],
                   psd_tol: float = 1e-7, res_tol: float = 1e-7) -> bool:
    """PSD margin and equality residual check on a returned witness."""
    for b in blocks:
        w = np.linalg.eigvalsh(0.5 * (b + b.T))
        if w.min() < -psd_tol * (1.0 + np.abs(b).max()):
            return False
    scale = 1.0 + max((abs(r) for _, r in inst.constraints), default=0.0)
    for terms, rhs in inst.constraints:
        val = sum(c * blocks[b][i, j] for b, i, j, c in terms)
        if abs(val - rhs) > res_tol * scale:
            return False
    return True


def witness_identity_residual(prog: SosProgram,
                              blocks: Sequence[np.ndarray]) -> float:
    """Coefficientwise relative residual of the reconstructed SOS identity."""
    vs = prog.vs
    n = vs.dim
    Rs = vs.distinct_R()
    z_s1 = monomials_up_to(n, prog.d_sigma1 // 2)
    z_s2 = monomials_up_to(n, prog.d_sigma2 // 2)
    degV = vs.V.degree()
    D = max(max(r.degree() for r in Rs),
            prog.d_sigma1 + degV, prog.d_sigma2 + degV)
    D += D % 2
    z_p = monomials_up_to(n, D // 2)
    sigma1 = _gram_poly(z_s1, blocks[0], n)
    sigma2 = _gram_poly(z_s2, blocks[1], n)
    W1 = vs.V - prog.gamma1
    W2 = SparsePoly.constant(n, prog.gamma2) - vs.V
    worst = 0.0
    for k, R in enumerate(Rs):
        P = _gram_poly(z_p, blocks[2 + k], n)
        resid = P + R + sigma1 * W1 + sigma2 * W2
        scale = max(R.max_abs_coeff(), P.max_abs_coeff(), 1.0)
        worst = max(worst, resid.max_abs_coeff() / scale)
    return worst


def _gram_poly(z: List[tuple], Q: np.ndarray, n: int) -> SparsePoly:
    terms: Dict[tuple, float] = {}
    for i in range(len(z)):
        for j in range(len(z)):
            m = tuple(a + b for a, b in zip(z[i], z[j]))
            terms[m] = terms.get(m, 0.0) + Q[i, j]
    return SparsePoly(n, terms)


# ---------------------------------------------------------------------------
# bisection
# ---------------------------------------------------------------------------


def certify_levels_sos(vs: ValiditySystem, d_sigma1: int | None = None,
                       d_sigma2: int | None = None, tol: float = 1e-2,
                       solver: str = "CLARABEL", max_probes: int = 60,
                       gamma1: float | None = None,
                       gamma2: float | None = None):
    """Bisection over (gamma1, gamma2) with SDP feasibility as the oracle.

    Returns (gamma1, gamma2, diagnostics) or None.  gamma2 is capped so the
    sublevel set stays inside the domain box.

    When an explicit (gamma1, gamma2) pair is given, the search is skipped
    and the pair is verified by a single feasibility solve whose witness must
    pass the post-hoc checks.
    """
    from .gridval import boundary_gamma_cap

    if d_sigma1 is None:
        d_sigma1 = default_multiplier_degree(vs)
    if d_sigma2 is None:
        d_sigma2 = d_sigma1
    cap = boundary_gamma_cap(vs.V, vs.domain) * (1.0 - 1e-6)
    if cap <= 0:
        return None
    probes = {"count": 0, "feasible": 0, "max_residual": 0.0}

    def oracle(g1: float, g2: float) -> bool:
        if probes["count"] >= max_probes or not g1 < g2 <= cap:
            return False
        probes["count"] += 1
        prog = SosProgram(vs, g1, g2, d_sigma1, d_sigma2)
        status, blocks = solve_sdp(sos_to_sdp(prog), solver=solver)
        if status != "feasible":
            return False
        probes["feasible"] += 1
        probes["max_residual"] = max(probes["max_residual"],
                                     witness_identity_residual(prog, blocks))
        return True

    diag_base = {"cap": cap, "d_sigma1": d_sigma1, "d_sigma2": d_sigma2,
                 "solver": solver}
    if gamma1 is not None and gamma2 is not None:
        if not oracle(float(gamma1), float(gamma2)):
            return None
        return float(gamma1), float(gamma2), \
            {**diag_base, "mode": "verify", **probes}

    known_g2 = [0.0]

    def exists_g2(g1: float) -> bool:
        # The thin annulus just above g1 is the easiest set to certify but
        # its SDP can be badly conditioned; retry at wider levels before
        # declaring g1 hopeless.
        thin = min(cap, max(g1 * (1.0 + 4.0 * tol), g1 + tol * cap))
        for g2 in (thin, g1 + 0.5 * (thin - g1), g1 + 0.5 * (cap - g1)):
            if g2 > g1 and oracle(g1, g2):
                known_g2[0] = g2
                return True
        return False

    if exists_g2(0.0):
        g1 = 0.0
    else:
        found = None
        for t in (0.02, 0.05, 0.1, 0.2, 0.35, 0.5, 0.7):
            if exists_g2(cap * t):
                found = cap * t
                break
        if found is None:
            return None
        lo_g, hi_g = 0.0, found
        while hi_g - lo_g > tol * max(hi_g, 1e-12):
            mid = 0.5 * (lo_g + hi_g)
            if exists_g2(mid):
                hi_g = mid
            else:
                lo_g = mid
        g1 = hi_g

    if oracle(g1, cap):
        g2 = cap
    else:
        lo_g = max(known_g2[0],
                   min(cap, max(g1 * (1.0 + 4.0 * tol), g1 + tol * cap)))
        hi_g = cap
        while hi_g - lo_g > tol * max(cap, 1e-12):
            mid = 0.5 * (lo_g + hi_g)
            if oracle(g1, mid):
                lo_g = mid
            else:
                hi_g = mid
        g2 = lo_g
    if not oracle(g1, g2):
        return None
    return g1, g2, {**diag_base, **probes}
