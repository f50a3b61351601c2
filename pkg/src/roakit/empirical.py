"""Empirical basin metrics for the high-dimensional replicator study.

Validation by SOS or grid is intractable beyond dimension three, so
candidate quality is scored on sampled basin points: r1 is the fraction
where Vdot < 0, and r2 is the largest fraction capturable by a sublevel
window whose members all have Vdot < 0.  A quadratic baseline from the
linearized dynamics provides the comparison curve.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import List, Optional, Sequence

import numpy as np
from scipy.linalg import solve_lyapunov

from . import kernels
from .dynamics import Box, VectorField, jacobian_at_origin, reduced_replicator
from .koopman import Basis, assemble_candidate, build_generator_l2, \
    principal_eigenpairs


@dataclass
class SampleSet:
    """Basin samples in reduced coordinates (vertex at the origin)."""
    W: np.ndarray            # (K, n-1)
    seed: int
    acceptance_rate: float


def sample_basin(A: np.ndarray, K: int, seed: int = 0, T: float = 200.0,
                 h: float = 1e-2, conv_tol: float = 1e-3,
                 min_rate: float = 1e-3) -> SampleSet:
    """Uniform simplex samples kept when their trajectory converges to e_1.

    Returned points are in reduced coordinates y = (x_2, ..., x_n).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    rng = np.random.default_rng(seed)
    if K == 0:
        return SampleSet(np.zeros((0, n - 1)), seed, 1.0)
    kept: List[np.ndarray] = []
    tried = 0
    steps = int(round(T / h))
    batch = max(4 * K, 256)
    while sum(len(k) for k in kept) < K:
        x0 = rng.dirichlet(np.ones(n), size=batch)
        ok = kernels.rk4_replicator_converged(A, x0, h, steps, 0, conv_tol)
        tried += batch
        if ok.any():
            kept.append(x0[ok][:, 1:])
        rate = sum(len(k) for k in kept) / tried
        if tried >= K / max(min_rate, 1e-12) and rate < min_rate:
            raise RuntimeError(
                f"basin acceptance rate {rate:.2e} below {min_rate:.0e}")
    W = np.vstack(kept)[:K]
    return SampleSet(W, seed, sum(len(k) for k in kept) / tried)


def _vdot_many(V, F: VectorField, pts: np.ndarray) -> np.ndarray:
    grads = V.grad_many(pts)
    return np.sum(grads * F.eval_many(pts), axis=1)


def metric_r1(V, F: VectorField, W: np.ndarray) -> float:
    """Fraction of samples with Vdot < 0."""
    if len(W) == 0:
        return 0.0
    return float(np.mean(_vdot_many(V, F, W) < 0.0))


def metric_r2(V, F: VectorField, W: np.ndarray):
    """Largest window fraction: max #{gamma1 <= V(q) <= gamma2} / K subject
    to every captured sample having Vdot < 0.

    Sort samples by V-value; any feasible window is a contiguous run of
    "good" samples, so the maximum is the longest such run.
    Returns (r2, gamma1, gamma2).
    """
    K = len(W)
    if K == 0:
        return 0.0, 0.0, 0.0
    vals = V.eval_many(W) if hasattr(V, "eval_many") else \
        np.array([V(q) for q in W])
    good = _vdot_many(V, F, W) < 0.0
    order = np.argsort(vals, kind="stable")
    vals_s = vals[order]
    good_s = good[order]
    best = 0
    best_lo = best_hi = 0.0
    i = 0
    while i < K:
        if not good_s[i]:
            i += 1
            continue
        j = i
        while j + 1 < K and good_s[j + 1]:
            j += 1
        # Ties at the run boundary: a window [g1, g2] catches every sample
        # with an equal V-value, so shrink runs whose boundary value is
        # shared with a bad sample.
        lo_i, hi_j = i, j
        while lo_i <= hi_j and _value_shared_with_bad(vals_s, good_s, lo_i):
            lo_i += 1
        while hi_j >= lo_i and _value_shared_with_bad(vals_s, good_s, hi_j):
            hi_j -= 1
        count = hi_j - lo_i + 1
        if count > best:
            best = count
            best_lo, best_hi = vals_s[lo_i], vals_s[hi_j]
        i = j + 1
    return best / K, float(best_lo), float(best_hi)


def _value_shared_with_bad(vals_s, good_s, k) -> bool:
    v = vals_s[k]
    m = k - 1
    while m >= 0 and vals_s[m] == v:
        if not good_s[m]:
            return True
        m -= 1
    m = k + 1
    while m < len(vals_s) and vals_s[m] == v:
        if not good_s[m]:
            return True
        m += 1
    return False


def metric_r2_bruteforce(V, F: VectorField, W: np.ndarray):
    """Exhaustive window enumeration over sample value pairs (oracle)."""
    K = len(W)
    if K == 0:
        return 0.0, 0.0, 0.0
    vals = V.eval_many(W) if hasattr(V, "eval_many") else \
        np.array([V(q) for q in W])
    good = _vdot_many(V, F, W) < 0.0
    best, blo, bhi = 0, 0.0, 0.0
    uniq = np.unique(vals)
    for lo in uniq:
        for hi in uniq:
            if hi < lo:
                continue
            inside = (vals >= lo) & (vals <= hi)
            if inside.any() and np.all(good[inside]):
                c = int(np.sum(inside))
                if c > best:
                    best, blo, bhi = c, float(lo), float(hi)
    return best / K, blo, bhi


class QuadraticCandidate:
    """V(y) = y^T P y from the Lyapunov equation J^T P + P J + I = 0."""

    def __init__(self, J: np.ndarray):
        J = np.asarray(J, dtype=float)
        if np.max(np.linalg.eigvals(J).real) >= 0:
            raise ValueError("Jacobian is not Hurwitz")
        P = solve_lyapunov(J.T.conj(), -np.eye(J.shape[0]))
        self.P = 0.5 * (P.real + P.real.T)

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        return np.einsum("mi,ij,mj->m", pts, self.P, pts)

    def __call__(self, y) -> float:
        y = np.asarray(y, dtype=float)
        return float(y @ self.P @ y)

    def grad_many(self, pts: np.ndarray) -> np.ndarray:
        return 2.0 * pts @ self.P


def quadratic_baseline(J: np.ndarray) -> QuadraticCandidate:
    return QuadraticCandidate(J)


@dataclass
class TrialRow:
    n: int
    trial: int
    eta: float
    a: float
    r1: float
    r2: float
    gamma1: float
    gamma2: float
    seed: int


def sweep_rbf_candidates(A: np.ndarray, W: np.ndarray, trials: int = 30,
                         n_rbf: int = 20, seed: int = 0,
                         eta_range=(0.01, 3.0), a_range=(0.1, 1.0),
                         xpi_side: float = 0.1) -> List[TrialRow]:
    """Random-search RBF candidates for one replicator instance.

    Per trial: eta log-uniform in eta_range, centers uniform in the scaled
    corner simplex {y >= 0, sum(y) <= a}; candidates come from an L2
    projection sampled near the equilibrium vertex.  Degenerate Gram trials
    are skipped (logged as NaN rows are not emitted).
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    m = n - 1
    F = reduced_replicator(A)
    J = jacobian_at_origin(F)
    rng = np.random.default_rng(seed)
    X_pi = Box((0.0,) * m, (xpi_side,) * m)
    rows: List[TrialRow] = []
    for t in range(trials):
        eta = float(np.exp(rng.uniform(np.log(eta_range[0]),
                                       np.log(eta_range[1]))))
        a = float(rng.uniform(*a_range))
        centers = a * rng.dirichlet(np.ones(n), size=n_rbf)[:, 1:]
        trial_seed = int(rng.integers(0, 2 ** 31 - 1))
        try:
            basis = Basis.gaussian_rbf(centers, eta)
            gen = build_generator_l2(F, basis, X_pi, seed=trial_seed)
            import warnings
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                pairs = principal_eigenpairs(gen, J)
            cand = assemble_candidate(pairs, basis)
        except (RuntimeError, np.linalg.LinAlgError):
            continue
        r1 = metric_r1(cand, F, W)
        r2, g1, g2 = metric_r2(cand, F, W)
        rows.append(TrialRow(n, t, eta, a, r1, r2, g1, g2, trial_seed))
    return rows


def write_metrics_csv(path: str, rows: Sequence[TrialRow],
                      baseline_rows: Sequence[TrialRow] = ()):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["n", "trial", "eta", "a", "r1", "r2",
                    "gamma1", "gamma2", "seed"])
        for r in list(rows) + list(baseline_rows):
            w.writerow([r.n, r.trial, f"{r.eta:.6g}", f"{r.a:.6g}",
                        f"{r.r1:.6g}", f"{r.r2:.6g}",
                        f"{r.gamma1:.6g}", f"{r.gamma2:.6g}", r.seed])
