"""Adaptive-grid validator: worst-case cell certification and level bisection.

Cells are certified with the mean-value criterion

    max over vertices R(x) + (sqrt(n) delta / 2) max over cell ||grad R|| < 0,

where the gradient norm is bounded monomial-by-monomial on the squared norm
polynomial using interval extrema (endpoints, plus 0 for straddling axes).
Undecided cells split into 2^n children down to a minimal side.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Set, Tuple

import numpy as np
from scipy.spatial import cKDTree

from . import kernels
from .polycore import SparsePoly
from .validity import ValiditySystem

VALIDATED, FAILED = 1, 0


@dataclass
class AdaptiveGrid:
    corners: np.ndarray          # (m, n) leaf corners
    sides: np.ndarray            # (m,) leaf sides
    status: np.ndarray           # (m,) VALIDATED or FAILED
    delta0: float
    delta_min: float

    @property
    def dim(self) -> int:
        return self.corners.shape[1]

    @property
    def K_val(self) -> np.ndarray:
        return np.flatnonzero(self.status == VALIDATED)

    def to_csv(self, path: str):
        n = self.dim
        header = ",".join(f"x{j + 1}" for j in range(n)) + ",delta,status"
        with open(path, "w") as fh:
            fh.write(header + "\n")
            for i in range(len(self.sides)):
                tag = "validated" if self.status[i] == VALIDATED else "failed"
                coords = ",".join(f"{v:.12g}" for v in self.corners[i])
                fh.write(f"{coords},{self.sides[i]:.12g},{tag}\n")


def _grad_norm_sq_poly(R: SparsePoly) -> SparsePoly:
    out = SparsePoly.zero(R.dim)
    for j in range(R.dim):
        d = R.partial(j)
        out = out + d * d
    return out


def validate_cell(vs: ValiditySystem, corner, side: float) -> bool:
    """Single-cell version of the worst-case criterion (all sign patterns)."""
    corner = np.asarray([corner], dtype=float)
    n = vs.dim
    margin = 0.5 * np.sqrt(n)
    for R in vs.distinct_R():
        eR, cR = R.arrays()
        eG, cG = _grad_norm_sq_poly(R).arrays()
        ok, _ = kernels.validate_cells(eR, cR, eG, cG, corner, float(side),
                                       margin)
        if not ok[0]:
            return False
    return True


def build_grid(vs: ValiditySystem, delta0: float | None = None,
               delta_min: float | None = None) -> AdaptiveGrid:
    """Worklist subdivision of the domain box into certified / failed leaves.

    delta0 must be a power-of-two multiple of delta_min and divide the domain
    side.  The domain box must be a cube (all sides equal), which is the case
    after rescaling.
    """
    n = vs.dim
    lo = np.array(vs.domain.lo)
    hi = np.array(vs.domain.hi)
    span = hi - lo
    side = span[0]
    if not np.allclose(span, side):
        raise ValueError("adaptive grid requires a cubic domain")
    if delta0 is None:
        delta0 = side / 16.0
    if delta_min is None:
        delta_min = delta0 / 2 ** 6
    ratio = delta0 / delta_min
    if abs(ratio - round(ratio)) > 1e-9 or abs(np.log2(round(ratio)) % 1) > 1e-9:
        raise ValueError("delta0 must be a power-of-two multiple of delta_min")
    k0 = side / delta0
    if abs(k0 - round(k0)) > 1e-9:
        raise ValueError("domain side must be divisible by delta0")
    k0 = int(round(k0))

    polys = [(R.arrays(), _grad_norm_sq_poly(R).arrays())
             for R in vs.distinct_R()]
    margin = 0.5 * np.sqrt(n)

    grids = np.meshgrid(*[lo[j] + delta0 * np.arange(k0) for j in range(n)],
                        indexing="ij")
    work = np.stack([g.ravel() for g in grids], axis=1)
    delta = delta0
    leaf_corners: List[np.ndarray] = []
    leaf_sides: List[float] = []
    leaf_status: List[int] = []
    offsets_cache: Dict[float, np.ndarray] = {}
    while work.shape[0] > 0:
        certified = np.ones(work.shape[0], dtype=bool)
        for (eR, cR), (eG, cG) in polys:
            ok, _ = kernels.validate_cells(eR, cR, eG, cG, work, float(delta),
                                           margin)
            certified &= ok
            if not certified.any():
                break
        done = work[certified]
        if done.size:
            leaf_corners.append(done)
            leaf_sides.extend([delta] * done.shape[0])
            leaf_status.extend([VALIDATED] * done.shape[0])
        undecided = work[~certified]
        if delta <= delta_min * (1 + 1e-9):
            if undecided.size:
                leaf_corners.append(undecided)
                leaf_sides.extend([delta] * undecided.shape[0])
                leaf_status.extend([FAILED] * undecided.shape[0])
            break
        half = delta / 2.0
        if half not in offsets_cache:
            offs = np.array(np.meshgrid(*[[0.0, half]] * n,
                                        indexing="ij")).reshape(n, -1).T
            offsets_cache[half] = offs
        offs = offsets_cache[half]
        work = (undecided[:, None, :] + offs[None, :, :]).reshape(-1, n)
        delta = half
    corners = (np.vstack(leaf_corners) if leaf_corners
               else np.zeros((0, n)))
    return AdaptiveGrid(corners, np.array(leaf_sides), np.array(leaf_status),
                        delta0, delta_min)


# ---------------------------------------------------------------------------
# level-set cell identification
# ---------------------------------------------------------------------------


def _vertex_values(grid: AdaptiveGrid, V: SparsePoly) -> Tuple[np.ndarray, np.ndarray]:
    """Per-leaf (min, max) of V over the cell vertices."""
    n = grid.dim
    m = grid.corners.shape[0]
    vmin = np.full(m, np.inf)
    vmax = np.full(m, -np.inf)
    for mask in range(1 << n):
        offs = np.array([(mask >> j) & 1 for j in range(n)], dtype=float)
        pts = grid.corners + grid.sides[:, None] * offs[None, :]
        vals = V.eval_many(pts)
        vmin = np.minimum(vmin, vals)
        vmax = np.maximum(vmax, vals)
    return vmin, vmax


class LevelLocator:
    """Precomputes vertex values, adjacency structures and gradient bounds
    used by repeated level-cell queries during bisection."""

    def __init__(self, grid: AdaptiveGrid, V: SparsePoly, m_b: int = 5):
        self.grid = grid
        self.V = V
        self.m_b = m_b
        self.vmin, self.vmax = _vertex_values(grid, V)
        self.centers = grid.corners + 0.5 * grid.sides[:, None]
        self.tree = cKDTree(self.centers)
        self.max_side = float(grid.sides.max()) if len(grid.sides) else 0.0
        eG, cG = _grad_norm_sq_poly(V).arrays()
        self._eG, self._cG = eG, cG
        self._gbound_cache: Dict[int, float] = {}

    def _grad_bound(self, i: int) -> float:
        if i not in self._gbound_cache:
            lo = self.grid.corners[i]
            hi = lo + self.grid.sides[i]
            b = kernels.monomial_box_upper(self._eG, self._cG, lo, hi)
            self._gbound_cache[i] = float(np.sqrt(max(b, 0.0)))
        return self._gbound_cache[i]

    def _face_samples(self, i: int) -> Tuple[np.ndarray, float]:
        """Sample points on the boundary of cell i plus their fill distance."""
        n = self.grid.dim
        lo = self.grid.corners[i]
        side = self.grid.sides[i]
        k = self.m_b
        lin = np.linspace(0.0, side, k)
        pts = []
        for axis in range(n):
            others = [lin] * (n - 1)
            mesh = np.meshgrid(*others, indexing="ij") if n > 1 else []
            flat = [g.ravel() for g in mesh]
            count = flat[0].size if flat else 1
            for face_val in (0.0, side):
                block = np.empty((count, n))
                col = 0
                for j in range(n):
                    if j == axis:
                        block[:, j] = lo[j] + face_val
                    else:
                        block[:, j] = lo[j] + flat[col]
                        col += 1
                pts.append(block)
        pts = np.vstack(pts)
        spacing = side / (k - 1) if k > 1 else side
        fill = 0.5 * spacing * np.sqrt(max(n - 1, 1))
        return pts, fill

    def _neighbors(self, idx: np.ndarray) -> Set[int]:
        out: Set[int] = set()
        if len(idx) == 0:
            return out
        for i in idx:
            r = 0.5 * np.sqrt(self.grid.dim) * (self.grid.sides[i]
                                                + self.max_side) + 1e-12
            for j in self.tree.query_ball_point(self.centers[i], r):
                if j != i and _face_adjacent(self.grid, i, j):
                    out.add(int(j))
        return out

    def level_cells(self, gamma: float) -> Set[int]:
        """Cells whose vertex values straddle gamma, plus face-adjacent
        neighbors passing the sampled-boundary proximity test."""
        crossing = np.flatnonzero((self.vmin < gamma) & (self.vmax > gamma))
        out = set(int(i) for i in crossing)
        for j in self._neighbors(crossing):
            if j in out:
                continue
            pts, fill = self._face_samples(j)
            vals = self.V.eval_many(pts)
            if np.min(np.abs(vals - gamma)) < fill * self._grad_bound(j):
                out.add(j)
        return out

    def annulus_cells(self, gamma1: float, gamma2: float) -> Set[int]:
        if gamma1 >= gamma2:
            raise ValueError("require gamma1 < gamma2")
        out = self.level_cells(gamma1) | self.level_cells(gamma2)
        inner = np.flatnonzero((self.vmin > gamma1) & (self.vmax < gamma2))
        out |= set(int(i) for i in inner)
        return out


def _face_adjacent(grid: AdaptiveGrid, i: int, j: int,
                   tol: float = 1e-10) -> bool:
    """Leaves share an (n-1)-face: touching along one axis, overlapping in
    all the others with positive measure."""
    n = grid.dim
    a_lo, a_hi = grid.corners[i], grid.corners[i] + grid.sides[i]
    b_lo, b_hi = grid.corners[j], grid.corners[j] + grid.sides[j]
    touch_axis = -1
    for ax in range(n):
        if abs(a_hi[ax] - b_lo[ax]) < tol or abs(b_hi[ax] - a_lo[ax]) < tol:
            if touch_axis >= 0:
                return False  # touching along two axes -> edge/corner contact
            touch_axis = ax
        elif a_hi[ax] < b_lo[ax] + tol or b_hi[ax] < a_lo[ax] + tol:
            return False
    if touch_axis < 0:
        return False
    for ax in range(n):
        if ax == touch_axis:
            continue
        if min(a_hi[ax], b_hi[ax]) - max(a_lo[ax], b_lo[ax]) <= tol:
            return False
    return True


# ---------------------------------------------------------------------------
# bisection over (gamma1, gamma2)
# ---------------------------------------------------------------------------


def boundary_gamma_cap(V: SparsePoly, domain, samples_per_face: int = 1000,
                       seed: int = 0) -> float:
    """Upper cap on gamma2: min of V over the domain-box boundary (sampled),
    so that the sublevel set stays inside the region of interest."""
    rng = np.random.default_rng(seed)
    n = V.dim
    lo = np.array(domain.lo)
    hi = np.array(domain.hi)
    best = np.inf
    for axis in range(n):
        for val in (lo[axis], hi[axis]):
            pts = rng.uniform(lo, hi, size=(samples_per_face, n))
            pts[:, axis] = val
            best = min(best, float(V.eval_many(pts).min()))
    return best


def certify_levels_grid(grid: AdaptiveGrid, V: SparsePoly, domain,
                        tol: float = 1e-3, m_b: int = 5):
    """Maximize the certified annulus by bisection: the smallest feasible
    gamma1 first, then the largest gamma2 at that gamma1.

    Returns (gamma1, gamma2, diagnostics) or None when no pair is feasible.
    Feasibility of a pair means every annulus cell is a validated leaf.
    """
    loc = LevelLocator(grid, V, m_b=m_b)
    valset = set(int(i) for i in grid.K_val)
    cap = boundary_gamma_cap(V, domain) * (1.0 - 1e-6)
    if cap <= 0:
        return None

    def feasible(g1: float, g2: float) -> bool:
        if not g1 < g2 <= cap:
            return False
        return loc.annulus_cells(g1, g2).issubset(valset)

    def exists_g2(g1: float) -> bool:
        g2 = min(cap, max(g1 * (1.0 + 4.0 * tol), g1 + tol * cap))
        if g2 <= g1:
            return False
        return feasible(g1, g2)

    # Smallest feasible gamma1 (monotone: larger gamma1 can only help).
    if exists_g2(0.0):
        g1 = 0.0
    else:
        lo_g, hi_g = 0.0, cap
        if not exists_g2(hi_g * 0.5):
            # coarse scan for a feasible bracket
            found = None
            for t in np.linspace(0.02, 0.98, 49):
                if exists_g2(cap * t):
                    found = cap * t
                    break
            if found is None:
                return None
            hi_g = found
        else:
            hi_g = cap * 0.5
        while hi_g - lo_g > tol * max(hi_g, 1e-12):
            mid = 0.5 * (lo_g + hi_g)
            if exists_g2(mid):
                hi_g = mid
            else:
                lo_g = mid
        g1 = hi_g

    # Largest feasible gamma2 at this gamma1.
    g2_lo = min(cap, max(g1 * (1.0 + 4.0 * tol), g1 + tol * cap))
    if feasible(g1, cap):
        g2 = cap
    else:
        lo_g, hi_g = g2_lo, cap
        while hi_g - lo_g > tol * max(cap, 1e-12):
            mid = 0.5 * (lo_g + hi_g)
            if feasible(g1, mid):
                lo_g = mid
            else:
                hi_g = mid
        g2 = lo_g
    if not feasible(g1, g2):
        return None
    diag = {"cap": cap, "cells": int(len(grid.sides)),
            "validated": int(len(grid.K_val)), "tol": tol}
    return g1, g2, diag
