"""Vector fields, benchmark systems, rescaling and trajectory integration.

Components of a vector field are either SparsePoly instances or BlackBox
evaluators.  A BlackBox optionally carries a closed-form truncated power
series provider (used by the Taylor machinery) and an analytic gradient.
All systems are assumed to have their equilibrium at the origin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .polycore import SparsePoly


@dataclass(frozen=True)
class Box:
    """Axis-aligned box with lo < hi componentwise."""
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo = tuple(float(v) for v in self.lo)
        hi = tuple(float(v) for v in self.hi)
        if len(lo) != len(hi):
            raise ValueError("lo/hi length mismatch")
        if not all(a < b for a, b in zip(lo, hi)):
            raise ValueError("box requires lo < hi componentwise")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return len(self.lo)

    def diameter(self) -> float:
        return float(np.linalg.norm(np.subtract(self.hi, self.lo)))

    def contains(self, x, tol: float = 1e-12) -> bool:
        return all(l - tol <= v <= h + tol
                   for v, l, h in zip(x, self.lo, self.hi))

    def sample(self, m: int, rng: np.random.Generator) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(m, self.dim))

    @staticmethod
    def unit(dim: int) -> "Box":
        return Box((-1.0,) * dim, (1.0,) * dim)


@dataclass
class BlackBox:
    """Non-polynomial scalar component: evaluator plus optional extras.

    series(order) must return the truncated power series at the origin as a
    SparsePoly of total degree <= order.
    """
    fn: Callable[[np.ndarray], float]
    series: Optional[Callable[[int], SparsePoly]] = None
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    vectorized: bool = False  # fn accepts (m, n) batches along axis 0

    def __call__(self, x) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))


class VectorField:
    """n-dimensional vector field with a domain box and origin equilibrium."""

    def __init__(self, components: Sequence, domain: Box, name: str = "custom"):
        self.dim = len(components)
        if domain.dim != self.dim:
            raise ValueError("domain dimension mismatch")
        self.components = list(components)
        self.domain = domain
        self.name = name
        f0 = self.eval_point(np.zeros(self.dim))
        if np.max(np.abs(f0)) > 1e-10:
            raise ValueError(f"origin is not an equilibrium: F(0)={f0}")

    @property
    def is_polynomial(self) -> bool:
        return all(isinstance(c, SparsePoly) for c in self.components)

    def eval_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.array([c(x) for c in self.components])

    def eval_many(self, pts: np.ndarray) -> np.ndarray:
        """(m, n) points -> (m, n) field values."""
        pts = np.asarray(pts, dtype=float)
        cols = []
        for c in self.components:
            if isinstance(c, SparsePoly):
                cols.append(c.eval_many(pts))
            elif c.vectorized:
                cols.append(np.asarray(c.fn(pts), dtype=float))
            else:
                cols.append(np.array([c(p) for p in pts]))
        return np.stack(cols, axis=1)

    def component_series(self, i: int, order: int) -> SparsePoly:
        c = self.components[i]
        if isinstance(c, SparsePoly):
            return c.truncate(order)
        if c.series is None:
            raise ValueError(f"component {i} has no series provider")
        return c.series(order)


def jacobian_at_origin(F: VectorField, fd_step: float = 1e-6) -> np.ndarray:
    """Jacobian at 0: exact for polynomial components, central FD otherwise."""
    n = F.dim
    J = np.zeros((n, n))
    for i, c in enumerate(F.components):
        if isinstance(c, SparsePoly):
            for a, coeff in c.terms.items():
                if sum(a) == 1:
                    J[i, a.index(1)] = coeff
        else:
            for j in range(n):
                e = np.zeros(n)
                e[j] = fd_step
                J[i, j] = (c(e) - c(-e)) / (2 * fd_step)
    return J


@dataclass(frozen=True)
class AffineMap:
    """x_original = scale * x_rescaled (componentwise); shift is always 0."""
    scale: tuple

    def to_original(self, y) -> np.ndarray:
        return np.asarray(y, dtype=float) * np.asarray(self.scale)

    def to_rescaled(self, x) -> np.ndarray:
        return np.asarray(x, dtype=float) / np.asarray(self.scale)


def rescale_to_unit_box(F: VectorField):
    """Rescale so the domain maps into [-1, 1]^n; returns (G, AffineMap).

    G(y) = D^-1 F(D y) with D = diag(max(|lo_i|, |hi_i|)).  The origin must
    be interior to the domain.
    """
    lo, hi = F.domain.lo, F.domain.hi
    if not all(l < 0 < h for l, h in zip(lo, hi)):
        raise ValueError("origin must be interior to the domain")
    scale = tuple(max(abs(l), abs(h)) for l, h in zip(lo, hi))
    amap = AffineMap(scale)
    comps = []
    for i, c in enumerate(F.components):
        s_i = scale[i]
        if isinstance(c, SparsePoly):
            comps.append(c.affine_substitute(scale) * (1.0 / s_i))
        else:
            comps.append(_rescaled_blackbox(c, np.array(scale), s_i))
    dom = Box(tuple(l / s for l, s in zip(lo, scale)),
              tuple(h / s for h, s in zip(hi, scale)))
    G = VectorField(comps, dom, name=f"{F.name}_rescaled")
    return G, amap


def _rescaled_blackbox(c: BlackBox, scale: np.ndarray, s_i: float) -> BlackBox:
    fn = lambda y: c.fn(np.asarray(y) * scale) / s_i
    series = None
    if c.series is not None:
        series = lambda order: (c.series(order)
                                .affine_substitute(scale) * (1.0 / s_i))
    grad = None
    if c.grad is not None:
        grad = lambda y: np.asarray(c.grad(scale * y)) * scale / s_i
    return BlackBox(fn, series=series, grad=grad, vectorized=c.vectorized)


def integrate(F: VectorField, x0, T: float, h: float):
    """Fixed-step RK4; returns (times, states, diverged flag).

    Divergence is flagged when the state norm exceeds 10x the domain
    diameter or becomes non-finite; integration then stops.
    """
    if h <= 0 or T < h:
        raise ValueError("require h > 0 and T >= h")
    x = np.asarray(x0, dtype=float).copy()
    steps = int(round(T / h))
    limit = 10.0 * F.domain.diameter()
    ts = [0.0]
    xs = [x.copy()]
    diverged = False
    for k in range(steps):
        k1 = F.eval_point(x)
        k2 = F.eval_point(x + 0.5 * h * k1)
        k3 = F.eval_point(x + 0.5 * h * k2)
        k4 = F.eval_point(x + h * k3)
        x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
        ts.append((k + 1) * h)
        xs.append(x.copy())
        if not np.isfinite(x).all() or np.linalg.norm(x) > limit:
            diverged = True
            break
    return np.array(ts), np.array(xs), diverged


# ---------------------------------------------------------------------------
# closed-form power series for the builtin non-polynomial components
# ---------------------------------------------------------------------------


def sin_series_of(u: SparsePoly, order: int) -> SparsePoly:
    """Truncated series of sin(u(x)) up to total degree `order` (u(0) = 0)."""
    out = SparsePoly.zero(u.dim)
    upow = u
    k = 0
    while (2 * k + 1) * _min_deg(u) <= order:
        coeff = (-1.0) ** k / math.factorial(2 * k + 1)
        out = out + (upow * coeff).truncate(order)
        upow = (upow * u * u).truncate(order)
        k += 1
    return out


def inv_sqrt1p_sq_series_of(u: SparsePoly, order: int) -> SparsePoly:
    """Truncated series of -u / sqrt(1 + u^2) up to total degree `order`.

    Binomial series: -u (1+u^2)^(-1/2) = -sum_k (-1)^k C(2k, k) / 4^k u^(2k+1).
    """
    out = SparsePoly.zero(u.dim)
    upow = u
    k = 0
    while (2 * k + 1) * _min_deg(u) <= order:
        coeff = -((-1.0) ** k) * math.comb(2 * k, k) / 4.0 ** k
        out = out + (upow * coeff).truncate(order)
        upow = (upow * u * u).truncate(order)
        k += 1
    return out


def _min_deg(p: SparsePoly) -> int:
    return min(sum(a) for a in p.terms) if p.terms else 1


# ---------------------------------------------------------------------------
# builtin systems
# ---------------------------------------------------------------------------


def builtin_system(name: str, n: int | None = None,
                   A: np.ndarray | None = None, K: float = 0.2) -> VectorField:
    """Benchmark systems: example1, example2, example3, replicator(n, A)."""
    if name == "example1":
        x = SparsePoly.variable(2, 0)
        y = SparsePoly.variable(2, 1)
        f1 = y
        f2 = -2.0 * x - y + (x ** 3) * (1.0 / 3.0)
        return VectorField([f1, f2], Box((-5, -5), (5, 5)), name="example1")

    if name == "example2":
        x = SparsePoly.variable(2, 0)
        y = SparsePoly.variable(2, 1)
        u1 = x - y
        u2 = y - x

        def mk(u: SparsePoly, ia: int, ib: int) -> BlackBox:
            # K*sin(x_a - x_b) - sin(x_a)
            fn = lambda p: (K * np.sin(p[..., ia] - p[..., ib])
                            - np.sin(p[..., ia]))
            xa = SparsePoly.variable(2, ia)
            series = lambda order: (K * sin_series_of(u, order)
                                    - sin_series_of(xa, order))
            return BlackBox(fn, series=series, vectorized=True)

        f1 = mk(u1, 0, 1)
        f2 = mk(u2, 1, 0)
        return VectorField([f1, f2], Box((-3.5, -3.5), (3.5, 3.5)),
                           name="example2")

    if name == "example3":
        x = SparsePoly.variable(2, 0)
        y = SparsePoly.variable(2, 1)
        f1 = y
        u = x + y
        fn2 = lambda p: (-(p[..., 0] + p[..., 1])
                         / np.sqrt(1.0 + (p[..., 0] + p[..., 1]) ** 2))
        series2 = lambda order: inv_sqrt1p_sq_series_of(u, order)
        f2 = BlackBox(fn2, series=series2, vectorized=True)
        return VectorField([f1, f2], Box((-4, -4), (4, 4)), name="example3")

    if name == "replicator":
        if n is None or A is None:
            raise ValueError("replicator requires n and A")
        A = np.asarray(A, dtype=float)
        if A.shape != (n, n):
            raise ValueError(f"A must be {n}x{n}")
        return reduced_replicator(A)

    raise ValueError(f"unknown builtin system: {name}")


def reduced_replicator(A: np.ndarray) -> VectorField:
    """Replicator dynamics reduced to the vertex e_1.

    Full dynamics x_i' = x_i ((A x)_i - x^T A x) on the simplex; the first
    coordinate is eliminated via x_1 = 1 - sum(y) and the equilibrium vertex
    e_1 maps to y = 0.  Components are exact polynomials in y.
    """
    A = np.asarray(A, dtype=float)
    n = A.shape[0]
    m = n - 1
    one = SparsePoly.constant(m, 1.0)
    ys = [SparsePoly.variable(m, j) for j in range(m)]
    x1 = one - sum(ys, SparsePoly.zero(m))
    xs = [x1] + ys  # full-simplex coordinates as polynomials in y
    Ax = []
    for i in range(n):
        acc = SparsePoly.zero(m)
        for j in range(n):
            if A[i, j] != 0.0:
                acc = acc + xs[j] * A[i, j]
        Ax.append(acc)
    quad = SparsePoly.zero(m)
    for i in range(n):
        quad = quad + xs[i] * Ax[i]
    comps = [ys[j] * (Ax[j + 1] - quad) for j in range(m)]
    # Domain: bounding box of the reduced simplex, symmetrized about 0 so the
    # origin is interior (trajectories of interest stay in the simplex).
    dom = Box((-1.0,) * m, (1.0,) * m)
    vf = VectorField(comps, dom, name=f"replicator{n}")
    vf.full_matrix = A
    return vf


def stable_vertex_game(n: int, seed: int = 0) -> np.ndarray:
    """Random payoff matrix with an asymptotically stable equilibrium at e_1.

    Vertex e_1 of the replicator dynamics is asymptotically stable when
    A[j,0] < A[0,0] for all j != 0; entries are otherwise uniform in [0, 1).
    """
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(n, n))
    A[0, 0] = 1.0
    A[1:, 0] = rng.uniform(0.0, 0.8, size=n - 1)
    return A
