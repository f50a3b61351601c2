"""Benchmark the accelerated kernels against their pure-numpy twins.

Run:  python3 benchmarks/bench_kernels.py

The module-level bindings follow ROAKIT_NO_NUMBA, but both implementations
are importable directly, so one process can time the pair side by side.
"""

import time

import numpy as np

from roakit import kernels
from roakit.dynamics import stable_vertex_game
from roakit.polycore import monomials_up_to


def timeit(fn, *args, repeat=3):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, out


def poly_arrays(rng, dim, degree, nterms):
    alphas = monomials_up_to(dim, degree)
    pick = rng.choice(len(alphas), size=min(nterms, len(alphas)),
                      replace=False)
    expo = np.array([alphas[i] for i in pick], dtype=np.int64)
    return expo, rng.normal(size=len(pick))


def main():
    if not kernels.USE_NUMBA:
        print("note: numba disabled (ROAKIT_NO_NUMBA); accelerated timings "
              "will equal the numpy ones")
    rng = np.random.default_rng(0)
    rows = []

    expo, coef = poly_arrays(rng, 2, 10, 40)
    pts = rng.uniform(-1, 1, (200_000, 2))
    kernels.poly_eval_many(expo, coef, pts[:10])   # trigger compilation
    t_acc, a = timeit(kernels.poly_eval_many, expo, coef, pts)
    t_np, b = timeit(kernels._poly_eval_many_np, expo, coef, pts)
    assert np.allclose(a, b)
    rows.append(("poly_eval_many (40 terms, 2e5 pts)", t_acc, t_np))

    gexpo, gcoef = poly_arrays(rng, 2, 18, 60)
    gcoef = np.abs(gcoef)
    corners = rng.uniform(-1, 0.9, (5_000, 2))
    kernels.validate_cells(expo, coef, gexpo, gcoef, corners[:10], 0.05,
                           0.5 * np.sqrt(2))
    t_acc, a = timeit(kernels.validate_cells, expo, coef, gexpo, gcoef,
                      corners, 0.05, 0.5 * np.sqrt(2))
    t_np, b = timeit(kernels._validate_cells_np, expo, coef, gexpo, gcoef,
                     corners, 0.05, 0.5 * np.sqrt(2), repeat=1)
    assert np.array_equal(a[0], b[0])
    rows.append(("validate_cells (5e3 cells)", t_acc, t_np))

    e1 = np.array([[1, 0]], dtype=np.int64)
    c1 = np.array([-1.0])
    e2 = np.array([[0, 1]], dtype=np.int64)
    c2 = np.array([-1.0])
    ev = np.array([[2, 0], [0, 2]], dtype=np.int64)
    cv = np.array([1.0, 1.0])
    x0 = rng.uniform(-0.6, 0.6, (20, 2))
    args = (e1, c1, e2, c2, x0, 1e-2, 2_000, ev, cv, 1e-4, 1.0, 1e4)
    kernels.rk4_field2_trajectories(*args[:4], x0[:2], *args[5:])
    t_acc, a = timeit(kernels.rk4_field2_trajectories, *args)
    t_np, b = timeit(kernels._rk4_field2_trajectories_np, *args, repeat=1)
    assert np.array_equal(a, b)
    rows.append(("rk4_field2_trajectories (20 ICs)", t_acc, t_np))

    A = stable_vertex_game(6, seed=0)
    x0 = rng.dirichlet(np.ones(6), size=20)
    kernels.rk4_replicator_converged(A, x0[:2], 1e-2, 100, 0, 1e-3)
    t_acc, a = timeit(kernels.rk4_replicator_converged, A, x0, 1e-2, 2_000,
                      0, 1e-3)
    t_np, b = timeit(kernels._rk4_replicator_converged_np, A, x0, 1e-2,
                     2_000, 0, 1e-3, repeat=1)
    assert np.array_equal(a, b)
    rows.append(("rk4_replicator_converged (20 ICs, n=6)", t_acc, t_np))

    print(f"{'kernel':<42} {'accelerated':>12} {'numpy':>12} {'speedup':>8}")
    for name, t_acc, t_np in rows:
        print(f"{name:<42} {t_acc:>11.4f}s {t_np:>11.4f}s "
              f"{t_np / t_acc:>7.1f}x")


if __name__ == "__main__":
    main()
