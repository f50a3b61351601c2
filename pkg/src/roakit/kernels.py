"""Hot numeric kernels with numba acceleration and a pure-numpy fallback.

Set the environment variable ROAKIT_NO_NUMBA=1 before import to force the
numpy implementations (useful for debugging and for the benchmark script).
Every jitted kernel has a numpy twin with identical semantics; the public
names are bound to one or the other at import time.
"""

from __future__ import annotations

import os

import numpy as np

USE_NUMBA = os.environ.get("ROAKIT_NO_NUMBA", "0") not in ("1", "true", "yes")

if USE_NUMBA:
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        USE_NUMBA = False

# ---------------------------------------------------------------------------
# numpy reference implementations
# ---------------------------------------------------------------------------


def _poly_eval_many_np(expo, coef, pts):
    """Evaluate sum_t coef[t] * prod_j pts[:, j]**expo[t, j] at all points."""
    m = pts.shape[0]
    out = np.zeros(m)
    for t in range(expo.shape[0]):
        term = np.full(m, coef[t])
        for j in range(expo.shape[1]):
            e = expo[t, j]
            if e:
                term *= pts[:, j] ** e
        out += term
    return out


def _monomial_box_upper_np(expo, coef, lo, hi):
    """Upper bound sum_t max_{x in C} coef[t] * x^expo[t] over the box [lo, hi].

    Per-axis extrema of x_j**e over [lo_j, hi_j] are attained at the endpoints
    or at 0 when the interval straddles it; the per-term maximum follows from
    interval multiplication.
    """
    total = 0.0
    for t in range(expo.shape[0]):
        mn, mx = coef[t], coef[t]
        for j in range(expo.shape[1]):
            e = expo[t, j]
            if e == 0:
                continue
            a = lo[j] ** e
            b = hi[j] ** e
            pmin = min(a, b)
            pmax = max(a, b)
            if lo[j] < 0.0 < hi[j]:
                pmin = min(pmin, 0.0)
            cands = (mn * pmin, mn * pmax, mx * pmin, mx * pmax)
            mn = min(cands)
            mx = max(cands)
        total += mx
    return total


def _validate_cells_np(expo, coef, gexpo, gcoef, corners, delta, margin):
    """Worst-case certification of a batch of cells against one polynomial.

    A cell with corner c and side delta is certified when the maximum of the
    polynomial over its vertices, plus margin * delta * ||grad|| bound, stays
    negative.  gexpo/gcoef describe the squared gradient norm polynomial.
    Returns (certified, vertex_max) arrays.
    """
    m, n = corners.shape
    nv = 1 << n
    certified = np.zeros(m, dtype=np.bool_)
    vmax = np.empty(m)
    for i in range(m):
        lo = corners[i]
        hi = lo + delta
        vm = -np.inf
        for v in range(nv):
            x = lo.copy()
            for j in range(n):
                if (v >> j) & 1:
                    x[j] = hi[j]
            val = 0.0
            for t in range(expo.shape[0]):
                term = coef[t]
                for j in range(n):
                    e = expo[t, j]
                    if e:
                        term *= x[j] ** e
                val += term
            vm = max(vm, val)
        vmax[i] = vm
        if vm < 0.0:
            gbound = _monomial_box_upper_np(gexpo, gcoef, lo, hi)
            gbound = np.sqrt(max(gbound, 0.0))
            certified[i] = vm + margin * delta * gbound < 0.0
    return certified, vmax


def _rk4_field2_trajectories_np(e1, c1, e2, c2, x0s, h, steps, ev, cv,
                                gamma1, gamma2, escape2):
    """RK4 batches for a 2-D polynomial field with a sublevel-set oracle.

    Integrates each initial condition and tracks the value of the polynomial
    V described by (ev, cv).  An initial condition passes when V drops to
    gamma1 or below without ever exceeding gamma2 and without escaping the
    radius sqrt(escape2).  Returns a status array: 1 pass, 0 still in
    transit, -1 violated (left the sublevel set or diverged).
    """
    m = x0s.shape[0]
    status = np.zeros(m, dtype=np.int64)

    def f(x, y, e, c):
        val = 0.0
        for t in range(e.shape[0]):
            val += c[t] * x ** e[t, 0] * y ** e[t, 1]
        return val

    for i in range(m):
        x, y = x0s[i, 0], x0s[i, 1]
        for _ in range(steps):
            k1x = f(x, y, e1, c1)
            k1y = f(x, y, e2, c2)
            k2x = f(x + 0.5 * h * k1x, y + 0.5 * h * k1y, e1, c1)
            k2y = f(x + 0.5 * h * k1x, y + 0.5 * h * k1y, e2, c2)
            k3x = f(x + 0.5 * h * k2x, y + 0.5 * h * k2y, e1, c1)
            k3y = f(x + 0.5 * h * k2x, y + 0.5 * h * k2y, e2, c2)
            k4x = f(x + h * k3x, y + h * k3y, e1, c1)
            k4y = f(x + h * k3x, y + h * k3y, e2, c2)
            x += h * (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0
            y += h * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
            vval = f(x, y, ev, cv)
            if vval > gamma2 * (1.0 + 1e-9) + 1e-12 or x * x + y * y > escape2:
                status[i] = -1
                break
            if vval <= gamma1:
                status[i] = 1
                break
    return status


def _rk4_replicator_converged_np(A, x0s, h, steps, vertex, tol):
    """Classify replicator trajectories: does x converge to the given vertex?

    Dynamics: xdot_i = x_i * ((A x)_i - x^T A x), simulated with RK4.
    Returns a boolean array (within tol of the vertex at the horizon).
    """
    m, n = x0s.shape

    def rhs(x):
        ax = A @ x
        q = x @ ax
        return x * (ax - q)

    out = np.zeros(m, dtype=np.bool_)
    for i in range(m):
        x = x0s[i].copy()
        ok = True
        for _ in range(steps):
            k1 = rhs(x)
            k2 = rhs(x + 0.5 * h * k1)
            k3 = rhs(x + 0.5 * h * k2)
            k4 = rhs(x + h * k3)
            x = x + h * (k1 + 2 * k2 + 2 * k3 + k4) / 6.0
            if not np.isfinite(x).all():
                ok = False
                break
        if ok:
            d = 0.0
            for j in range(n):
                tgt = 1.0 if j == vertex else 0.0
                d += (x[j] - tgt) ** 2
            out[i] = d <= tol * tol
    return out


# ---------------------------------------------------------------------------
# numba twins
# ---------------------------------------------------------------------------

if USE_NUMBA:

    @njit(cache=True)
    def _poly_eval_many_nb(expo, coef, pts):
        m = pts.shape[0]
        nt, n = expo.shape
        out = np.zeros(m)
        for i in range(m):
            acc = 0.0
            for t in range(nt):
                term = coef[t]
                for j in range(n):
                    e = expo[t, j]
                    for _ in range(e):
                        term *= pts[i, j]
                acc += term
            out[i] = acc
        return out

    @njit(cache=True)
    def _monomial_box_upper_nb(expo, coef, lo, hi):
        total = 0.0
        nt, n = expo.shape
        for t in range(nt):
            mn = coef[t]
            mx = coef[t]
            for j in range(n):
                e = expo[t, j]
                if e == 0:
                    continue
                a = lo[j] ** e
                b = hi[j] ** e
                pmin = min(a, b)
                pmax = max(a, b)
                if lo[j] < 0.0 < hi[j]:
                    pmin = min(pmin, 0.0)
                c1 = mn * pmin
                c2 = mn * pmax
                c3 = mx * pmin
                c4 = mx * pmax
                mn = min(min(c1, c2), min(c3, c4))
                mx = max(max(c1, c2), max(c3, c4))
            total += mx
        return total

    @njit(cache=True)
    def _validate_cells_nb(expo, coef, gexpo, gcoef, corners, delta, margin):
        m, n = corners.shape
        nv = 1 << n
        certified = np.zeros(m, dtype=np.bool_)
        vmax = np.empty(m)
        x = np.empty(n)
        for i in range(m):
            vm = -np.inf
            for v in range(nv):
                for j in range(n):
                    if (v >> j) & 1:
                        x[j] = corners[i, j] + delta
                    else:
                        x[j] = corners[i, j]
                val = 0.0
                for t in range(expo.shape[0]):
                    term = coef[t]
                    for j in range(n):
                        e = expo[t, j]
                        for _ in range(e):
                            term *= x[j]
                    val += term
                if val > vm:
                    vm = val
            vmax[i] = vm
            if vm < 0.0:
                lo = corners[i]
                hi = corners[i] + delta
                gb = _monomial_box_upper_nb(gexpo, gcoef, lo, hi)
                if gb < 0.0:
                    gb = 0.0
                certified[i] = vm + margin * delta * np.sqrt(gb) < 0.0
        return certified, vmax

    @njit(cache=True)
    def _eval2_nb(e, c, x, y):
        val = 0.0
        for t in range(e.shape[0]):
            term = c[t]
            for _ in range(e[t, 0]):
                term *= x
            for _ in range(e[t, 1]):
                term *= y
            val += term
        return val

    @njit(cache=True)
    def _rk4_field2_trajectories_nb(e1, c1, e2, c2, x0s, h, steps, ev, cv,
                                    gamma1, gamma2, escape2):
        m = x0s.shape[0]
        status = np.zeros(m, dtype=np.int64)
        for i in range(m):
            x = x0s[i, 0]
            y = x0s[i, 1]
            for _ in range(steps):
                k1x = _eval2_nb(e1, c1, x, y)
                k1y = _eval2_nb(e2, c2, x, y)
                k2x = _eval2_nb(e1, c1, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
                k2y = _eval2_nb(e2, c2, x + 0.5 * h * k1x, y + 0.5 * h * k1y)
                k3x = _eval2_nb(e1, c1, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
                k3y = _eval2_nb(e2, c2, x + 0.5 * h * k2x, y + 0.5 * h * k2y)
                k4x = _eval2_nb(e1, c1, x + h * k3x, y + h * k3y)
                k4y = _eval2_nb(e2, c2, x + h * k3x, y + h * k3y)
                x += h * (k1x + 2 * k2x + 2 * k3x + k4x) / 6.0
                y += h * (k1y + 2 * k2y + 2 * k3y + k4y) / 6.0
                vval = _eval2_nb(ev, cv, x, y)
                if vval > gamma2 * (1.0 + 1e-9) + 1e-12 or x * x + y * y > escape2:
                    status[i] = -1
                    break
                if vval <= gamma1:
                    status[i] = 1
                    break
        return status

    @njit(cache=True)
    def _rk4_replicator_converged_nb(A, x0s, h, steps, vertex, tol):
        m, n = x0s.shape
        out = np.zeros(m, dtype=np.bool_)
        k1 = np.empty(n)
        k2 = np.empty(n)
        k3 = np.empty(n)
        k4 = np.empty(n)
        xt = np.empty(n)
        for i in range(m):
            x = x0s[i].copy()
            ok = True
            for _ in range(steps):
                ax = A @ x
                q = x @ ax
                for j in range(n):
                    k1[j] = x[j] * (ax[j] - q)
                for j in range(n):
                    xt[j] = x[j] + 0.5 * h * k1[j]
                ax = A @ xt
                q = xt @ ax
                for j in range(n):
                    k2[j] = xt[j] * (ax[j] - q)
                for j in range(n):
                    xt[j] = x[j] + 0.5 * h * k2[j]
                ax = A @ xt
                q = xt @ ax
                for j in range(n):
                    k3[j] = xt[j] * (ax[j] - q)
                for j in range(n):
                    xt[j] = x[j] + h * k3[j]
                ax = A @ xt
                q = xt @ ax
                for j in range(n):
                    k4[j] = xt[j] * (ax[j] - q)
                bad = False
                for j in range(n):
                    x[j] = x[j] + h * (k1[j] + 2 * k2[j] + 2 * k3[j] + k4[j]) / 6.0
                    if not np.isfinite(x[j]):
                        bad = True
                if bad:
                    ok = False
                    break
            if ok:
                d = 0.0
                for j in range(n):
                    tgt = 1.0 if j == vertex else 0.0
                    d += (x[j] - tgt) ** 2
                out[i] = d <= tol * tol
        return out

    poly_eval_many = _poly_eval_many_nb
    monomial_box_upper = _monomial_box_upper_nb
    validate_cells = _validate_cells_nb
    rk4_field2_trajectories = _rk4_field2_trajectories_nb
    rk4_replicator_converged = _rk4_replicator_converged_nb
else:
    poly_eval_many = _poly_eval_many_np
    monomial_box_upper = _monomial_box_upper_np
    validate_cells = _validate_cells_np
    rk4_field2_trajectories = _rk4_field2_trajectories_np
    rk4_replicator_converged = _rk4_replicator_converged_np
