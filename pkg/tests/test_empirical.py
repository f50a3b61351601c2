import numpy as np
import pytest

from roakit.dynamics import (Box, VectorField, jacobian_at_origin,
                             reduced_replicator, stable_vertex_game)
from roakit.empirical import (QuadraticCandidate, SampleSet, metric_r1,
                              metric_r2, metric_r2_bruteforce, sample_basin,
                              sweep_rbf_candidates, write_metrics_csv,
                              TrialRow)
from roakit.polycore import SparsePoly


def linear_field(n, a=-1.0):
    comps = [a * SparsePoly.variable(n, j) for j in range(n)]
    return VectorField(comps, Box((-1,) * n, (1,) * n))


class PointsCandidate:
    """Lookup table: prescribed V values and Vdot signs on known points."""

    def __init__(self, pts, vals, vdots):
        self.pts = np.asarray(pts, float)
        self.vals = np.asarray(vals, float)
        self.vdots = np.asarray(vdots, float)

    def _find(self, pts):
        idx = []
        for p in np.asarray(pts, float):
            d = np.linalg.norm(self.pts - p, axis=1)
            idx.append(int(np.argmin(d)))
        return np.array(idx)

    def eval_many(self, pts):
        return self.vals[self._find(pts)]

    def grad_many(self, pts):
        # Vdot = grad . F; against F = -x (so F = -pts) we encode the
        # prescribed derivative in the first gradient component
        i = self._find(pts)
        g = np.zeros((len(i), self.pts.shape[1]))
        g[:, 0] = self.vdots[i] / (-self.pts[i, 0])
        return g


class TestMetrics:
    def test_r1_all_good_quadratic(self):
        F = linear_field(2)
        V = QuadraticCandidate(np.diag([-1.0, -1.0]))
        W = np.random.default_rng(0).uniform(0.1, 1.0, (200, 2))
        assert metric_r1(V, F, W) == 1.0

    def test_r1_counts_fraction(self):
        F = linear_field(1)
        pts = np.array([[0.5], [1.0], [1.5], [2.0]])
        cand = PointsCandidate(pts, [1, 2, 3, 4], [-1, -1, 1, -1])
        assert metric_r1(cand, F, pts) == 0.75

    def test_r2_longest_run(self):
        F = linear_field(1)
        pts = np.array([[0.5], [1.0], [1.5], [2.0], [2.5]])
        # good pattern sorted by V: G B G G G -> best window holds 3
        cand = PointsCandidate(pts, [1, 2, 3, 4, 5], [-1, 1, -1, -1, -1])
        r2, g1, g2 = metric_r2(cand, F, pts)
        assert r2 == pytest.approx(3 / 5)
        assert (g1, g2) == (3.0, 5.0)

    def test_r2_tie_with_bad_sample_shrinks(self):
        F = linear_field(1)
        pts = np.array([[0.5], [1.0], [1.5], [2.0]])
        # two samples share V = 2, one of them bad: the window cannot
        # include value 2, so only the V = 1 sample is capturable
        cand = PointsCandidate(pts, [1, 2, 2, 3], [-1, -1, 1, 1])
        r2, g1, g2 = metric_r2(cand, F, pts)
        assert r2 == pytest.approx(1 / 4)
        assert g1 == g2 == 1.0

    def test_r2_empty_when_all_bad(self):
        F = linear_field(1)
        pts = np.array([[0.5], [1.0]])
        cand = PointsCandidate(pts, [1, 2], [1, 1])
        assert metric_r2(cand, F, pts)[0] == 0.0

    def test_bounds_chain(self):
        rng = np.random.default_rng(1)
        F = linear_field(2)
        for _ in range(10):
            K = int(rng.integers(1, 15))
            pts = rng.uniform(0.1, 1.0, (K, 2))
            cand = PointsCandidate(pts, rng.uniform(0, 3, K),
                                   rng.choice([-1.0, 1.0], K))
            r1 = metric_r1(cand, F, pts)
            r2, _, _ = metric_r2(cand, F, pts)
            assert 0.0 <= r2 <= r1 <= 1.0

    def test_r2_matches_bruteforce(self):
        rng = np.random.default_rng(2)
        F = linear_field(2)
        for trial in range(30):
            K = int(rng.integers(1, 20))
            pts = rng.uniform(0.1, 1.0, (K, 2))
            vals = np.round(rng.uniform(0, 2, K), 1)   # force ties
            cand = PointsCandidate(pts, vals, rng.choice([-1.0, 1.0], K))
            fast = metric_r2(cand, F, pts)[0]
            slow = metric_r2_bruteforce(cand, F, pts)[0]
            assert fast == pytest.approx(slow)

    def test_empty_sample_set(self):
        F = linear_field(2)
        V = QuadraticCandidate(np.diag([-1.0, -1.0]))
        W = np.zeros((0, 2))
        assert metric_r1(V, F, W) == 0.0
        assert metric_r2(V, F, W) == (0.0, 0.0, 0.0)


class TestQuadraticCandidate:
    def test_identity_jacobian(self):
        V = QuadraticCandidate(-np.eye(3))
        assert np.allclose(V.P, 0.5 * np.eye(3))

    def test_lyapunov_residual(self):
        rng = np.random.default_rng(3)
        for _ in range(5):
            n = int(rng.integers(2, 6))
            J = rng.normal(size=(n, n)) - 2.0 * n * np.eye(n)
            V = QuadraticCandidate(J)
            res = J.T @ V.P + V.P @ J + np.eye(n)
            assert np.max(np.abs(res)) <= 1e-9
            assert np.min(np.linalg.eigvalsh(V.P)) > 0

    def test_non_hurwitz_rejected(self):
        with pytest.raises(ValueError):
            QuadraticCandidate(np.diag([-1.0, 0.5]))

    def test_gradient(self):
        V = QuadraticCandidate(np.array([[-2.0, 0.3], [0.1, -1.0]]))
        pts = np.random.default_rng(4).uniform(-1, 1, (20, 2))
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (V.eval_many(pts + e) - V.eval_many(pts - e)) / (2 * h)
            assert np.allclose(V.grad_many(pts)[:, j], fd, atol=1e-6)


class TestSampleBasin:
    def test_simplex_invariants(self):
        A = stable_vertex_game(4, seed=0)
        ss = sample_basin(A, 100, seed=0, T=60.0)
        assert ss.W.shape == (100, 3)
        assert np.all(ss.W >= -1e-12)
        assert np.all(ss.W.sum(axis=1) <= 1.0 + 1e-9)
        assert 0.0 < ss.acceptance_rate <= 1.0

    def test_k_zero(self):
        A = stable_vertex_game(3, seed=0)
        ss = sample_basin(A, 0)
        assert ss.W.shape == (0, 2)

    def test_samples_converge(self):
        # re-integrate a few returned samples and confirm convergence to
        # the reduced-coordinate origin
        from roakit.dynamics import integrate
        A = stable_vertex_game(4, seed=1)
        F = reduced_replicator(A)
        ss = sample_basin(A, 20, seed=1, T=60.0)
        for y0 in ss.W[:5]:
            _, ys, diverged = integrate(F, y0, 200.0, 1e-2)
            assert not diverged
            assert np.linalg.norm(ys[-1]) < 1e-3

    def test_quadratic_r1_near_vertex(self):
        # close to the equilibrium the linearization dominates, so the
        # baseline derivative is negative on nearby basin points
        A = stable_vertex_game(4, seed=2)
        F = reduced_replicator(A)
        V = QuadraticCandidate(jacobian_at_origin(F))
        ss = sample_basin(A, 200, seed=2, T=60.0)
        W = ss.W[np.linalg.norm(ss.W, axis=1) < 0.05]
        if len(W):
            assert metric_r1(V, F, W) == 1.0


class TestSweep:
    def test_rows_well_formed(self):
        A = stable_vertex_game(4, seed=5)
        ss = sample_basin(A, 150, seed=5, T=60.0)
        rows = sweep_rbf_candidates(A, ss.W, trials=5, seed=5)
        assert len(rows) >= 1
        for r in rows:
            assert r.n == 4
            assert 0.01 <= r.eta <= 3.0
            assert 0.1 <= r.a <= 1.0
            assert 0.0 <= r.r2 <= r.r1 <= 1.0

    def test_csv_round_trip(self, tmp_path):
        rows = [TrialRow(4, 0, 0.5, 0.3, 0.9, 0.8, 0.0, 1.0, 7)]
        path = tmp_path / "m.csv"
        write_metrics_csv(str(path), rows)
        lines = path.read_text().strip().splitlines()
        assert lines[0].startswith("n,trial,eta")
        assert lines[1].split(",")[0] == "4"
        assert len(lines) == 2
