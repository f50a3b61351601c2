import warnings

import numpy as np
import pytest

from roakit.dynamics import Box, VectorField, builtin_system, \
    jacobian_at_origin, rescale_to_unit_box
from roakit.koopman import (Basis, EigenPair, LyapunovCandidate,
                            apply_generator, assemble_candidate,
                            build_generator_l2, build_generator_truncation,
                            candidate_for, dedupe_conjugates,
                            principal_eigenpairs)
from roakit.polycore import SparsePoly


def linear_field(A, box=None):
    n = A.shape[0]
    comps = []
    for i in range(n):
        p = SparsePoly.zero(n)
        for j in range(n):
            p = p + A[i, j] * SparsePoly.variable(n, j)
        comps.append(p)
    return VectorField(comps, box or Box.unit(n))


EX1 = builtin_system("example1")
x = SparsePoly.variable(2, 0)
y = SparsePoly.variable(2, 1)


class TestBasis:
    def test_monomial_enumeration(self):
        b = Basis.monomial(2, 3)
        assert b.size == 10
        degs = [sum(a) for a in b.exponents]
        assert degs == sorted(degs)

    def test_monomial_eval(self):
        b = Basis.monomial(2, 2)
        pts = np.array([[2.0, 3.0]])
        vals = b.eval_many(pts)[0]
        expect = [p((2.0, 3.0)) for p in
                  (SparsePoly.monomial(2, a) for a in b.exponents)]
        assert np.allclose(vals, expect)

    def test_rbf_values_and_gradients(self):
        centers = np.array([[0.0, 0.0], [0.5, -0.5]])
        b = Basis.gaussian_rbf(centers, 0.7)
        pts = np.random.default_rng(0).uniform(-1, 1, (20, 2))
        vals = b.eval_many(pts)
        d2 = np.sum((pts[:, None] - centers[None]) ** 2, axis=2)
        assert np.allclose(vals, np.exp(-0.49 * d2))
        # analytic gradient vs finite differences
        g = b.grad_many(pts)
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (b.eval_many(pts + e) - b.eval_many(pts - e)) / (2 * h)
            assert np.allclose(g[:, :, j], fd, atol=1e-7)

    def test_duplicate_centers_rejected(self):
        with pytest.raises(ValueError):
            Basis.gaussian_rbf(np.zeros((2, 2)), 1.0)


class TestApplyGenerator:
    def test_psi_x(self):
        assert apply_generator(EX1, x).allclose(y)

    def test_psi_constant(self):
        assert apply_generator(EX1, SparsePoly.constant(2, 1.0)).is_zero()

    def test_psi_y(self):
        expect = -2 * x - y + (x ** 3) * (1 / 3)
        assert apply_generator(EX1, y).allclose(expect)


class TestTruncationGenerator:
    def test_linear_field_block(self):
        A = np.array([[-1.0, 0.5], [0.25, -2.0]])
        gen = build_generator_truncation(linear_field(A), Basis.monomial(2, 1))
        # L x_j = sum_k A[j, k] x_k: the degree-1 block is A^T in the
        # basis ordering (1, y, x).
        b = gen.basis
        i_x = b.exponents.index((1, 0))
        i_y = b.exponents.index((0, 1))
        assert gen.L[i_y, i_x] == pytest.approx(A[0, 1])
        assert gen.L[i_x, i_x] == pytest.approx(A[0, 0])
        assert gen.L[i_x, i_y] == pytest.approx(A[1, 0])
        assert gen.L[i_y, i_y] == pytest.approx(A[1, 1])

    def test_constant_column_zero(self):
        gen = build_generator_truncation(EX1, Basis.monomial(2, 3))
        k = gen.basis.exponents.index((0, 0))
        assert np.allclose(gen.L[:, k], 0.0)

    def test_column_matches_truncated_image(self):
        d = 3
        basis = Basis.monomial(2, d)
        gen = build_generator_truncation(EX1, basis)
        k = basis.exponents.index((0, 1))
        img = apply_generator(EX1, y).truncate(d)
        col = SparsePoly(2, {a: gen.L[i, k]
                             for i, a in enumerate(basis.exponents)})
        assert col.allclose(img)

    def test_reconstruct_and_retruncate_all_columns(self):
        d = 4
        basis = Basis.monomial(2, d)
        gen = build_generator_truncation(EX1, basis)
        for k in range(basis.size):
            img = apply_generator(EX1, basis.element_poly(k)).truncate(d)
            col = SparsePoly(2, {a: gen.L[i, k]
                                 for i, a in enumerate(basis.exponents)})
            assert col.allclose(img)

    def test_requires_polynomial_field(self):
        with pytest.raises(ValueError):
            build_generator_truncation(builtin_system("example2"),
                                       Basis.monomial(2, 3))


class TestL2Generator:
    def test_linear_matches_truncation(self):
        A = np.array([[-1.0, 0.3], [0.0, -0.5]])
        F = linear_field(A)
        basis = Basis.monomial(2, 1)
        t = build_generator_truncation(F, basis)
        l2 = build_generator_l2(F, basis, Box.unit(2), M=100_000, seed=0)
        assert np.allclose(l2.L, t.L, atol=1e-6)

    def test_constant_basis_zero(self):
        basis = Basis.monomial(1, 0)
        f = -1.0 * SparsePoly.variable(1, 0)
        F = VectorField([f], Box((-1,), (1,)))
        gen = build_generator_l2(F, basis, Box((-0.1,), (0.1,)), M=5000)
        assert gen.L.shape == (1, 1)
        assert abs(gen.L[0, 0]) < 1e-12

    def test_rbf_recovers_jacobian_spectrum(self):
        # 9 Gaussian RBFs on the rescaled two-machine system: principal
        # eigenvalues approximate the Jacobian spectrum {-0.6, -1}.
        G, _ = rescale_to_unit_box(builtin_system("example2", K=0.2))
        rng = np.random.default_rng(0)
        basis = Basis.gaussian_rbf(rng.uniform(-1, 1, (9, 2)), 0.1)
        gen = build_generator_l2(G, basis, Box((-0.1, -0.1), (0.1, 0.1)),
                                 M=100_000, seed=0)
        pairs = principal_eigenpairs(gen, jacobian_at_origin(G))
        matched = sorted(p.lam.real for p in pairs)
        assert abs(matched[0] - (-1.0)) < 0.05
        assert abs(matched[1] - (-0.6)) < 0.05

    def test_m_floor_enforced(self):
        with pytest.raises(ValueError):
            build_generator_l2(EX1, Basis.monomial(2, 3), Box.unit(2), M=10)


class TestPrincipalEigenpairs:
    def test_spectral_inclusion_truncation(self):
        # Polynomial field + monomial basis: sigma(J) is contained in
        # sigma(L_N) exactly, so matched eigenvalues hit sigma(J) to 1e-8.
        J = np.array([[0.0, 1.0], [-2.0, -1.0]])
        for d in (3, 5):
            gen = build_generator_truncation(EX1, Basis.monomial(2, d))
            pairs = principal_eigenpairs(gen, J)
            got = sorted((p.lam for p in pairs), key=lambda z: z.imag)
            expect = sorted(np.linalg.eigvals(J), key=lambda z: z.imag)
            assert np.allclose(got, expect, atol=1e-8)

    def test_linear_field_eigenvector_support(self):
        A = np.array([[-1.0, 0.4], [0.0, -2.0]])
        gen = build_generator_truncation(linear_field(A), Basis.monomial(2, 3))
        pairs = principal_eigenpairs(gen, A)
        deg1 = [i for i, a in enumerate(gen.basis.exponents) if sum(a) == 1]
        for p in pairs:
            mass = np.abs(p.vec)
            assert mass[deg1].max() > 0.0
            others = [i for i in range(len(mass)) if i not in deg1]
            assert mass[others].max() < 1e-9

    def test_conjugate_pairs(self):
        gen = build_generator_truncation(EX1, Basis.monomial(2, 3))
        J = np.array([[0.0, 1.0], [-2.0, -1.0]])
        pairs = principal_eigenpairs(gen, J)
        lams = [p.lam for p in pairs]
        assert abs(lams[0] - lams[1].conjugate()) < 1e-10

    def test_normalization(self):
        gen = build_generator_truncation(EX1, Basis.monomial(2, 3))
        J = np.array([[0.0, 1.0], [-2.0, -1.0]])
        for p in principal_eigenpairs(gen, J):
            k = np.argmax(np.abs(p.vec))
            assert p.vec[k] == pytest.approx(1.0 + 0.0j)

    def test_residual_bound(self):
        gen = build_generator_truncation(EX1, Basis.monomial(2, 5))
        J = np.array([[0.0, 1.0], [-2.0, -1.0]])
        Lnorm = np.linalg.norm(gen.L, 2)
        for p in principal_eigenpairs(gen, J):
            res = np.linalg.norm(gen.L @ p.vec - p.lam * p.vec)
            assert res <= 1e-8 * Lnorm * np.linalg.norm(p.vec)

    def test_non_hurwitz_rejected(self):
        gen = build_generator_truncation(EX1, Basis.monomial(2, 3))
        with pytest.raises(ValueError):
            principal_eigenpairs(gen, np.array([[1.0, 0.0], [0.0, -1.0]]))


class TestCandidate:
    def single_pair(self, vec, lam=-1.0 + 0j):
        v = np.asarray(vec, dtype=complex)
        return EigenPair(complex(lam), v, complex(lam))

    def test_phi_x_gives_x_squared(self):
        basis = Basis.monomial(2, 1)
        v = np.zeros(basis.size, dtype=complex)
        v[basis.exponents.index((1, 0))] = 1.0
        cand = assemble_candidate([self.single_pair(v)], basis)
        assert cand.poly.allclose(x * x)

    def test_phi_x_plus_iy(self):
        basis = Basis.monomial(2, 1)
        v = np.zeros(basis.size, dtype=complex)
        v[basis.exponents.index((1, 0))] = 1.0
        v[basis.exponents.index((0, 1))] = 1.0j
        cand = assemble_candidate([self.single_pair(v)], basis)
        assert cand.poly.allclose(x * x + y * y)

    def test_conjugate_dedup_doubles_alpha(self):
        basis = Basis.monomial(2, 1)
        v = np.zeros(basis.size, dtype=complex)
        v[basis.exponents.index((1, 0))] = 1.0
        p1 = self.single_pair(v, -1 + 2j)
        p2 = self.single_pair(v.conjugate(), -1 - 2j)
        terms = dedupe_conjugates([p1, p2], [1.0, 1.0])
        assert len(terms) == 1
        assert terms[0][1] == pytest.approx(2.0)

    def test_example1_candidate_invariants(self):
        cand = candidate_for(EX1, Basis.monomial(2, 3))
        V = cand.poly
        assert V.degree() == 6
        assert abs(V((0.0, 0.0))) <= 1e-10
        pts = np.random.default_rng(0).uniform(-1, 1, (10_000, 2))
        assert np.all(V.eval_many(pts) >= 0.0)

    def test_gradient_matches_finite_differences(self):
        cand = candidate_for(EX1, Basis.monomial(2, 3))
        pts = np.random.default_rng(1).uniform(-1, 1, (100, 2))
        g = cand.grad_many(pts)
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (cand.eval_many(pts + e) - cand.eval_many(pts - e)) / (2 * h)
            assert np.allclose(g[:, j], fd, rtol=1e-6, atol=1e-6)

    def test_vdot_negative_near_origin(self):
        cand = candidate_for(EX1, Basis.monomial(2, 3))
        rng = np.random.default_rng(2)
        pts = rng.uniform(-0.01, 0.01, (2000, 2))
        pts = pts[np.linalg.norm(pts, axis=1) > 1e-6]
        vdot = np.sum(cand.grad_many(pts) * EX1.eval_many(pts), axis=1)
        assert np.all(vdot < 0.0)

    def test_rbf_candidate_evaluator(self):
        G, _ = rescale_to_unit_box(builtin_system("example2", K=0.2))
        cand = candidate_for(G, Basis.gaussian_rbf(
            np.random.default_rng(0).uniform(-1, 1, (9, 2)), 0.1),
            projection="l2", seed=0)
        assert cand.poly is None
        pts = np.random.default_rng(3).uniform(-1, 1, (500, 2))
        vals = cand.eval_many(pts)
        assert np.all(vals >= 0.0)
        assert abs(cand((0.0, 0.0))) <= 1e-8
        g = cand.grad_many(pts[:50])
        h = 1e-6
        for j in range(2):
            e = np.zeros(2)
            e[j] = h
            fd = (cand.eval_many(pts[:50] + e)
                  - cand.eval_many(pts[:50] - e)) / (2 * h)
            assert np.allclose(g[:, j], fd, rtol=1e-5, atol=1e-8)

    def test_alpha_positive_required(self):
        basis = Basis.monomial(2, 1)
        v = np.zeros(basis.size, dtype=complex)
        v[1] = 1.0
        with pytest.raises(ValueError):
            LyapunovCandidate([self.single_pair(v)], [-1.0], basis)
