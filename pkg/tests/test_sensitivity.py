import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

from prt.core import ModelOutputSpec, ParametricModel
from prt.errors import DimensionMismatchError, NonFiniteError
from prt.sensitivity import (
    EigenAnalysis,
    eigendecompose,
    identifiability_verdict,
    jacobian_fd,
    local_sfim,
)


def constant_model(value=5.0):
    return ParametricModel(name="const", n=2,
                           output_spec=ModelOutputSpec(kind="scalar", m=1),
                           evaluator=lambda th: np.array([value]))


class TestJacobianFd:
    def test_example1_reference(self, model1):
        jac = jacobian_fd(model1, [0.3, 1.0])
        e = math.exp(1.3)
        np.testing.assert_allclose(jac.matrix, [[e, e]], rtol=1e-6)

    def test_example2_reference(self, model2):
        jac = jacobian_fd(model2, [0.3, 1.0])
        e = math.exp(0.3)
        np.testing.assert_allclose(jac.matrix, [[1.0 * e, 0.3 * e]], rtol=1e-6)

    def test_constant_model_zero_row(self):
        jac = jacobian_fd(constant_model(), [0.7, 0.1])
        np.testing.assert_allclose(jac.matrix, [[0.0, 0.0]], atol=0)

    @pytest.mark.parametrize("which", ["model1", "model2", "model3"])
    def test_fd_matches_analytic_100_points(self, which, request):
        model = request.getfixturevalue(which)
        rng = np.random.default_rng(17)
        worst = 0.0
        for _ in range(100):
            theta = rng.uniform([0.05, 0.05], [1.0, 2.0])
            fd = jacobian_fd(model, theta).matrix
            an = jacobian_fd(model, theta, method="analytic").matrix
            scale = np.max(np.abs(an))
            worst = max(worst, np.max(np.abs(fd - an)) / scale)
        assert worst <= 1e-5

    def test_richardson_halving_ratio(self, model1, model2):
        # error(h) / error(h/2) ~ 4 for a second-order stencil
        rng = np.random.default_rng(5)
        ratios = []
        for model in (model1, model2):
            for _ in range(20):
                theta = rng.uniform([0.1, 0.1], [1.0, 2.0])
                an = jacobian_fd(model, theta, method="analytic").matrix
                e1 = np.max(np.abs(jacobian_fd(model, theta, relative_step=1e-3).matrix - an))
                e2 = np.max(np.abs(jacobian_fd(model, theta, relative_step=5e-4).matrix - an))
                ratios.append(e1 / e2)
        assert 3.5 <= np.mean(ratios) <= 4.5

    def test_one_sided_fallback(self):
        # model defined only for theta0 <= 1: central at 1.0 must fall back
        def ev(th):
            if th[0] > 1.0:
                return np.array([np.nan])
            return np.array([th[0] ** 2])

        model = ParametricModel(name="halfline", n=1,
                                output_spec=ModelOutputSpec(kind="scalar", m=1),
                                evaluator=ev)
        jac = jacobian_fd(model, [1.0], relative_step=1e-6)
        assert jac.matrix[0, 0] == pytest.approx(2.0, rel=1e-4)

    def test_both_sides_dead_raises(self):
        model = ParametricModel(name="nowhere", n=1,
                                output_spec=ModelOutputSpec(kind="scalar", m=1),
                                evaluator=lambda th: np.array([np.nan]))
        with pytest.raises(NonFiniteError):
            jacobian_fd(model, [1.0])

    def test_forward_method(self, model1):
        jac = jacobian_fd(model1, [0.3, 1.0], method="forward", relative_step=1e-7)
        np.testing.assert_allclose(jac.matrix, math.exp(1.3) * np.ones((1, 2)), rtol=1e-5)


class TestLocalSfim:
    def test_example1_matrix(self, model1):
        fim = local_sfim(jacobian_fd(model1, [0.3, 1.0], method="analytic"))
        e26 = math.exp(2.6)
        np.testing.assert_allclose(fim.matrix, e26 * np.ones((2, 2)), rtol=1e-12)

    def test_zero_jacobian(self):
        fim = local_sfim(jacobian_fd(constant_model(), [0.5, 0.5]))
        np.testing.assert_allclose(fim.matrix, np.zeros((2, 2)), atol=0)

    def test_example3_closed_form(self, model3):
        theta2 = 0.4
        fim = local_sfim(jacobian_fd(model3, [1.0, theta2], method="analytic"))
        s = 1.0 / (1.0 + theta2)
        expected = np.array([[2.0, 1.0 + s], [1.0 + s, 1.0 + s * s]])
        np.testing.assert_allclose(fim.matrix, expected, rtol=1e-12)

    def test_symmetry(self, model3):
        fim = local_sfim(jacobian_fd(model3, [0.7, 1.1]))
        assert np.array_equal(fim.matrix, fim.matrix.T)


class TestEigendecompose:
    def test_example1_eigenpair(self, model1):
        fim = local_sfim(jacobian_fd(model1, [0.3, 1.0], method="analytic"))
        eig = eigendecompose(fim.matrix)
        lam1 = 2.0 * math.exp(2.6)
        assert eig.eigenvalues[0] == pytest.approx(lam1, rel=1e-12)
        assert abs(eig.eigenvalues[1]) <= 1e-12 * lam1
        np.testing.assert_allclose(eig.eigenvectors[:, 0], [1 / np.sqrt(2), 1 / np.sqrt(2)],
                                   rtol=1e-12)
        np.testing.assert_allclose(np.abs(eig.eigenvectors[:, 1]),
                                   [1 / np.sqrt(2), 1 / np.sqrt(2)], rtol=1e-12)
        assert eig.numerical_rank == 1

    def test_example3_sharp_point(self, model3):
        fim = local_sfim(jacobian_fd(model3, [1.95, 0.05], method="analytic"))
        eig = eigendecompose(fim.matrix)
        # oracle: eigvalsh of the closed-form matrix
        np.testing.assert_allclose(eig.eigenvalues, [3.90644901, 5.80469293e-04], rtol=1e-6)
        np.testing.assert_allclose(eig.eigenvectors[:, 0], [0.71547284, 0.69864054],
                                   rtol=1e-5)

    def test_example3_balanced_point(self, model3):
        fim = local_sfim(jacobian_fd(model3, [0.05, 1.95], method="analytic"))
        eig = eigendecompose(fim.matrix)
        np.testing.assert_allclose(eig.eigenvalues, [2.96767527, 0.14723424], rtol=1e-6)

    def test_against_numpy_on_random_matrices(self):
        rng = np.random.default_rng(11)
        for n in (1, 2, 3, 5, 8, 24):
            for _ in range(20):
                a = rng.standard_normal((n, n))
                a = 0.5 * (a + a.T)
                eig = eigendecompose(a)
                ref = np.linalg.eigvalsh(a)[::-1]
                np.testing.assert_allclose(eig.eigenvalues, ref, rtol=1e-10, atol=1e-12)
                # orthogonality and reconstruction
                q = eig.eigenvectors
                np.testing.assert_allclose(q.T @ q, np.eye(n), atol=1e-10)
                rec = q @ np.diag(eig.eigenvalues) @ q.T
                scale = max(abs(eig.eigenvalues[0]), 1e-300)
                assert np.max(np.abs(rec - a)) <= 1e-8 * scale

    @settings(max_examples=50, deadline=None)
    @given(hnp.arrays(np.float64, (4, 4), elements=st.floats(-10, 10)))
    def test_orthogonality_property(self, raw):
        a = 0.5 * (raw + raw.T)
        eig = eigendecompose(a)
        np.testing.assert_allclose(eig.eigenvectors.T @ eig.eigenvectors, np.eye(4),
                                   atol=1e-10)

    def test_sign_convention_deterministic(self):
        a = np.array([[2.0, -1.0], [-1.0, 2.0]])
        e1 = eigendecompose(a)
        e2 = eigendecompose(a.copy())
        assert np.array_equal(e1.eigenvectors, e2.eigenvectors)
        for j in range(2):
            col = e1.eigenvectors[:, j]
            assert col[np.argmax(np.abs(col))] > 0

    def test_rank_counts_relative(self):
        a = np.diag([1.0, 1e-3, 1e-12])
        assert eigendecompose(a, rank_tolerance=1e-8).numerical_rank == 2
        assert eigendecompose(a, rank_tolerance=1e-4).numerical_rank == 2
        assert eigendecompose(a, rank_tolerance=1e-2).numerical_rank == 1

    def test_zero_matrix_rank_zero(self):
        eig = eigendecompose(np.zeros((3, 3)))
        assert eig.numerical_rank == 0
        assert eig.sloppiness_ratio == np.inf

    def test_asymmetric_rejected(self):
        with pytest.raises(ValueError):
            eigendecompose(np.array([[1.0, 2.0], [0.0, 1.0]]))

    def test_non_square_rejected(self):
        with pytest.raises(DimensionMismatchError):
            eigendecompose(np.ones((2, 3)))


class TestVerdict:
    def test_example1_rank_deficient(self, model1):
        fim = local_sfim(jacobian_fd(model1, [0.3, 1.0], method="analytic"))
        verdict = identifiability_verdict(eigendecompose(fim.matrix), 2)
        assert verdict.kind == "rank_deficient"
        assert verdict.rank == 1

    def test_example3_nearly_deficient(self, model3):
        fim = local_sfim(jacobian_fd(model3, [1.95, 0.05], method="analytic"))
        verdict = identifiability_verdict(eigendecompose(fim.matrix), 2,
                                          near_deficiency_ratio=1e3)
        assert verdict.kind == "nearly_deficient"
        assert verdict.ratio == pytest.approx(3.90644901 / 5.80469293e-04, rel=1e-5)

    def test_identity_map_identifiable(self):
        model = ParametricModel(name="id", n=3,
                                output_spec=ModelOutputSpec(kind="vector", m=3),
                                evaluator=lambda th: np.asarray(th, dtype=float))
        fim = local_sfim(jacobian_fd(model, [0.3, 0.5, 0.7]))
        verdict = identifiability_verdict(eigendecompose(fim.matrix), 3)
        assert verdict.kind == "locally_identifiable"


class TestRankBounds:
    def test_rank_at_most_m(self, model1, model2, model3):
        # F = J^T J with J of m rows cannot exceed rank m
        for model in (model1, model2, model3):
            fim = local_sfim(jacobian_fd(model, [0.4, 0.9]))
            eig = eigendecompose(fim.matrix)
            assert eig.numerical_rank <= model.m
