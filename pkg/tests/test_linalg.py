"""Factorization, solves, log-determinant, and eigenvalue extraction."""

import numpy as np
import pytest

from fkgp import linalg
from fkgp.errors import FactorizationError


def random_spd(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n)


class TestCholesky:
    def test_identity(self):
        f = linalg.cholesky(np.eye(4))
        np.testing.assert_array_equal(f.lower, np.eye(4))
        assert f.jitter_used == 0.0

    def test_hand_factor(self):
        f = linalg.cholesky(np.array([[4.0, 2.0], [2.0, 5.0]]))
        np.testing.assert_allclose(f.lower, [[2.0, 0.0], [1.0, 2.0]], atol=1e-15)

    def test_singular_matrix_escalates_jitter(self):
        f = linalg.cholesky(np.ones((3, 3)))
        assert f.jitter_used > 0.0

    def test_asymmetric_input_is_symmetrized(self):
        A = np.array([[2.0, 1.0], [0.0, 2.0]])
        f = linalg.cholesky(A)
        np.testing.assert_array_equal(f.matrix, 0.5 * (A + A.T))

    def test_residual_bound(self):
        for seed in range(5):
            A = random_spd(7, seed)
            f = linalg.cholesky(A)
            res = np.linalg.norm(f.lower @ f.lower.T - (A + f.jitter_used * np.eye(7)))
            assert res <= 1e-8 * np.linalg.norm(A)

    def test_indefinite_matrix_fails(self):
        with pytest.raises(FactorizationError):
            linalg.cholesky(-np.eye(3))


class TestSolve:
    def test_identity_solve(self):
        f = linalg.cholesky(np.eye(3))
        rhs = np.array([1.0, -2.0, 3.0])
        np.testing.assert_array_equal(linalg.solve(f, rhs), rhs)

    def test_residual(self):
        A = np.array([[4.0, 2.0], [2.0, 5.0]])
        rhs = np.array([8.0, 9.0])
        x = linalg.solve(linalg.cholesky(A), rhs)
        assert np.linalg.norm(A @ x - rhs) < 1e-12

    def test_matrix_rhs_gives_inverse(self):
        A = random_spd(5, 11)
        inv = linalg.solve(linalg.cholesky(A), np.eye(5))
        np.testing.assert_allclose(A @ inv, np.eye(5), atol=1e-10)


class TestLogdet:
    def test_identity_is_zero(self):
        assert linalg.logdet(linalg.cholesky(np.eye(6))) == 0.0

    def test_diagonal(self):
        got = linalg.logdet(linalg.cholesky(np.diag([2.0, 8.0])))
        assert got == pytest.approx(np.log(16.0), rel=1e-14)

    def test_against_lu_determinant(self):
        A = random_spd(5, 3)
        sign, ld = np.linalg.slogdet(A)  # LU-based oracle
        assert sign == 1.0
        assert linalg.logdet(linalg.cholesky(A)) == pytest.approx(ld, rel=1e-9)

    def test_consistent_with_eigenvalue_sum(self):
        A = random_spd(6, 4)
        lams = linalg.sym_eigenvalues(A)
        assert linalg.logdet(linalg.cholesky(A)) == pytest.approx(
            np.sum(np.log(lams)), rel=1e-8
        )


class TestSymEigenvalues:
    def test_diagonal_sorted_descending(self):
        np.testing.assert_array_equal(
            linalg.sym_eigenvalues(np.diag([3.0, 1.0, 2.0])), [3.0, 2.0, 1.0]
        )

    def test_rank_one(self):
        lams = linalg.sym_eigenvalues(np.ones((3, 3)))
        np.testing.assert_allclose(lams, [3.0, 0.0, 0.0], atol=1e-14)

    def test_trace_identity(self):
        A = random_spd(6, 9)
        assert np.sum(linalg.sym_eigenvalues(A)) == pytest.approx(
            np.trace(A), rel=1e-8
        )
