import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays
from scipy.optimize import nnls as scipy_nnls

from onmfkit.errors import NegativeValue, RankDeficient, ZeroMatrix
from onmfkit.linalg import (
    as_data_matrix,
    dominant_singular_triplet,
    nnls_kkt_violation,
    nnls_solve,
    nonneg_dominant_left_vector,
    project_stiefel,
    squared_residual,
    top_k_right_singular_vectors,
)


def random_orthonormal_rows(rng, k, n):
    Q, _ = np.linalg.qr(rng.standard_normal((n, k)))
    return Q.T


def oracle_sigma1(A):
    """Largest singular value from a dense eigendecomposition of A^T A."""
    return np.sqrt(max(np.linalg.eigvalsh(A.T @ A)[-1], 0.0))


# entries either zero or large enough that their squares do not underflow
entries = st.one_of(st.just(0.0), st.floats(1e-100, 10))
nonneg_matrices = st.tuples(st.integers(1, 7), st.integers(1, 7)).flatmap(
    lambda s: arrays(np.float64, s, elements=entries)
)


class TestDataMatrix:
    def test_rejects_negative(self):
        with pytest.raises(NegativeValue):
            as_data_matrix(np.array([[1.0, -1.0]]))

    def test_sparse_canonical_form(self):
        A = sp.coo_matrix(([1.0, 2.0, 3.0], ([1, 0, 1], [0, 0, 0])), shape=(2, 2))
        C = as_data_matrix(A)
        assert sp.isspmatrix_csc(C)
        assert np.all(np.diff(C.indptr) >= 0)
        for j in range(C.shape[1]):
            rows = C.indices[C.indptr[j] : C.indptr[j + 1]]
            assert np.all(np.diff(rows) > 0)
        np.testing.assert_array_equal(C.toarray(), [[2, 0], [4, 0]])

    def test_sparse_and_dense_residual_agree(self):
        rng = np.random.default_rng(3)
        M = rng.random((7, 9)) * (rng.random((7, 9)) < 0.4)
        U, V = rng.random((7, 3)), rng.standard_normal((3, 9))
        d = squared_residual(M, U, V)
        s = squared_residual(sp.csc_matrix(M), U, V)
        assert abs(d - s) <= 1e-12 * max(1.0, d)


class TestDominantTriplet:
    def test_unit_rank_one(self):
        t = dominant_singular_triplet(np.array([[1.0, 0.0], [0.0, 0.0]]))
        assert t.sigma == pytest.approx(1.0)
        np.testing.assert_allclose(t.left, [1, 0], atol=1e-12)
        np.testing.assert_allclose(t.right, [1, 0], atol=1e-12)

    def test_single_column(self):
        t = dominant_singular_triplet(np.array([[3.0, 0.0], [4.0, 0.0]]))
        assert t.sigma == pytest.approx(5.0, rel=1e-12)
        np.testing.assert_allclose(t.left, [0.6, 0.8], atol=1e-12)
        np.testing.assert_allclose(t.right, [1.0, 0.0], atol=1e-12)

    def test_random_against_oracle(self):
        rng = np.random.default_rng(0)
        A = rng.random((6, 4))
        t = dominant_singular_triplet(A)
        assert t.converged
        assert t.sigma == pytest.approx(oracle_sigma1(A), rel=1e-8)
        assert np.linalg.norm(A.T @ t.left - t.sigma * t.right) <= 1e-10 * t.sigma
        assert np.linalg.norm(A @ t.right - t.sigma * t.left) <= 1e-10 * t.sigma

    def test_zero_matrix(self):
        with pytest.raises(ZeroMatrix):
            dominant_singular_triplet(np.zeros((3, 2)))

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(5)
        A = rng.random((8, 6)) * (rng.random((8, 6)) < 0.5)
        d = dominant_singular_triplet(A)
        s = dominant_singular_triplet(sp.csc_matrix(A))
        assert abs(d.sigma - s.sigma) <= 1e-12 * d.sigma
        np.testing.assert_allclose(d.left, s.left, atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(nonneg_matrices)
    def test_unit_vectors(self, A):
        if not np.any(A):
            return
        t = dominant_singular_triplet(A)
        assert t.sigma >= 0
        assert abs(np.linalg.norm(t.left) - 1) <= 1e-12
        assert abs(np.linalg.norm(t.right) - 1) <= 1e-12


class TestNonnegLeftVector:
    def test_identity(self):
        u = nonneg_dominant_left_vector(np.eye(2))
        assert np.all(u >= 0)
        assert np.linalg.norm(u) == pytest.approx(1.0)
        assert np.linalg.norm(u @ np.eye(2)) == pytest.approx(1.0)

    def test_single_column(self):
        np.testing.assert_array_equal(nonneg_dominant_left_vector(np.array([[2.0], [0.0]])), [1.0, 0.0])

    def test_random_against_oracle(self):
        A = np.random.default_rng(1).random((5, 7))
        u = nonneg_dominant_left_vector(A)
        assert np.all(u >= 0)
        assert np.linalg.norm(A.T @ u) == pytest.approx(oracle_sigma1(A), rel=1e-8)

    @settings(max_examples=80, deadline=None)
    @given(nonneg_matrices)
    def test_nonnegative_and_dominant(self, A):
        if np.linalg.norm(A) < 1e-6:
            return
        # a doubly degenerate top singular value may stall power iteration
        s = np.linalg.svd(A, compute_uv=False)
        if s.size > 1 and s[1] > (1 - 1e-3) * s[0]:
            return
        u = nonneg_dominant_left_vector(A)
        assert np.all(u >= 0)
        assert np.linalg.norm(u) == pytest.approx(1.0, abs=1e-12)
        assert np.linalg.norm(A.T @ u) == pytest.approx(s[0], rel=1e-8)


class TestProjectStiefel:
    def test_idempotent_on_orthonormal(self):
        X = random_orthonormal_rows(np.random.default_rng(2), 3, 8)
        np.testing.assert_allclose(project_stiefel(X), X, atol=1e-12)

    def test_scaled_row(self):
        np.testing.assert_allclose(project_stiefel(np.array([[2.0, 0.0]])), [[1.0, 0.0]])

    def test_beats_random_candidates(self):
        rng = np.random.default_rng(4)
        Vhat = rng.standard_normal((3, 8))
        X = project_stiefel(Vhat)
        assert np.linalg.norm(X @ X.T - np.eye(3)) <= 1e-10
        d = np.linalg.norm(Vhat - X)
        for _ in range(1000):
            Y = random_orthonormal_rows(rng, 3, 8)
            assert d <= np.linalg.norm(Vhat - Y)

    def test_rank_deficient(self):
        with pytest.raises(RankDeficient):
            project_stiefel(np.array([[1.0, 0.0, 0.0], [2.0, 0.0, 0.0]]))

    def test_too_many_rows(self):
        with pytest.raises(ValueError):
            project_stiefel(np.eye(3)[:, :2])

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 4), st.integers(0, 3), st.integers(0, 2**31))
    def test_orthonormal_and_idempotent(self, k, extra, seed):
        Vhat = np.random.default_rng(seed).standard_normal((k, k + extra))
        X = project_stiefel(Vhat)
        assert np.linalg.norm(X @ X.T - np.eye(k)) <= 1e-10
        np.testing.assert_allclose(project_stiefel(X), X, atol=1e-10)


class TestTopK:
    def test_diagonal(self):
        R = top_k_right_singular_vectors(np.diag([3.0, 2.0, 1.0]), 2)
        # principal angles between row spaces via singular values of R E^T
        s = np.linalg.svd(R @ np.eye(3)[:2].T, compute_uv=False)
        assert np.all(s >= 1 - 1e-12)

    def test_random_against_svd(self):
        M = np.random.default_rng(6).random((10, 12))
        R = top_k_right_singular_vectors(M, 3)
        _, _, Wt = np.linalg.svd(M)
        s = np.linalg.svd(R @ Wt[:3].T, compute_uv=False)
        angles = np.arccos(np.clip(s, -1, 1))
        assert angles.max() <= 1e-6
        # each row individually matches its singular direction
        np.testing.assert_allclose(np.abs(np.sum(R * Wt[:3], axis=1)), 1.0, atol=1e-8)

    def test_full_rank_reconstruction(self):
        M = np.random.default_rng(7).random((5, 8))
        R = top_k_right_singular_vectors(M, 5)
        np.testing.assert_allclose(R @ R.T, np.eye(5), atol=1e-10)
        assert np.linalg.norm(M - M @ R.T @ R) <= 1e-8


class TestNNLS:
    def test_identity_design(self):
        M = np.random.default_rng(8).random((4, 3))
        np.testing.assert_allclose(nnls_solve(M, np.eye(3)), M, atol=1e-14)

    def test_one_dimensional(self):
        np.testing.assert_allclose(nnls_solve(np.array([[1.0, 2.0]]), np.array([[1.0, 1.0]])), [[1.5]])

    def test_against_projected_gradient(self):
        rng = np.random.default_rng(9)
        M = rng.random((6, 5))
        V = random_orthonormal_rows(rng, 2, 5)
        U = nnls_solve(M, V)
        # projected gradient oracle on f(U) = ||M - U V||^2, Lipschitz 2 ||V V^T||
        W = np.zeros((6, 2))
        step = 0.5 / np.linalg.norm(V @ V.T, 2)
        for _ in range(5000):
            W = np.maximum(W - step * 2 * (W @ V - M) @ V.T, 0.0)
        assert abs(squared_residual(M, U, V) - squared_residual(M, W, V)) <= 1e-8

    def test_matches_scipy_rowwise(self):
        rng = np.random.default_rng(10)
        M = rng.random((12, 9))
        V = rng.standard_normal((4, 9))
        U = nnls_solve(M, V)
        for r in range(12):
            x, _ = scipy_nnls(V.T, M[r])
            np.testing.assert_allclose(U[r], x, atol=1e-9)

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(11)
        M = rng.random((10, 8)) * (rng.random((10, 8)) < 0.4)
        V = rng.standard_normal((3, 8))
        np.testing.assert_allclose(nnls_solve(M, V), nnls_solve(sp.csc_matrix(M), V), atol=1e-12)

    @settings(max_examples=60, deadline=None)
    @given(st.integers(1, 8), st.integers(1, 5), st.integers(1, 10), st.integers(0, 2**31))
    def test_kkt(self, m, k, n, seed):
        rng = np.random.default_rng(seed)
        M = rng.random((m, n))
        V = rng.standard_normal((k, n))
        U = nnls_solve(M, V)
        assert np.all(U >= 0)
        assert nnls_kkt_violation(M, V, U) <= 1e-8 * max(1.0, np.abs(M).max() * np.abs(V).max() ** 2 * n)
