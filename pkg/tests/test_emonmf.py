import itertools
import warnings

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from onmfkit.emonmf import (
    assign_clusters,
    em_onmf,
    onmf_objective,
    optimal_coefficients,
    repair_empty_clusters,
    update_centroids,
)
from onmfkit.errors import Infeasible, OnmfWarning
from onmfkit.linalg import squared_residual


def dense_objective(M, p, k):
    """Oracle: ||M||^2 - sum of squared top singular values from dense SVDs."""
    total = np.sum(M**2)
    for i in range(k):
        cols = p == i
        if cols.any():
            total -= np.linalg.svd(M[:, cols], compute_uv=False)[0] ** 2
    return total


def bipartitions(n):
    """All partitions of n points into two nonempty clusters (point 0 in cluster 0)."""
    for bits in itertools.product((0, 1), repeat=n - 1):
        p = np.array((0,) + bits)
        if p.any():
            yield p


def single_move_improvement(M, p, k):
    """Largest objective decrease achievable by moving one point."""
    base = onmf_objective(M, p, k)
    best = 0.0
    for j in range(p.size):
        for c in range(k):
            if c == p[j]:
                continue
            q = p.copy()
            q[j] = c
            if np.bincount(q, minlength=k).min() == 0:
                continue
            best = max(best, base - onmf_objective(M, q, k))
    return best


class TestAssign:
    def test_exact_match(self):
        C = np.eye(2)
        np.testing.assert_array_equal(assign_clusters(np.array([[0.0], [2.0]]), C), [1])

    def test_tie_goes_to_lowest(self):
        C = np.eye(2)
        np.testing.assert_array_equal(assign_clusters(np.array([[1.0, 0.0], [1.0, 0.0]]), C), [0, 0])

    @settings(max_examples=50, deadline=None)
    @given(st.integers(0, 2**31), st.floats(1e-3, 1e3))
    def test_positive_scaling(self, seed, alpha):
        rng = np.random.default_rng(seed)
        M = rng.random((5, 8))
        C = rng.random((5, 3))
        C /= np.linalg.norm(C, axis=0)
        p = assign_clusters(M, C)
        j = rng.integers(8)
        M2 = M.copy()
        M2[:, j] *= alpha
        assert assign_clusters(M2, C)[j] == p[j]


class TestRepair:
    def test_identity_when_full(self):
        p = np.array([0, 1, 2, 1])
        np.testing.assert_array_equal(repair_empty_clusters(p, 3, np.random.default_rng(0)), p)

    def test_forced_move(self):
        q = repair_empty_clusters(np.zeros(5, dtype=int), 2, np.random.default_rng(0))
        assert np.count_nonzero(q == 1) == 1

    def test_three_points_bijection(self):
        for p in itertools.product(range(3), repeat=3):
            p = np.array(p)
            if len(set(p.tolist())) != 2:
                continue
            q = repair_empty_clusters(p, 3, np.random.default_rng(1))
            assert sorted(q.tolist()) == [0, 1, 2]

    def test_reproducible(self):
        p = np.zeros(10, dtype=int)
        a = repair_empty_clusters(p, 4, np.random.default_rng(7))
        b = repair_empty_clusters(p, 4, np.random.default_rng(7))
        np.testing.assert_array_equal(a, b)

    def test_infeasible(self):
        with pytest.raises(Infeasible):
            repair_empty_clusters(np.zeros(2, dtype=int), 3, np.random.default_rng(0))


class TestCentroids:
    def test_identical_columns(self):
        c = np.array([1.0, 2.0, 2.0])
        U = update_centroids(np.column_stack([c, c, c]), np.zeros(3, dtype=int))
        np.testing.assert_allclose(U[:, 0], c / 3.0, atol=1e-12)

    def test_single_point(self):
        M = np.array([[3.0, 0.0], [4.0, 1.0]])
        U = update_centroids(M, np.array([0, 1]))
        np.testing.assert_allclose(U[:, 0], [0.6, 0.8], atol=1e-12)

    def test_against_oracle(self):
        rng = np.random.default_rng(2)
        M = rng.random((4, 6))
        p = np.array([0, 1, 0, 1, 1, 0])
        U = update_centroids(M, p)
        for i in range(2):
            Mi = M[:, p == i]
            s1 = np.linalg.svd(Mi, compute_uv=False)[0]
            assert np.linalg.norm(Mi.T @ U[:, i]) ** 2 == pytest.approx(s1**2, rel=1e-8)
            assert np.all(U[:, i] >= 0)

    def test_zero_cluster_flagged(self):
        M = np.array([[1.0, 0.0], [1.0, 0.0]])
        with pytest.warns(OnmfWarning):
            U = update_centroids(M, np.array([0, 1]))
        np.testing.assert_array_equal(U[:, 1], [1.0, 0.0])


class TestCoefficients:
    def test_dot_product(self):
        V = optimal_coefficients(np.array([[3.0], [4.0]]), np.array([[0.6], [0.8]]), np.array([0]))
        assert V[0, 0] == pytest.approx(5.0)

    def test_other_rows_zero(self):
        V = optimal_coefficients(np.array([[3.0], [4.0]]), np.eye(2), np.array([1]))
        assert V[0, 0] == 0.0

    def test_orthogonal_point(self):
        V = optimal_coefficients(np.array([[0.0], [1.0]]), np.array([[1.0], [0.0]]), np.array([0]))
        assert V[0, 0] == 0.0


class TestObjective:
    def test_singletons(self):
        M = np.random.default_rng(3).random((4, 5))
        assert onmf_objective(M, np.arange(5)) == pytest.approx(0.0, abs=1e-12)

    def test_rank_one(self):
        M = np.outer([1.0, 2.0, 3.0], [1.0, 0.5, 2.0, 4.0])
        assert onmf_objective(M, np.zeros(4, dtype=int)) == pytest.approx(0.0, abs=1e-10)

    def test_exhaustive_minimum_matches_factorization(self):
        M = np.random.default_rng(4).random((4, 8))
        best = min(bipartitions(8), key=lambda p: dense_objective(M, p, 2))
        U = update_centroids(M, best)
        V = optimal_coefficients(M, U, best)
        assert abs(squared_residual(M, U, V) - dense_objective(M, best, 2)) <= 1e-8
        assert abs(onmf_objective(M, best) - dense_objective(M, best, 2)) <= 1e-8


class TestEmOnmf:
    def test_separable_groups(self):
        rng = np.random.default_rng(5)
        blocks = [np.outer(rng.random(3) + 0.1, rng.random(4) + 0.1) for _ in range(3)]
        M = np.zeros((9, 12))
        for i, B in enumerate(blocks):
            M[3 * i : 3 * i + 3, 4 * i : 4 * i + 4] = B
        truth = np.repeat(np.arange(3), 4)
        fact, p, _ = em_onmf(M, 3, init=truth)
        np.testing.assert_array_equal(p, truth)
        assert fact.objective == pytest.approx(0.0, abs=1e-10)

    def test_k_one(self):
        M = np.random.default_rng(6).random((5, 7))
        fact, p, _ = em_onmf(M, 1, seed=0)
        s1 = np.linalg.svd(M, compute_uv=False)[0]
        assert np.all(p == 0)
        assert fact.objective == pytest.approx(np.sum(M**2) - s1**2, rel=1e-9)

    def test_best_start_reaches_exhaustive_optimum(self):
        M = np.random.default_rng(7).random((4, 8))
        optimum = min(dense_objective(M, p, 2) for p in bipartitions(8))
        reached = min(em_onmf(M, 2, init=p)[0].objective for p in bipartitions(8))
        assert reached == pytest.approx(optimum, abs=1e-8)

    def test_infeasible(self):
        with pytest.raises(Infeasible):
            em_onmf(np.ones((3, 2)), 3, seed=0)

    def test_sparse_matches_dense(self):
        rng = np.random.default_rng(8)
        M = rng.random((10, 20)) * (rng.random((10, 20)) < 0.5)
        fd, pd, _ = em_onmf(M, 3, seed=1)
        fs, ps, _ = em_onmf(sp.csc_matrix(M), 3, seed=1)
        np.testing.assert_array_equal(pd, ps)
        assert abs(fd.objective - fs.objective) <= 1e-12 * max(1.0, fd.objective)

    def test_zero_columns_go_to_cluster_zero(self):
        rng = np.random.default_rng(9)
        M = rng.random((4, 8))
        M[:, [2, 5]] = 0.0
        fact, p, _ = em_onmf(M, 2, seed=0)
        assert p[2] == 0 and p[5] == 0
        assert np.all(fact.V[:, [2, 5]] == 0)

    def test_reproducible(self):
        M = np.random.default_rng(10).random((6, 15))
        a = em_onmf(M, 3, seed=4)
        b = em_onmf(M, 3, seed=4)
        np.testing.assert_array_equal(a[1], b[1])
        np.testing.assert_array_equal(a[2].column("objective"), b[2].column("objective"))


class TestEmOnmfProperties:
    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(2, 4))
    def test_monotone_objective(self, seed, k):
        M = np.random.default_rng(seed).random((6, 14))
        _, _, trace = em_onmf(M, k, seed=seed)
        obj = trace.column("objective")
        assert np.all(np.diff(obj) <= 1e-10)

    @settings(max_examples=40, deadline=None)
    @given(st.integers(0, 2**31), st.integers(1, 4))
    def test_consistency_and_orthogonality(self, seed, k):
        M = np.random.default_rng(seed).random((5, 12))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", OnmfWarning)
            fact, p, _ = em_onmf(M, k, seed=seed)
        assert abs(fact.objective - onmf_objective(M, p, k)) <= 1e-8
        G = fact.V @ fact.V.T
        assert np.all(G[~np.eye(k, dtype=bool)] == 0)
        norms = np.linalg.norm(fact.V, axis=1)
        Vn = fact.V[norms > 0] / norms[norms > 0, None]
        assert np.linalg.norm(Vn @ Vn.T - np.eye(Vn.shape[0])) <= 1e-10
        assert np.all(fact.U >= 0)
        np.testing.assert_allclose(np.linalg.norm(fact.U, axis=0), 1.0, atol=1e-10)

    def test_local_optimality_at_convergence(self):
        # every converged partition, from every starting bipartition, admits
        # no improving single-point move
        worst = 0.0
        for seed in range(20):
            M = np.random.default_rng(seed).random((3, 6))
            for start in bipartitions(6):
                _, p, _ = em_onmf(M, 2, init=start)
                worst = max(worst, single_move_improvement(M, p, 2))
        assert worst <= 1e-8, f"a single move improves a fixed point by {worst:.3g}"
