"""EM-like alternating algorithm for orthogonal NMF.

ONMF with unit-norm columns of ``U`` is a weighted spherical k-means:
points are assigned to the centroid direction with the largest inner
product, and each centroid is the nonnegative dominant left singular
vector of its cluster's submatrix.  Given a partition the optimal
objective is ``||M||_F^2 - sum_i sigma_1(M_i)^2``.

Partitions are integer arrays of length ``n`` with 0-based cluster ids.
Centroid sets are ``m x k`` arrays whose columns are unit and nonnegative.
"""

import warnings

import numpy as np

from ._lloyd import alternate, random_column_centroids, repair_empty_clusters
from .errors import OnmfWarning, ZeroMatrix
from .linalg import (
    as_data_matrix,
    column_norms,
    dominant_singular_triplet,
    frobenius_norm,
    squared_residual,
)
from .results import Factorization

__all__ = [
    "assign_clusters",
    "repair_empty_clusters",
    "update_centroids",
    "optimal_coefficients",
    "onmf_objective",
    "em_onmf",
]


def assign_clusters(M, C):
    """Index of the centroid with the largest inner product, per column.

    Ties go to the lowest index; an all-zero column therefore lands in
    cluster 0.
    """
    scores = np.asarray(M.T @ C)
    return np.argmax(scores, axis=1).astype(np.intp)


def _centroids(M, partition, k):
    m = M.shape[0]
    C = np.zeros((m, k))
    sigma2 = np.zeros(k)
    flags = []
    for i in range(k):
        cols = np.flatnonzero(partition == i)
        if cols.size == 0:
            flags.append(f"cluster {i} empty")
            C[0, i] = 1.0
            continue
        sub = M[:, cols]
        try:
            trip = dominant_singular_triplet(sub)
        except ZeroMatrix:
            flags.append(f"cluster {i} has an all-zero submatrix")
            C[0, i] = 1.0
            continue
        if not trip.converged:
            flags.append(f"cluster {i}: power iteration did not converge")
        u = trip.left if trip.left.sum() >= 0 else -trip.left
        u = np.where(u < 0, 0.0, u)
        C[:, i] = u / np.linalg.norm(u)
        sigma2[i] = trip.sigma**2
    return C, sigma2, flags


def update_centroids(M, partition, k=None):
    """Nonnegative dominant left singular vector of every cluster submatrix.

    A cluster whose columns are all zero gets the first canonical basis
    vector and an :class:`OnmfWarning`.
    """
    partition = np.asarray(partition)
    k = int(partition.max()) + 1 if k is None else k
    C, _, flags = _centroids(M, partition, k)
    for f in flags:
        warnings.warn(f, OnmfWarning, stacklevel=2)
    return C


def optimal_coefficients(M, C, partition):
    """``V[i, j] = m_j . u_i`` for ``j`` in cluster ``i``, zero elsewhere."""
    partition = np.asarray(partition)
    n = partition.size
    scores = np.asarray(M.T @ C)
    V = np.zeros((C.shape[1], n))
    cols = np.arange(n)
    V[partition, cols] = scores[cols, partition]
    return V


def onmf_objective(M, partition, k=None):
    """``||M||_F^2 - sum_i sigma_1(M[:, cluster i])^2``."""
    partition = np.asarray(partition)
    k = int(partition.max()) + 1 if k is None else k
    total = frobenius_norm(M) ** 2
    for i in range(k):
        cols = np.flatnonzero(partition == i)
        if cols.size == 0:
            continue
        try:
            total -= dominant_singular_triplet(M[:, cols]).sigma ** 2
        except ZeroMatrix:
            pass
    return total


def em_onmf(M, k, init=None, seed=None, max_iter=500):
    """Cluster the columns of ``M`` with the EM-like ONMF algorithm.

    Parameters
    ----------
    M : array_like or sparse matrix, shape (m, n), nonnegative
    k : int
        Number of clusters.
    init : ndarray, optional
        Either an ``m x k`` array of initial centroid directions or a length
        ``n`` integer array giving an initial partition.  By default ``k``
        distinct nonzero columns are drawn at random.
    seed : int or numpy Generator, optional
        Drives the random initialization and empty-cluster repair.
    max_iter : int
        Cap on assignment sweeps.

    Returns
    -------
    factorization : Factorization
        ``U`` holds the unit centroid directions, ``V`` the optimal
        coefficients (disjoint row supports).
    partition : ndarray of int, shape (n,)
    trace : RunTrace
        One row per sweep with the ONMF objective, which never increases.

    All-zero columns are set aside during the iterations and placed in
    cluster 0 with zero coefficients.
    """
    M = as_data_matrix(M)
    n = M.shape[1]
    keep = np.flatnonzero(column_norms(M) > 0)
    if 0 < keep.size < n and keep.size >= k:
        # zero columns tie everywhere and would only be shuffled around by
        # the empty-cluster repair; cluster them at the end
        init_red = init
        if init is not None and np.ndim(init) == 1:
            init_red = np.asarray(init)[keep]
        fact, p_red, trace = em_onmf(M[:, keep], k, init=init_red, seed=seed, max_iter=max_iter)
        p = np.zeros(n, dtype=np.intp)
        p[keep] = p_red
        V = np.zeros((k, n))
        V[:, keep] = fact.V
        return Factorization(U=fact.U, V=V, objective=fact.objective), p, trace
    rng = np.random.default_rng(seed)
    norm2 = frobenius_norm(M) ** 2

    def update(M, p):
        C, sigma2, flags = _centroids(M, p, k)
        return C, norm2 - sigma2.sum(), flags

    partition = None
    centroids = None
    if init is None:
        centroids = random_column_centroids(M, k, rng, normalize=True)
    else:
        init = np.asarray(init)
        if init.ndim == 1:
            partition = init.astype(np.intp)
        else:
            centroids = np.array(init, dtype=float)
    p, C, trace = alternate(
        M, k, centroids, assign_clusters, update, rng, max_iter, partition=partition
    )
    for f in trace.flags:
        warnings.warn(f, OnmfWarning, stacklevel=2)
    V = optimal_coefficients(M, C, p)
    fact = Factorization(U=C, V=V, objective=squared_residual(M, C, V))
    return fact, p, trace
