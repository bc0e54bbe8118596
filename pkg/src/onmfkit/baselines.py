"""Reference clustering algorithms: Euclidean and spherical k-means.

Both use the same conventions as :func:`onmfkit.emonmf.em_onmf`: random
initial centroids picked among the (nonzero) data points, lowest-index tie
breaking, the same empty-cluster repair, and termination once the
assignment repeats.
"""

import warnings

import numpy as np
import scipy.sparse as sp

from ._lloyd import alternate, random_column_centroids
from .errors import OnmfWarning
from .linalg import as_data_matrix, column_norms

__all__ = ["kmeans", "spherical_kmeans", "kmeans_distortion", "cosine_objective"]


def _indicator(partition, k):
    n = partition.size
    return sp.csr_matrix((np.ones(n), (partition, np.arange(n))), shape=(k, n))


def _cluster_sums(X, B):
    """``X @ B.T`` as a dense ``m x k`` array."""
    S = (B @ X.T).T
    return S.toarray() if sp.issparse(S) else np.asarray(S)


def kmeans_distortion(M, partition, centroids):
    """``sum_j ||m_j - c_{p(j)}||^2``."""
    sq = column_norms(M) ** 2
    cross = np.asarray(M.T @ centroids)[np.arange(partition.size), partition]
    cn = np.sum(centroids**2, axis=0)[partition]
    return float(np.sum(sq - 2 * cross + cn))


def kmeans(M, k, init=None, seed=None, max_iter=500):
    """Lloyd's algorithm on the columns of ``M``.

    Returns ``(partition, centroids, trace)``, centroids as an ``m x k``
    array; the trace objective is the distortion after each update.
    """
    M = as_data_matrix(M, nonnegative=False)
    rng = np.random.default_rng(seed)
    sq = column_norms(M) ** 2

    def assign(M, C):
        d = sq[:, None] - 2 * np.asarray(M.T @ C) + np.sum(C**2, axis=0)[None, :]
        return np.argmin(d, axis=1).astype(np.intp)

    def update(M, p):
        B = _indicator(p, k)
        counts = np.asarray(B.sum(axis=1)).ravel()
        C = _cluster_sums(M, B) / np.maximum(counts, 1)
        return C, kmeans_distortion(M, p, C), []

    centroids = random_column_centroids(M, k, rng, normalize=False) if init is None else np.asarray(init, float)
    p, C, trace = alternate(M, k, centroids, assign, update, rng, max_iter)
    return p, C, trace


def cosine_objective(M, partition, centroids):
    """``sum_j (m_j / ||m_j||) . u_{p(j)}``; zero columns contribute 0."""
    norms = column_norms(M)
    scores = np.asarray(M.T @ centroids)[np.arange(partition.size), partition]
    return float(np.sum(np.divide(scores, norms, out=np.zeros_like(scores), where=norms > 0)))


def spherical_kmeans(M, k, init=None, seed=None, max_iter=500):
    """Spherical k-means: unit-norm points and unit-norm centroids.

    Zero columns cannot be normalized; they are kept, placed in cluster 0
    and flagged with an :class:`OnmfWarning`.  A cluster whose normalized
    sum vanishes keeps its previous centroid.

    Returns ``(partition, centroids, trace)``; the trace objective is the
    summed cosine similarity, which never decreases.
    """
    M = as_data_matrix(M, nonnegative=False)
    rng = np.random.default_rng(seed)
    norms = column_norms(M)
    zero = norms == 0
    if zero.any():
        warnings.warn(
            f"{int(zero.sum())} zero columns assigned to cluster 0", OnmfWarning, stacklevel=2
        )
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=~zero)
    X = M @ sp.diags(scale) if sp.issparse(M) else M * scale
    X = sp.csc_matrix(X) if sp.issparse(M) else X

    def assign(_, C):
        return np.argmax(np.asarray(X.T @ C), axis=1).astype(np.intp)

    state = {}

    def update(_, p):
        B = _indicator(p, k)
        S = _cluster_sums(X, B)
        s_norm = np.linalg.norm(S, axis=0)
        prev = state.get("C")
        flags = []
        C = np.empty_like(S)
        for i in range(k):
            if s_norm[i] > 0:
                C[:, i] = S[:, i] / s_norm[i]
            else:
                flags.append(f"cluster {i}: zero centroid sum, keeping previous centroid")
                C[:, i] = prev[:, i] if prev is not None else 0.0
        state["C"] = C
        return C, cosine_objective(M, p, C), flags

    if init is None:
        centroids = random_column_centroids(M, k, rng, normalize=True)
    else:
        centroids = np.asarray(init, float)
        centroids = centroids / np.linalg.norm(centroids, axis=0)
    state["C"] = centroids
    p, C, trace = alternate(M, k, centroids, assign, update, rng, max_iter)
    for f in trace.flags:
        warnings.warn(f, OnmfWarning, stacklevel=2)
    return p, C, trace
