"""Evaluation quantities: clustering accuracy and factorization residuals."""

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import squared_residual

__all__ = [
    "confusion_matrix",
    "accuracy",
    "accuracy_from_confusion",
    "orthogonality_residual",
    "negativity_residual",
    "reconstruction_error",
    "row_supports",
]


def confusion_matrix(partition, labels):
    """Square count matrix ``C[i, j] = |cluster i  &  class j|``.

    Cluster ids and class labels may be arbitrary hashable values; both are
    mapped to codes in sorted order.  The smaller side is padded with zero
    rows or columns so that the matrix is square.
    """
    partition = np.asarray(partition)
    labels = np.asarray(labels)
    if partition.shape != labels.shape:
        raise ValueError(f"partition has {partition.size} entries, labels {labels.size}")
    _, pc = np.unique(partition, return_inverse=True)
    _, lc = np.unique(labels, return_inverse=True)
    size = max(pc.max(initial=-1), lc.max(initial=-1)) + 1
    C = np.zeros((size, size), dtype=np.int64)
    np.add.at(C, (pc.ravel(), lc.ravel()), 1)
    return C


def accuracy_from_confusion(C):
    C = np.asarray(C)
    n = C.sum()
    if n == 0:
        return 0.0
    rows, cols = linear_sum_assignment(C, maximize=True)
    return float(C[rows, cols].sum() / n)


def accuracy(partition, labels):
    """Fraction of points correctly clustered under the best one-to-one
    matching of clusters to classes (Hungarian algorithm on the confusion
    matrix).
    """
    return accuracy_from_confusion(confusion_matrix(partition, labels))


def orthogonality_residual(V):
    """``||V V^T - I||_F``."""
    V = np.asarray(V, dtype=float)
    return float(np.linalg.norm(V @ V.T - np.eye(V.shape[0])))


def negativity_residual(V):
    """``||min(V, 0)||_F / ||V||_F``; zero for a zero matrix."""
    V = np.asarray(V, dtype=float)
    total = np.linalg.norm(V)
    if total == 0:
        return 0.0
    return float(np.linalg.norm(np.minimum(V, 0.0)) / total)


def reconstruction_error(M, U, V):
    """``||M - U V||_F`` (not squared)."""
    return float(np.sqrt(squared_residual(M, np.asarray(U, float), np.asarray(V, float))))


def row_supports(V, rel_tol=0.1):
    """Column indices of the significant entries of each row of ``V``.

    Entry ``(i, j)`` counts when ``v_ij > rel_tol * max_j v_ij``; this
    discards the small positive leftovers of an approximately nonnegative
    iterate.  Returns a list of sorted index arrays, one per row.
    """
    V = np.asarray(V, dtype=float)
    top = V.max(axis=1, initial=0.0)
    return [np.flatnonzero((row > rel_tol * t) & (row > 0)) for row, t in zip(V, top)]
