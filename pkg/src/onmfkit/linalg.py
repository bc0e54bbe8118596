"""Matrix primitives and the numerical kernels used by every algorithm.

Data matrices are either dense ``numpy.ndarray`` objects or
``scipy.sparse`` matrices stored in compressed-sparse-column form.  Every
kernel below only touches the matrix through products, so both storage
kinds go through the same code path.
"""

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import NegativeValue, OnmfWarning, RankDeficient, ZeroMatrix

__all__ = [
    "SingularTriplet",
    "as_data_matrix",
    "column_norms",
    "frobenius_norm",
    "submatrix",
    "squared_residual",
    "dominant_singular_triplet",
    "nonneg_dominant_left_vector",
    "project_stiefel",
    "top_k_right_singular_vectors",
    "nnls_solve",
    "nnls_kkt_violation",
]


def as_data_matrix(M, nonnegative=True, copy=False):
    """Validate ``M`` and return it as a float64 dense array or CSC matrix.

    Sparse inputs are converted to CSC with sorted, deduplicated indices.
    When ``nonnegative`` is set a :class:`NegativeValue` is raised for any
    stored value below zero.
    """
    if sp.issparse(M):
        A = sp.csc_matrix(M, dtype=np.float64, copy=copy)
        A.sum_duplicates()
        A.sort_indices()
        if np.any(np.diff(A.indptr) < 0):
            raise ValueError("column pointers must be non-decreasing")
        values = A.data
    else:
        A = np.array(M, dtype=np.float64, copy=copy)
        if A.ndim != 2:
            raise ValueError(f"expected a 2-D matrix, got shape {A.shape}")
        values = A
    if not np.all(np.isfinite(values)):
        raise ValueError("matrix contains non-finite values")
    if nonnegative and values.size and values.min() < 0:
        raise NegativeValue(f"matrix has negative entries (min {values.min():g})")
    return A


def frobenius_norm(A):
    if sp.issparse(A):
        return float(np.sqrt(np.dot(A.data, A.data)))
    return float(np.linalg.norm(A))


def column_norms(A):
    """Euclidean norm of every column, as a 1-D array."""
    if sp.issparse(A):
        return np.sqrt(np.asarray(A.multiply(A).sum(axis=0)).ravel())
    return np.linalg.norm(A, axis=0)


def submatrix(A, cols):
    """Columns ``cols`` of ``A``, keeping the storage kind."""
    return A[:, cols]


def squared_residual(M, U, V):
    """``||M - U V||_F^2`` without densifying a sparse ``M``."""
    if sp.issparse(M):
        UtU = U.T @ U
        cross = np.sum(np.asarray(M @ V.T) * U)
        val = frobenius_norm(M) ** 2 - 2.0 * cross + np.sum(UtU * (V @ V.T))
        return float(max(val, 0.0))
    R = M - U @ V
    return float(np.sum(R * R))


@dataclass
class SingularTriplet:
    sigma: float
    left: np.ndarray
    right: np.ndarray
    converged: bool = True
    iterations: int = 0


def dominant_singular_triplet(A, tol=1e-10, max_iter=None):
    """Leading singular triplet of ``A`` by power iteration on ``A^T A``.

    The iteration starts from the normalized all-ones vector, so for a
    nonnegative matrix every iterate stays nonnegative.  It stops once
    ``||A^T u - sigma v|| <= tol * sigma`` (``A v = sigma u`` holds by
    construction of ``u``).  If ``max_iter`` is reached, the iterate with
    the smallest residual is returned with ``converged=False``.

    Parameters
    ----------
    A : ndarray or sparse matrix, shape (m, n)
    tol : float
        Relative residual tolerance.
    max_iter : int, optional
        Defaults to ``10 * max(m, n, 100)``.

    Returns
    -------
    SingularTriplet
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    m, n = A.shape
    if frobenius_norm(A) == 0.0:
        raise ZeroMatrix("dominant singular triplet of a zero matrix")
    if max_iter is None:
        max_iter = 10 * max(m, n, 100)

    v = np.full(n, 1.0 / np.sqrt(n))
    u = A @ v
    sigma = np.linalg.norm(u)
    if sigma == 0.0:
        # start vector lies in the null space; restart on the heaviest column
        v = np.zeros(n)
        v[int(np.argmax(column_norms(A)))] = 1.0
        u = A @ v
        sigma = np.linalg.norm(u)
    u = u / sigma

    best = None
    for it in range(1, max_iter + 1):
        w = A.T @ u
        res = np.linalg.norm(w - sigma * v)
        if best is None or res < best[0] * best[1]:
            best = (res / sigma, sigma, u, v)
        if res <= tol * sigma:
            return SingularTriplet(float(sigma), u, v, True, it)
        v = w / np.linalg.norm(w)
        u = A @ v
        sigma = np.linalg.norm(u)
        u = u / sigma

    _, sigma, u, v = best
    return SingularTriplet(float(sigma), u, v, False, max_iter)


def nonneg_dominant_left_vector(A, tol=1e-10, max_iter=None):
    """Unit nonnegative vector ``u`` maximizing ``||A^T u||`` for ``A >= 0``.

    When the leading singular value is repeated any nonnegative maximizer
    may be returned.
    """
    trip = dominant_singular_triplet(A, tol=tol, max_iter=max_iter)
    if not trip.converged:
        warnings.warn(
            f"power iteration stopped after {trip.iterations} sweeps without "
            "reaching tolerance; using best iterate",
            OnmfWarning,
            stacklevel=2,
        )
    u = trip.left
    if u.sum() < 0:
        u = -u
    if u.min() < -1e-12:
        raise ValueError("matrix has no nonnegative dominant vector (is it nonnegative?)")
    u = np.where(u < 0, 0.0, u)
    return u / np.linalg.norm(u)


def project_stiefel(Vhat):
    """Nearest matrix with orthonormal rows, in Frobenius norm.

    Computed as ``P @ Q.T`` from the thin SVD ``Vhat = P S Q^T`` (the
    unitary polar factor).  Raises :class:`RankDeficient` when the smallest
    singular value is below 1e-12, since the projection is then not unique.
    """
    Vhat = np.asarray(Vhat, dtype=np.float64)
    k, n = Vhat.shape
    if k > n:
        raise ValueError(f"cannot orthonormalize {k} rows in dimension {n}")
    P, s, Qt = np.linalg.svd(Vhat, full_matrices=False)
    if s[-1] < 1e-12:
        raise RankDeficient(f"smallest singular value {s[-1]:.3e} < 1e-12")
    return P @ Qt


def top_k_right_singular_vectors(M, k, tol=1e-11, max_sweeps=5000, oversample=5):
    """Leading ``k`` right singular vectors of ``M`` as the rows of a k-by-n array.

    Subspace iteration on ``M^T M`` with a Rayleigh-Ritz step and QR
    re-orthonormalization every sweep.  The start block is drawn from a
    fixed-seed generator, so results are deterministic.  A vector counts as
    converged when ``||M^T M q - s^2 q|| <= tol * s_1^2``; directions in the
    null space of ``M`` converge trivially.
    """
    m, n = M.shape
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} must lie in [1, min(m, n)={min(m, n)}]")
    if frobenius_norm(M) == 0.0:
        raise ZeroMatrix("singular vectors of a zero matrix")
    p = min(n, m, k + oversample)
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))

    for sweep in range(1, max_sweeps + 1):
        Y = np.asarray(M @ Q)
        _, s, Wt = np.linalg.svd(Y, full_matrices=False)
        Q = Q @ Wt.T
        Z = np.asarray(M.T @ (Y @ Wt.T))
        R = Z[:, :k] - Q[:, :k] * s[:k] ** 2
        if np.all(np.linalg.norm(R, axis=0) <= tol * s[0] ** 2):
            break
        Q, _ = np.linalg.qr(Z)
    else:
        warnings.warn(
            f"subspace iteration hit the cap of {max_sweeps} sweeps; "
            "returning the current Ritz vectors",
            OnmfWarning,
            stacklevel=2,
        )
    return np.ascontiguousarray(Q[:, :k].T)


# -- nonnegative least squares ------------------------------------------------


def _passive_solve(G, B, P):
    """Solve ``G[p, p] x_p = b_p`` column by column, grouping equal passive sets."""
    X = np.zeros_like(B)
    if B.shape[1] == 0:
        return X
    keys, inverse = np.unique(P.T, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    for g, key in enumerate(keys):
        idx = np.flatnonzero(key)
        if idx.size == 0:
            continue
        cols = np.flatnonzero(inverse == g)
        Gp = G[np.ix_(idx, idx)]
        Bp = B[np.ix_(idx, cols)]
        try:
            sol = np.linalg.solve(Gp, Bp)
            if not np.all(np.isfinite(sol)):
                raise np.linalg.LinAlgError
        except np.linalg.LinAlgError:
            sol = np.linalg.lstsq(Gp, Bp, rcond=None)[0]
        X[np.ix_(idx, cols)] = sol
    return X


def _fcnnls(G, B, tol, max_iter):
    """Batched active-set NNLS in normal-equation form.

    Minimizes ``0.5 x^T G x - b^T x`` subject to ``x >= 0`` for every
    column ``b`` of ``B``.  Columns sharing a passive set share one
    factorization (the "fast combinatorial" variant of Lawson-Hanson).
    """
    k, r = B.shape
    X = np.linalg.lstsq(G, B, rcond=None)[0]
    P = X > 0
    X[~P] = 0.0

    W = B - G @ X
    kkt_ok = np.all(np.where(P, np.abs(W) <= tol, W <= tol), axis=0)
    F = np.flatnonzero(~kkt_ok)
    D = X.copy()
    iters = 0
    while F.size and iters < max_iter:
        iters += 1
        K = _passive_solve(G, B[:, F], P[:, F])
        H = np.flatnonzero(np.any(K < 0, axis=0))
        while H.size and iters < max_iter:
            iters += 1
            cols = F[H]
            Kh = K[:, H]
            Dh = D[:, cols]
            neg = P[:, cols] & (Kh < 0)
            with np.errstate(divide="ignore", invalid="ignore"):
                alpha = np.where(neg, Dh / (Dh - Kh), np.inf)
            jmin = np.argmin(alpha, axis=0)
            amin = alpha[jmin, np.arange(len(cols))]
            Dh = Dh - amin * (Dh - Kh)
            Dh[jmin, np.arange(len(cols))] = 0.0
            # blocking variables (ties included) leave the passive set
            Ph = P[:, cols] & ~(neg & (Dh <= 0))
            Ph[jmin, np.arange(len(cols))] = False
            P[:, cols] = Ph
            D[:, cols] = np.where(Ph, Dh, 0.0)
            K[:, H] = _passive_solve(G, B[:, cols], Ph)
            H = np.flatnonzero(np.any(K < 0, axis=0))
        X[:, F] = np.where(K > 0, K, 0.0)
        Wf = B[:, F] - G @ X[:, F]
        Wa = np.where(P[:, F], -np.inf, Wf)
        done = np.all(Wa <= tol, axis=0)
        F = F[~done]
        if F.size:
            Wa = Wa[:, ~done]
            j = np.argmax(Wa, axis=0)
            P[j, F] = True
            D[:, F] = X[:, F]
    if F.size:
        warnings.warn("active-set NNLS hit its iteration cap", OnmfWarning, stacklevel=3)
    return X


def nnls_solve(M, V, tol=None, max_iter=None):
    """Solve ``min_{U >= 0} ||M - U V||_F^2``.

    Each row of ``U`` is an independent NNLS problem sharing the Gram
    matrix ``V V^T``; they are solved together by a batched active-set
    method.  A singular ``V V^T`` is handled (a KKT point is still
    returned).

    Returns
    -------
    U : ndarray, shape (m, k)
    """
    V = np.asarray(V, dtype=np.float64)
    G = V @ V.T
    B = np.asarray(M @ V.T).T  # k x m
    k = G.shape[0]
    if tol is None:
        tol = 1e-12 * max(1.0, float(np.abs(B).max(initial=0.0)), float(np.abs(G).max()))
    if max_iter is None:
        max_iter = 10 * k + 50
    return np.ascontiguousarray(_fcnnls(G, B, tol, max_iter).T)


def nnls_kkt_violation(M, V, U):
    """Largest violation of the KKT conditions of the NNLS problem.

    With gradient ``g = U V V^T - M V^T``: ``|g|`` where ``u > 0``, and
    ``max(-g, 0)`` where ``u == 0``; negative entries of ``U`` count as
    violations of their own size.
    """
    V = np.asarray(V, dtype=np.float64)
    g = U @ (V @ V.T) - np.asarray(M @ V.T)
    viol = np.where(U > 0, np.abs(g), np.maximum(-g, 0.0))
    return float(max(viol.max(initial=0.0), np.maximum(-U, 0.0).max(initial=0.0)))
