"""Shared driver for the EM-style clustering algorithms.

EM-ONMF, k-means and spherical k-means all alternate an assignment step
with a centroid step, repair empty clusters the same way and stop once the
assignment repeats.  Only the two steps and the objective differ.
"""

import time

import numpy as np

from .errors import Infeasible
from .linalg import column_norms
from .results import RunTrace


def repair_empty_clusters(partition, k, rng):
    """Make every cluster nonempty by moving single points into empty ones.

    For each empty cluster (in increasing order) a donor is taken from the
    largest cluster with at least two members (lowest index on ties) and
    one of its points, drawn uniformly with ``rng``, is transferred.

    Returns a new array; the input is not modified.
    """
    p = np.array(partition, dtype=np.intp, copy=True)
    if p.size < k:
        raise Infeasible(f"cannot fill {k} clusters with {p.size} points")
    counts = np.bincount(p, minlength=k)
    for i in np.flatnonzero(counts == 0):
        donor = int(np.argmax(np.where(counts >= 2, counts, -1)))
        members = np.flatnonzero(p == donor)
        j = members[rng.integers(members.size)]
        p[j] = i
        counts[donor] -= 1
        counts[i] += 1
    return p


def random_column_centroids(M, k, rng, normalize):
    """Pick ``k`` distinct nonzero columns of ``M`` uniformly at random."""
    norms = column_norms(M)
    candidates = np.flatnonzero(norms > 0)
    if candidates.size < k:
        raise Infeasible(f"only {candidates.size} nonzero columns for k={k}")
    idx = np.sort(rng.choice(candidates, size=k, replace=False))
    C = M[:, idx]
    C = C.toarray() if hasattr(C, "toarray") else np.array(C, dtype=float)
    if normalize:
        C = C / norms[idx]
    return C


def alternate(M, k, centroids, assign, update, rng, max_iter, partition=None):
    """Run assignment/update sweeps until the assignment stops changing.

    ``assign(M, centroids) -> partition`` and
    ``update(M, partition) -> (centroids, objective, flags)``.
    If ``partition`` is given it is used as the starting assignment and the
    first centroids are computed from it.

    Returns ``(partition, centroids, trace)``.
    """
    n = M.shape[1]
    if n < k:
        raise Infeasible(f"n={n} points but k={k} clusters")
    trace = RunTrace(fields=("t", "objective", "moved", "elapsed_ms"))
    start = time.perf_counter()
    prev = None
    if partition is not None:
        prev = repair_empty_clusters(partition, k, rng)
        centroids, obj, flags = update(M, prev)
        trace.flags.extend(flags)
        trace.append(0, obj, 0, 1e3 * (time.perf_counter() - start))

    raw_prev = None
    for t in range(1, max_iter + 1):
        raw = assign(M, centroids)
        trace.iterations = t
        # a repeated raw assignment also counts: the random repair of empty
        # clusters would otherwise keep tied duplicates cycling forever
        if prev is not None and (
            np.array_equal(raw, prev) or (raw_prev is not None and np.array_equal(raw, raw_prev))
        ):
            trace.converged = True
            break
        raw_prev = raw
        p = repair_empty_clusters(raw, k, rng)
        if prev is not None and np.array_equal(p, prev):
            trace.converged = True
            break
        moved = n if prev is None else int(np.count_nonzero(p != prev))
        centroids, obj, flags = update(M, p)
        trace.flags.extend(flags)
        trace.append(t, obj, moved, 1e3 * (time.perf_counter() - start))
        prev = p
    trace.seconds = time.perf_counter() - start
    return prev, centroids, trace
