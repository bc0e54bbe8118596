"""Dataset readers/writers and synthetic generators.

Sparse text matrices use the CLUTO layout: a header line ``m n nnz``
followed by one line per matrix row holding ``col value`` pairs with
1-based column indices.  Label files hold one class label per line.
"""

import csv
import itertools
import json
import logging
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import DimensionMismatch, GeometryError, NegativeValue, ParseError
from .linalg import column_norms

log = logging.getLogger(__name__)

__all__ = [
    "LabeledDataset",
    "DatasetSpec",
    "SwimmerParams",
    "read_sparse_text_matrix",
    "write_sparse_text_matrix",
    "read_labels",
    "write_labels",
    "read_dense_csv",
    "load_dataset",
    "drop_zero_columns",
    "generate_swimmer",
    "generate_directional_clusters",
    "inline_clusters_spec",
    "separated_clusters_spec",
    "generate_separable",
    "write_results",
    "write_matrix_csv",
    "read_matrix_csv",
    "METRICS_KEYS",
    "UNLABELED",
]

# integer label of columns that belong to no class (e.g. swimmer background)
UNLABELED = -1


@dataclass
class LabeledDataset:
    matrix: object
    labels: np.ndarray = None
    name: str = ""
    parts: list = None

    def __post_init__(self):
        if self.labels is not None:
            self.labels = np.asarray(self.labels)
            if self.labels.shape != (self.matrix.shape[1],):
                raise DimensionMismatch(
                    f"{self.labels.size} labels for {self.matrix.shape[1]} columns"
                )

    @property
    def labeled(self):
        """Boolean mask of columns carrying a class label."""
        if self.labels is None:
            return np.zeros(self.matrix.shape[1], dtype=bool)
        if self.labels.dtype.kind in "iu":
            return self.labels != UNLABELED
        return np.ones(self.labels.shape, dtype=bool)

    @property
    def n_classes(self):
        if self.labels is None:
            return None
        return len(np.unique(self.labels[self.labeled]))


# -- CLUTO-style sparse text ----------------------------------------------------


def read_sparse_text_matrix(path, labels_path=None, transpose=False):
    """Read a CLUTO-style sparse matrix (and optional label file).

    The header gives ``m n nnz``; line ``i`` after it lists the nonzeros of
    row ``i``.  With ``transpose=True`` the matrix is transposed after
    parsing, for files that store data points as rows (CLUTO corpora are
    document-by-term).  Labels are matched against the columns of the
    returned matrix.

    Returns
    -------
    LabeledDataset
        ``matrix`` is a CSC matrix.
    """
    with open(path) as fh:
        lines = fh.read().splitlines()
    body = [(i + 1, ln) for i, ln in enumerate(lines)]
    while body and not body[0][1].strip():
        body.pop(0)
    if not body:
        raise ParseError("empty file", 1)
    lineno, header = body[0]
    try:
        m, n, nnz = (int(tok) for tok in header.split())
    except ValueError:
        raise ParseError(f"bad header {header!r}, expected 'm n nnz'", lineno) from None
    rows_text = body[1:]
    # trailing blank lines are padding, interior blank lines are empty rows
    while len(rows_text) > m and not rows_text[-1][1].strip():
        rows_text.pop()
    if len(rows_text) != m:
        raise DimensionMismatch(f"header declares {m} rows, file has {len(rows_text)}")

    indptr = [0]
    indices = []
    data = []
    for r, (lineno, ln) in enumerate(rows_text):
        toks = ln.split()
        if len(toks) % 2:
            raise ParseError("odd number of tokens in (index, value) list", lineno)
        for a, b in zip(toks[::2], toks[1::2]):
            try:
                j = int(a)
                v = float(b)
            except ValueError:
                raise ParseError(f"bad pair {a!r} {b!r}", lineno) from None
            if not 1 <= j <= n:
                raise ParseError(f"column index {j} outside 1..{n}", lineno)
            if v < 0:
                raise NegativeValue(f"line {lineno}: negative value {v}")
            indices.append(j - 1)
            data.append(v)
        indptr.append(len(indices))
    if len(data) != nnz:
        raise DimensionMismatch(f"header declares {nnz} nonzeros, file has {len(data)}")
    if nnz == 0:
        log.warning("%s: matrix has no nonzero entries", path)
    A = sp.csr_matrix((np.asarray(data, float), np.asarray(indices, np.int64), indptr), shape=(m, n))
    A = (A.T if transpose else A).tocsc()
    A.sort_indices()
    labels = read_labels(labels_path) if labels_path else None
    return LabeledDataset(A, labels, name=os.path.basename(str(path)))


def write_sparse_text_matrix(path, A):
    """Write ``A`` in the CLUTO layout with full-precision values."""
    A = sp.csr_matrix(A)
    A.sort_indices()
    with open(path, "w") as fh:
        fh.write(f"{A.shape[0]} {A.shape[1]} {A.nnz}\n")
        for i in range(A.shape[0]):
            lo, hi = A.indptr[i], A.indptr[i + 1]
            fh.write(" ".join(f"{j + 1} {v!r}" for j, v in zip(A.indices[lo:hi], A.data[lo:hi].tolist())))
            fh.write("\n")


def read_labels(path):
    """One label per line; integer labels are returned as ints, else strings."""
    with open(path) as fh:
        toks = [ln.strip() for ln in fh if ln.strip()]
    try:
        return np.array([int(t) for t in toks])
    except ValueError:
        return np.array(toks)


def write_labels(path, labels):
    with open(path, "w") as fh:
        for lab in np.asarray(labels).tolist():
            fh.write(f"{lab}\n")


def read_dense_csv(path):
    """Dense matrix from a comma-separated file (columns are data points)."""
    return np.atleast_2d(np.loadtxt(path, delimiter=",", dtype=float))


def drop_zero_columns(ds):
    """Remove all-zero columns (and their labels)."""
    keep = np.flatnonzero(column_norms(ds.matrix) > 0)
    labels = None if ds.labels is None else ds.labels[keep]
    return LabeledDataset(ds.matrix[:, keep], labels, name=ds.name, parts=ds.parts), keep


# -- swimmer ----------------------------------------------------------------------


@dataclass(frozen=True)
class SwimmerParams:
    image_side: int = 32
    limb_length: int = 6


# compass directions as (drow, dcol); limbs start one pixel off the torso
_LEFT_ARM = [(-1, 0), (-1, -1), (0, -1), (1, -1)]
_LEFT_LEG = [(-1, -1), (0, -1), (1, -1), (1, 0)]


def _swimmer_parts(side, L):
    T = 2 * L + 4
    cx = side // 2 - 1
    top = (side - T) // 2
    bottom = top + T - 1
    parts = [[(r, cx) for r in range(top, bottom + 1)]]
    anchors = [
        ((top + 1, cx - 1), _LEFT_ARM),
        ((top + 1, cx + 1), [(dr, -dc) for dr, dc in _LEFT_ARM]),
        ((bottom - 1, cx - 1), _LEFT_LEG),
        ((bottom - 1, cx + 1), [(dr, -dc) for dr, dc in _LEFT_LEG]),
    ]
    for (r0, c0), dirs in anchors:
        for dr, dc in dirs:
            parts.append([(r0 + d * dr, c0 + d * dc) for d in range(1, L + 1)])
    return parts


def generate_swimmer(params=None):
    """Swimmer images: a torso plus four limbs, each in one of four poses.

    Returns
    -------
    M : ndarray, shape (256, image_side**2)
        One binary image per row (pixels flattened row-major), so that the
        rows of an orthogonal ``V`` correspond to parts.
    parts : list of ndarray
        17 disjoint pixel-index sets: the torso first, then the four poses
        of each limb (left arm, right arm, left leg, right leg).
    """
    params = params or SwimmerParams()
    side, L = params.image_side, params.limb_length
    if L < 1:
        raise GeometryError("limb_length must be at least 1")
    parts_rc = _swimmer_parts(side, L)
    seen = set()
    parts = []
    for part in parts_rc:
        for r, c in part:
            if not (0 <= r < side and 0 <= c < side):
                raise GeometryError(
                    f"limb_length={L} does not fit a {side}x{side} frame (pixel {(r, c)})"
                )
            if (r, c) in seen:
                raise GeometryError(f"parts overlap at pixel {(r, c)}")
            seen.add((r, c))
        parts.append(np.array(sorted(r * side + c for r, c in part), dtype=np.intp))

    torso, limbs = parts[0], [parts[1 + 4 * i : 5 + 4 * i] for i in range(4)]
    M = np.zeros((256, side * side))
    for row, poses in enumerate(itertools.product(range(4), repeat=4)):
        M[row, torso] = 1.0
        for limb, pose in zip(limbs, poses):
            M[row, limb[pose]] = 1.0
    return M, parts


# -- directional clusters ---------------------------------------------------------


def generate_directional_clusters(spec, seed=None):
    """Nonnegative points scattered around given directions.

    ``spec`` is a list of cluster descriptions, each a dict with keys
    ``direction`` (angle in degrees for 2-D data, or a nonnegative vector),
    ``norm`` (``(lo, hi)`` range of point norms), ``spread`` (angular
    standard deviation in degrees, 2-D only; for vectors a relative
    Gaussian perturbation) and ``count``.  Points are clipped to the
    nonnegative orthant.

    Returns
    -------
    LabeledDataset
        Columns are points, labels are cluster indices.
    """
    rng = np.random.default_rng(seed)
    cols = []
    labels = []
    for label, c in enumerate(spec):
        count = int(c["count"])
        lo, hi = c.get("norm", (1.0, 1.0))
        norms = rng.uniform(lo, hi, size=count)
        d = c["direction"]
        if np.isscalar(d):
            ang = np.deg2rad(d + c.get("spread", 0.0) * rng.standard_normal(count))
            ang = np.clip(ang, 0.0, np.pi / 2)
            pts = np.vstack([np.cos(ang), np.sin(ang)])
        else:
            d = np.asarray(d, float)
            if np.any(d < 0) or not np.any(d > 0):
                raise ValueError("directions must be nonnegative and nonzero")
            d = d / np.linalg.norm(d)
            pts = d[:, None] + c.get("spread", 0.0) * rng.standard_normal((d.size, count))
            pts = np.maximum(pts, 0.0)
            pts /= np.linalg.norm(pts, axis=0)
        cols.append(pts * norms)
        labels.extend([label] * count)
    return LabeledDataset(np.hstack(cols), np.array(labels))


def separated_clusters_spec():
    """Two tight, well-separated angular clusters (30 and 60 points)."""
    return [
        {"direction": 15.0, "norm": (0.5, 2.0), "spread": 3.0, "count": 30},
        {"direction": 75.0, "norm": (0.5, 2.0), "spread": 3.0, "count": 60},
    ]


def inline_clusters_spec():
    """Two clusters along nearby directions with very different norms.

    The large-norm cluster is angularly tight, the small-norm one is close
    to the origin and angularly wide.
    """
    return [
        {"direction": 35.0, "norm": (3.0, 4.0), "spread": 4.0, "count": 40},
        {"direction": 55.0, "norm": (0.2, 1.0), "spread": 15.0, "count": 40},
    ]


def generate_separable(m=40, n=40, k=4, scale=100.0, seed=0):
    """Exactly orthogonally factorizable data ``M = A B``.

    ``A`` is a dense ``m x k`` matrix with entries uniform on [0, 1) and
    the rows of ``B`` have disjoint supports: row ``i`` is nonzero (uniform
    on [0.5, 1.5)) exactly on the ``i``-th contiguous group of columns.
    Each column group is thus a rank-one block and the rows of ``B`` are
    orthogonal, while the leading singular vectors of ``M`` mix the groups.
    """
    if not 1 <= k <= min(m, n):
        raise ValueError(f"k={k} must lie in [1, min(m, n)]")
    rng = np.random.default_rng(seed)
    A = rng.uniform(0.0, 1.0, size=(m, k))
    B = np.zeros((k, n))
    labels = np.empty(n, dtype=int)
    for i, cols in enumerate(np.array_split(np.arange(n), k)):
        B[i, cols] = rng.uniform(0.5, 1.5, size=cols.size)
        labels[cols] = i
    return LabeledDataset(scale * (A @ B), labels, name="separable")


# -- result files -----------------------------------------------------------------

METRICS_KEYS = (
    "algorithm",
    "dataset",
    "k",
    "seed",
    "accuracy",
    "iterations",
    "seconds",
    "final_error",
    "final_orth_residual",
    "final_neg_residual",
)


def write_matrix_csv(path, A):
    """Dense CSV with round-trip (``repr``) float formatting."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        for row in A.tolist():
            w.writerow([repr(v) for v in row])


def read_matrix_csv(path):
    with open(path, newline="") as fh:
        return np.array([[float(v) for v in row] for row in csv.reader(fh) if row])


def write_results(out_dir, metrics, partition=None, trace=None, U=None, V=None):
    """Write one run's outputs into ``out_dir``.

    Files: ``metrics.json`` (keys :data:`METRICS_KEYS`, in that order),
    ``assignments.csv`` (``column,cluster``), ``trace.csv`` (one row per
    iteration, header always present), ``U.csv`` and ``V.csv``.
    """
    os.makedirs(out_dir, exist_ok=True)
    missing = [k for k in METRICS_KEYS if k not in metrics]
    if missing:
        raise ValueError(f"metrics missing keys {missing}")
    with open(os.path.join(out_dir, "metrics.json"), "w") as fh:
        json.dump({k: metrics[k] for k in METRICS_KEYS}, fh, indent=2)
        fh.write("\n")
    if partition is not None:
        with open(os.path.join(out_dir, "assignments.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["column", "cluster"])
            w.writerows(enumerate(np.asarray(partition).tolist()))
    if trace is not None:
        with open(os.path.join(out_dir, "trace.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(trace.fields)
            for row in trace.rows:
                w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    if U is not None:
        write_matrix_csv(os.path.join(out_dir, "U.csv"), U)
    if V is not None:
        write_matrix_csv(os.path.join(out_dir, "V.csv"), V)


# -- dataset specs ----------------------------------------------------------------


@dataclass
class DatasetSpec:
    """Where a dataset comes from: a file or a named generator.

    Exactly one of ``path`` and ``generator`` must be set.  Files ending in
    ``.csv`` are read as dense matrices; anything else as CLUTO sparse
    text.
    """

    path: str = None
    labels: str = None
    generator: str = None
    params: dict = field(default_factory=dict)
    seed: int = 0
    transpose: bool = False
    drop_zero_columns: bool = False
    expected_k: int = None

    def __post_init__(self):
        if (self.path is None) == (self.generator is None):
            raise ValueError("DatasetSpec needs exactly one of path or generator")

    @property
    def name(self):
        return self.generator or os.path.basename(self.path)


def load_dataset(spec):
    """Materialize a :class:`DatasetSpec` into a :class:`LabeledDataset`."""
    if spec.generator == "swimmer":
        M, parts = generate_swimmer(SwimmerParams(**spec.params))
        labels = np.full(M.shape[1], UNLABELED)
        for i, p in enumerate(parts):
            labels[p] = i
        ds = LabeledDataset(M, labels, name="swimmer", parts=parts)
    elif spec.generator in ("directional", "inline", "separated"):
        preset = spec.params.get("preset", "inline" if spec.generator == "inline" else "separated")
        cl = inline_clusters_spec() if preset == "inline" else separated_clusters_spec()
        ds = generate_directional_clusters(cl, seed=spec.seed)
        ds.name = spec.generator
    elif spec.generator == "separable":
        ds = generate_separable(seed=spec.seed, **spec.params)
    elif spec.generator is not None:
        raise ValueError(f"unknown generator {spec.generator!r}")
    elif str(spec.path).endswith(".csv"):
        M = read_dense_csv(spec.path)
        M = M.T if spec.transpose else M
        labels = read_labels(spec.labels) if spec.labels else None
        ds = LabeledDataset(M, labels, name=os.path.basename(spec.path))
    else:
        ds = read_sparse_text_matrix(spec.path, spec.labels, transpose=spec.transpose)
    if spec.drop_zero_columns:
        ds, _ = drop_zero_columns(ds)
    return ds
