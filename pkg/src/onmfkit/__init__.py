"""Orthogonal nonnegative matrix factorization for clustering.

Two ONMF algorithms, an EM-like one (:func:`em_onmf`) and an augmented
Lagrangian one (:func:`onp_mf`), together with k-means baselines, the
clustering accuracy metric, dataset readers and synthetic generators.
"""

from .baselines import cosine_objective, kmeans, kmeans_distortion, spherical_kmeans
from .data import (
    DatasetSpec,
    LabeledDataset,
    SwimmerParams,
    generate_directional_clusters,
    generate_separable,
    generate_swimmer,
    inline_clusters_spec,
    load_dataset,
    read_labels,
    read_sparse_text_matrix,
    separated_clusters_spec,
    write_results,
    write_sparse_text_matrix,
)
from .emonmf import (
    assign_clusters,
    em_onmf,
    onmf_objective,
    optimal_coefficients,
    repair_empty_clusters,
    update_centroids,
)
from .errors import (
    ConfigError,
    DimensionMismatch,
    GeometryError,
    Infeasible,
    NegativeValue,
    NoConvergence,
    OnmfError,
    OnmfWarning,
    ParseError,
    RankDeficient,
    ZeroMatrix,
)
from .linalg import (
    dominant_singular_triplet,
    nnls_solve,
    nonneg_dominant_left_vector,
    project_stiefel,
    squared_residual,
    top_k_right_singular_vectors,
)
from .metrics import (
    accuracy,
    confusion_matrix,
    negativity_residual,
    orthogonality_residual,
    reconstruction_error,
)
from .onpmf import OnpMfConfig, extract_clusters, onp_mf
from .results import Factorization, RunTrace

__version__ = "0.1.0"
