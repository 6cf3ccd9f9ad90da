"""Scattering-transform features for high-dimensional point clouds.

The pipeline: build an affinity graph from raw coordinates (fixed or
adaptive bandwidth), turn it into a heat-operator backend (truncated
spectral, or eigen-free Markov), push signals through a dyadic wavelet
bank, and summarize with scattering moments.  A small learning harness
(PCA / k-NN / decision tree / k-means) closes the loop to accuracy
numbers, and a CLI exposes the same steps as reproducible commands.
"""

from .errors import ConfigError, DataError, NumericalError
from .graph import (
    AffinityGraph,
    PointCloud,
    adaptive_affinity,
    degree_vector,
    gaussian_affinity,
    knn_scale,
    pairwise_sq_dist,
)
from .operators import (
    LaplacianMatrix,
    MarkovOperator,
    SpectralHeatOperator,
    build_backend,
    build_laplacian,
    epsilon_rule,
    heat_apply_spectral,
    load_eigenpairs,
    markov_dyadic_apply,
    markov_operator,
    save_eigenpairs,
    smallest_eigs,
    sparsify,
)
from .scattering import (
    FeatureVector,
    ScatteringConfig,
    dirac_signals,
    extract_feature_matrix,
    feature_count,
    lq_moment,
    manifold_embedding,
    scattering_features,
    scattering_paths,
    sqrt_wavelet_apply,
    wavelet_apply,
)
from .datasets import (
    load_mnist_idx,
    load_pointcloud_csv,
    load_signals_csv,
    project_digit,
    random_rotation,
    sample_sphere,
    sphere_spectrum_oracle,
)
from .learn import (
    PcaModel,
    cluster_proportions,
    evaluate,
    kmeans,
    knn_fit_predict,
    pca_fit,
    pca_transform,
    tree_fit,
    tree_predict,
)

__version__ = "0.1.0"
