"""Affinity graphs built from raw point clouds.

A point cloud is an N x n coordinate matrix together with a declared
intrinsic dimension.  From it we build dense symmetric affinity matrices,
either with a fixed-bandwidth Gaussian kernel or with an adaptive kernel
whose bandwidth at each point is the distance to its k-th nearest
neighbor.  Degrees are always the plain row sums of the affinity matrix.

Everything here is brute force O(N^2); the library targets desk-scale
clouds (N up to a few thousand) where dense matrices are both simpler and
faster than spatial indices.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

__all__ = [
    "PointCloud",
    "AffinityGraph",
    "pairwise_sq_dist",
    "knn_scale",
    "gaussian_affinity",
    "adaptive_affinity",
    "degree_vector",
]


@dataclass(frozen=True)
class PointCloud:
    """N points in ambient R^n with a declared intrinsic dimension.

    The intrinsic dimension is never inferred from the coordinates; it is
    supplied by the caller (CLI flag or constructor argument) and feeds the
    kernel normalization and the bandwidth rule.
    """

    coords: np.ndarray
    intrinsic_dim: int

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=float)
        if coords.ndim != 2:
            raise DataError(f"coords must be a 2-D matrix, got shape {coords.shape}")
        if coords.shape[0] < 1 or coords.shape[1] < 1:
            raise DataError(f"need at least one point and one coordinate, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise DataError("point cloud contains non-finite coordinates")
        d = int(self.intrinsic_dim)
        if not 1 <= d <= coords.shape[1]:
            raise ConfigError(
                f"intrinsic dimension must satisfy 1 <= d <= ambient dimension "
                f"({coords.shape[1]}), got {d}"
            )
        object.__setattr__(self, "coords", coords)
        object.__setattr__(self, "intrinsic_dim", d)

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def ambient_dim(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class AffinityGraph:
    """Symmetric nonnegative affinity matrix with its degree vector.

    ``kernel`` records how the weights were produced ("gaussian" or
    "adaptive"); ``bandwidth`` holds the Gaussian epsilon and ``n_neighbors``
    the adaptive k, whichever applies.
    """

    weights: np.ndarray
    degrees: np.ndarray
    kernel: str
    bandwidth: float | None = None
    n_neighbors: int | None = None

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]


def pairwise_sq_dist(cloud: PointCloud) -> np.ndarray:
    """All squared Euclidean distances ||x_i - x_j||^2 as an N x N matrix.

    The result is exactly symmetric with an exactly zero diagonal; tiny
    negative values produced by floating-point cancellation are floored
    at zero.
    """
    x = cloud.coords
    sq_norms = np.einsum("ij,ij->i", x, x)
    d2 = sq_norms[:, None] + sq_norms[None, :] - 2.0 * (x @ x.T)
    d2 = 0.5 * (d2 + d2.T)
    np.maximum(d2, 0.0, out=d2)
    np.fill_diagonal(d2, 0.0)
    return d2


def knn_scale(cloud: PointCloud, k: int) -> np.ndarray:
    """Distance from each point to its k-th nearest *other* point.

    Ties between equidistant neighbors are resolved toward the smaller
    point index, which does not change the returned distance.  Duplicate
    points make the scale zero and are rejected: a zero bandwidth would
    poison the adaptive kernel with divisions by zero.
    """
    n = cloud.n_points
    k = int(k)
    if not 1 <= k <= n - 1:
        raise ConfigError(f"k must satisfy 1 <= k <= N-1 = {n - 1}, got {k}")
    d2 = pairwise_sq_dist(cloud)
    np.fill_diagonal(d2, np.inf)
    kth = np.partition(d2, k - 1, axis=1)[:, k - 1]
    scale = np.sqrt(kth)
    if np.any(scale == 0.0):
        bad = int(np.flatnonzero(scale == 0.0)[0])
        raise DataError(
            f"degenerate neighbor scale: point {bad} coincides with {k} or more "
            f"other points"
        )
    return scale


def gaussian_affinity(cloud: PointCloud, bandwidth: float) -> AffinityGraph:
    """Fixed-bandwidth Gaussian affinity graph.

    Weights are eps^(-d/2) * exp(-||x - x'||^2 / (4 eps)) with d the
    declared intrinsic dimension.  The 4*eps scaling in the exponent is the
    heat-kernel convention: with it, the rescaled graph Laplacian built by
    :func:`ptscatter.operators.build_laplacian` recovers the manifold
    Laplacian spectrum on the unit sphere without an extra constant factor
    (see ``tests/test_acceptance.py`` and ``demos/sphere_spectrum.py``).

    Self-affinities are kept on the diagonal (value eps^(-d/2)), which also
    guarantees strictly positive degrees.
    """
    eps = float(bandwidth)
    if not eps > 0.0:
        raise ConfigError(f"bandwidth must be positive, got {eps}")
    d2 = pairwise_sq_dist(cloud)
    w = eps ** (-cloud.intrinsic_dim / 2.0) * np.exp(-d2 / (4.0 * eps))
    return AffinityGraph(
        weights=w, degrees=degree_vector(w), kernel="gaussian", bandwidth=eps
    )


def adaptive_affinity(cloud: PointCloud, k: int) -> AffinityGraph:
    """Adaptive-bandwidth affinity graph.

    Each point gets its own Gaussian bandwidth, the distance to its k-th
    nearest neighbor, and the two one-sided kernels are averaged:

        w(x, x') = (exp(-||x-x'||^2 / s(x)^2) + exp(-||x-x'||^2 / s(x')^2)) / 2

    The average makes the matrix symmetric by construction, and the
    diagonal is exactly one.
    """
    scale = knn_scale(cloud, k)
    d2 = pairwise_sq_dist(cloud)
    one_sided = np.exp(-d2 / scale[:, None] ** 2)
    w = 0.5 * (one_sided + one_sided.T)
    return AffinityGraph(
        weights=w, degrees=degree_vector(w), kernel="adaptive", n_neighbors=int(k)
    )


def degree_vector(weights: np.ndarray) -> np.ndarray:
    """Row sums of a nonnegative affinity matrix.

    A zero row sum means a point is isolated from the rest of the graph,
    which signals a kernel bandwidth too small for the sampling density;
    downstream operators would divide by it, so it is rejected here.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise DataError(f"affinity matrix must be square, got shape {w.shape}")
    if np.any(w < 0.0):
        raise DataError("affinity matrix has negative entries")
    deg = w.sum(axis=1)
    if np.any(deg <= 0.0):
        bad = int(np.flatnonzero(deg <= 0.0)[0])
        raise DataError(
            f"point {bad} has zero degree (isolated point; kernel bandwidth too small)"
        )
    return deg
