"""Heat-semigroup backends over an affinity graph.

Two interchangeable approximations of the heat semigroup {H^t} are
provided:

* a spectral backend: the rescaled graph Laplacian L = (D - W) / (eps N)
  is diagonalized, its smallest eigenpairs kept, and H^t applied as
  sum_k exp(-lambda_k t) <u_k, f> u_k;

* an eigen-free Markov backend: the row-stochastic operator P = D^{-1} W
  plays the role of H^1, and dyadic powers P^(2^j) are applied either
  through a repeated-squaring cache (small dense matrices) or by repeated
  matrix-vector products.
"""

import json
import os
import tempfile
from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse

from .errors import ConfigError, DataError, NumericalError
from .graph import AffinityGraph, PointCloud, adaptive_affinity, gaussian_affinity

__all__ = [
    "LaplacianMatrix",
    "SpectralHeatOperator",
    "MarkovOperator",
    "epsilon_rule",
    "build_laplacian",
    "smallest_eigs",
    "heat_apply_spectral",
    "markov_operator",
    "markov_dyadic_apply",
    "sparsify",
    "save_eigenpairs",
    "load_eigenpairs",
    "build_backend",
]

# Dense Markov operators at or below this size get a repeated-squaring
# cache of dyadic powers; larger ones fall back to sequential application.
DYADIC_CACHE_MAX_N = 2048


def epsilon_rule(n_points: int, intrinsic_dim: int, constant: float = 2.0) -> float:
    """Bandwidth schedule eps = c * N^(-1 / (d/2 + 3)).

    The exponent balances kernel bias against sampling variance so that
    the Laplacian eigenvalues converge as the cloud grows.  The constant
    is not pinned by the theory; 2.0 is a serviceable default and the
    sphere benchmark sweeps it.
    """
    n = int(n_points)
    d = int(intrinsic_dim)
    c = float(constant)
    if n < 1 or d < 1:
        raise ConfigError(f"need n_points >= 1 and intrinsic_dim >= 1, got {n}, {d}")
    if not c > 0.0:
        raise ConfigError(f"constant must be positive, got {c}")
    return c * n ** (-1.0 / (d / 2.0 + 3.0))


@dataclass(frozen=True)
class LaplacianMatrix:
    """Rescaled graph Laplacian (D - W) / (eps N): symmetric PSD, kills constants."""

    matrix: np.ndarray
    bandwidth: float

    @property
    def n_points(self) -> int:
        return self.matrix.shape[0]


def build_laplacian(graph: AffinityGraph, bandwidth: float) -> LaplacianMatrix:
    """Assemble L = (D - W) / (eps N) from an affinity graph.

    The caller is responsible for passing the same bandwidth that built the
    graph; for the adaptive kernel, which has no single bandwidth, any
    positive value merely fixes the overall spectral scale.
    """
    eps = float(bandwidth)
    if not eps > 0.0:
        raise ConfigError(f"bandwidth must be positive, got {eps}")
    w = graph.weights
    if w.shape[0] != graph.degrees.shape[0]:
        raise DataError("affinity matrix and degree vector sizes disagree")
    n = w.shape[0]
    lap = (np.diag(graph.degrees) - w) / (eps * n)
    return LaplacianMatrix(matrix=lap, bandwidth=eps)


@dataclass(frozen=True)
class SpectralHeatOperator:
    """The smallest Laplacian eigenpairs, defining H^t by spectral damping.

    ``eigenvalues`` is ascending and nonnegative, ``eigenvectors`` holds the
    matching orthonormal columns.  Each column's sign is fixed by making its
    largest-magnitude entry positive so that repeated runs agree exactly.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def n_points(self) -> int:
        return self.eigenvectors.shape[0]

    @property
    def order(self) -> int:
        return self.eigenvalues.shape[0]


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(vectors), axis=0)
    signs = np.sign(vectors[idx, np.arange(vectors.shape[1])])
    signs[signs == 0.0] = 1.0
    return vectors * signs


def smallest_eigs(laplacian: LaplacianMatrix, count: int) -> SpectralHeatOperator:
    """Compute the ``count`` smallest eigenpairs of the Laplacian.

    Uses a dense symmetric solver restricted to the requested index range.
    Residuals ||L u - lambda u|| are checked against 1e-8; failure to meet
    that bound raises :class:`NumericalError` with diagnostics.  Eigenvalues
    within solver roundoff of zero are snapped to exactly zero: for a
    connected graph the smallest eigenvalue is zero in exact arithmetic,
    and downstream square-root filters amplify any leftover noise.
    """
    kappa = int(count)
    n = laplacian.n_points
    if not 1 <= kappa <= n:
        raise ConfigError(f"eigenpair count must satisfy 1 <= count <= N = {n}, got {kappa}")
    try:
        vals, vecs = scipy.linalg.eigh(laplacian.matrix, subset_by_index=(0, kappa - 1))
    except scipy.linalg.LinAlgError as exc:  # pragma: no cover - rare
        raise NumericalError(f"symmetric eigensolver failed: {exc}") from exc
    residual = np.linalg.norm(laplacian.matrix @ vecs - vecs * vals, axis=0)
    if np.any(residual > 1e-8):
        worst = int(np.argmax(residual))
        raise NumericalError(
            f"eigenpair {worst} residual {residual[worst]:.3e} exceeds 1e-8"
        )
    # Gershgorin bound 2*max(diag) as the spectral scale for the noise floor.
    noise = 1e-12 * 2.0 * float(np.max(np.diagonal(laplacian.matrix), initial=0.0))
    vals = np.where(vals < noise, 0.0, vals)
    return SpectralHeatOperator(eigenvalues=vals, eigenvectors=_fix_signs(vecs))


def heat_apply_spectral(op: SpectralHeatOperator, t: float, values: np.ndarray) -> np.ndarray:
    """Apply the truncated heat operator: sum_k exp(-lambda_k t) <u_k, f> u_k.

    ``values`` may be a length-N vector or an N x S matrix of stacked
    signals (applied columnwise).
    """
    t = float(t)
    if t < 0.0:
        raise ConfigError(f"diffusion time must be nonnegative, got {t}")
    f = np.asarray(values, dtype=float)
    if f.shape[0] != op.n_points:
        raise DataError(f"signal length {f.shape[0]} != operator size {op.n_points}")
    if not np.all(np.isfinite(f)):
        raise DataError("signal contains non-finite values")
    coef = op.eigenvectors.T @ f
    damp = np.exp(-op.eigenvalues * t)
    return op.eigenvectors @ (damp[:, None] * coef if f.ndim == 2 else damp * coef)


class MarkovOperator:
    """Row-stochastic diffusion operator P = D^{-1} W with dyadic powers.

    ``matrix`` is dense (ndarray) or sparse (CSR).  Dyadic powers P^(2^j)
    are cached by repeated squaring while N <= DYADIC_CACHE_MAX_N; beyond
    that, applications fall back to 2^j sequential products, which gives
    the same result up to roundoff.
    """

    def __init__(self, matrix, threshold: float | None = None):
        self.matrix = matrix
        self.threshold = threshold
        self._powers = [matrix]  # P^(2^0), P^(2^1), ...

    @property
    def n_points(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_sparse(self) -> bool:
        return scipy.sparse.issparse(self.matrix)

    @property
    def uses_cache(self) -> bool:
        return self.n_points <= DYADIC_CACHE_MAX_N

    def dyadic_power(self, level: int):
        """P^(2^level), from the repeated-squaring cache."""
        while len(self._powers) <= level:
            prev = self._powers[-1]
            self._powers.append(prev @ prev)
        return self._powers[level]

    def apply(self, values: np.ndarray) -> np.ndarray:
        return self.matrix @ values


def markov_operator(graph: AffinityGraph) -> MarkovOperator:
    """Row-normalize an affinity graph into the Markov operator P = D^{-1} W."""
    deg = graph.degrees
    if np.any(deg <= 0.0):
        raise DataError("cannot Markov-normalize a graph with zero degrees")
    return MarkovOperator(graph.weights / deg[:, None])


def markov_dyadic_apply(op: MarkovOperator, level: int, values: np.ndarray) -> np.ndarray:
    """Apply P^(2^level) to a vector (or columnwise to a matrix)."""
    j = int(level)
    if j < 0:
        raise ConfigError(f"dyadic level must be nonnegative, got {j}")
    f = np.asarray(values, dtype=float)
    if f.shape[0] != op.n_points:
        raise DataError(f"signal length {f.shape[0]} != operator size {op.n_points}")
    if op.uses_cache:
        return op.dyadic_power(j) @ f
    out = f
    for _ in range(2**j):
        out = op.matrix @ out
    return out


def sparsify(op: MarkovOperator, threshold: float) -> MarkovOperator:
    """Drop entries below ``threshold`` and renormalize rows to sum one.

    A row whose entries all fall below the threshold keeps its single
    largest original entry, so the result stays a proper row-stochastic
    operator.  The result is stored sparse (CSR) whenever the threshold
    actually removes anything.
    """
    theta = float(threshold)
    if not 0.0 <= theta < 1.0:
        raise ConfigError(f"threshold must lie in [0, 1), got {theta}")
    dense = op.matrix.toarray() if op.is_sparse else np.array(op.matrix, copy=True)
    if theta == 0.0:
        return MarkovOperator(dense, threshold=0.0)
    keep = dense >= theta
    empty_rows = np.flatnonzero(~keep.any(axis=1))
    if empty_rows.size:
        keep[empty_rows, np.argmax(dense[empty_rows], axis=1)] = True
    dense[~keep] = 0.0
    dense /= dense.sum(axis=1, keepdims=True)
    return MarkovOperator(scipy.sparse.csr_matrix(dense), threshold=theta)


def save_eigenpairs(op: SpectralHeatOperator, path) -> None:
    """Write eigenpairs as JSON: eigenvectors listed per eigenvalue index."""
    payload = {
        "eigenvalues": op.eigenvalues.tolist(),
        "eigenvectors": op.eigenvectors.T.tolist(),
    }
    _atomic_write_text(path, json.dumps(payload))


def load_eigenpairs(path) -> SpectralHeatOperator:
    """Read eigenpairs written by :func:`save_eigenpairs`."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            payload = json.load(fh)
        vals = np.asarray(payload["eigenvalues"], dtype=float)
        vecs = np.asarray(payload["eigenvectors"], dtype=float).T
    except (OSError, ValueError, KeyError) as exc:
        raise DataError(f"cannot read eigenpair file {path}: {exc}") from exc
    if vecs.ndim != 2 or vecs.shape[1] != vals.shape[0]:
        raise DataError(f"eigenpair file {path} has inconsistent shapes")
    return SpectralHeatOperator(eigenvalues=vals, eigenvectors=vecs)


def _atomic_write_text(path, text: str) -> None:
    """Write via a sibling temp file + rename so readers never see partial output.

    An unwritable destination is a usage problem, so it surfaces as
    :class:`ConfigError`.
    """
    path = os.fspath(path)
    directory = os.path.dirname(path) or "."
    tmp = None
    try:
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", text=True)
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        if tmp is not None and os.path.exists(tmp):
            os.unlink(tmp)
        raise ConfigError(f"cannot write {path}: {exc}") from exc


def build_backend(
    cloud: PointCloud,
    backend: str,
    kernel: str,
    *,
    eps="auto",
    eps_const: float = 2.0,
    knn: int | None = None,
    kappa: int | None = None,
    threshold: float | None = None,
):
    """Wire a point cloud into a heat-operator backend.

    Returns ``(operator, info)`` where ``operator`` is a
    :class:`SpectralHeatOperator` or :class:`MarkovOperator` and ``info``
    echoes the resolved settings (including the bandwidth actually used)
    for provenance.

    With the adaptive kernel the Laplacian normalization bandwidth is fixed
    at 1.0: the kernel has no epsilon of its own, and the choice only sets
    the overall spectral scale.
    """
    if backend not in ("spectral", "markov"):
        raise ConfigError(f"unknown backend {backend!r}")
    if kernel not in ("gaussian", "adaptive"):
        raise ConfigError(f"unknown kernel {kernel!r}")

    info: dict = {"backend": backend, "kernel": kernel, "n_points": cloud.n_points}
    if kernel == "gaussian":
        if eps is None or eps == "auto":
            eps_value = epsilon_rule(cloud.n_points, cloud.intrinsic_dim, eps_const)
            info["eps_const"] = float(eps_const)
        else:
            eps_value = float(eps)
            if not eps_value > 0.0:
                raise ConfigError(f"eps must be positive, got {eps_value}")
        graph = gaussian_affinity(cloud, eps_value)
        info["eps"] = eps_value
        lap_eps = eps_value
    else:
        if knn is None:
            raise ConfigError("the adaptive kernel requires the neighbor count (knn)")
        graph = adaptive_affinity(cloud, knn)
        info["knn"] = int(knn)
        lap_eps = 1.0

    if backend == "markov":
        op = markov_operator(graph)
        if threshold is not None and threshold > 0.0:
            op = sparsify(op, threshold)
            info["threshold"] = float(threshold)
        return op, info

    if kappa is None:
        raise ConfigError("the spectral backend requires the eigenpair count (kappa)")
    lap = build_laplacian(graph, lap_eps)
    op = smallest_eigs(lap, kappa)
    info["kappa"] = int(kappa)
    return op, info
