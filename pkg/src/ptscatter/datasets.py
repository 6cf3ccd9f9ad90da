"""Dataset generation and ingestion.

Covers the desk-scale reproduction inputs: uniform sphere sampling,
IDX-format digit images, random rotations, projection of flat images onto
a spherical point cloud, header-free CSV matrices, and the analytic sphere
spectrum used to validate the Laplacian pipeline.
"""

import struct

import numpy as np

from .errors import ConfigError, DataError
from .graph import PointCloud
from .operators import _atomic_write_text

__all__ = [
    "sample_sphere",
    "random_rotation",
    "rotation_from_rng",
    "project_digit",
    "sphere_spectrum_oracle",
    "load_mnist_idx",
    "write_mnist_idx",
    "load_pointcloud_csv",
    "save_pointcloud_csv",
    "load_signals_csv",
    "save_signals_csv",
    "load_labels_csv",
    "save_labels_csv",
]

IMAGES_MAGIC = 0x00000803
LABELS_MAGIC = 0x00000801


def sample_sphere(n_points: int, seed: int) -> PointCloud:
    """Uniform sample of the unit two-sphere: normalized 3-D Gaussians.

    Bit-reproducible per seed.  The returned cloud declares intrinsic
    dimension 2.
    """
    n = int(n_points)
    if n < 1:
        raise ConfigError(f"need at least one point, got {n}")
    rng = np.random.default_rng(seed)
    coords = rng.standard_normal((n, 3))
    norms = np.linalg.norm(coords, axis=1)
    while np.any(norms < 1e-12):  # essentially never; keeps the division safe
        bad = norms < 1e-12
        coords[bad] = rng.standard_normal((int(bad.sum()), 3))
        norms = np.linalg.norm(coords, axis=1)
    return PointCloud(coords=coords / norms[:, None], intrinsic_dim=2)


def rotation_from_rng(rng: np.random.Generator) -> np.ndarray:
    """Rotation matrix uniform on SO(3), via a normalized 4-D Gaussian quaternion."""
    q = rng.standard_normal(4)
    while np.linalg.norm(q) < 1e-12:
        q = rng.standard_normal(4)
    w, x, y, z = q / np.linalg.norm(q)
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def random_rotation(seed: int) -> np.ndarray:
    """Seeded uniformly-random 3-D rotation (orthogonal, determinant +1)."""
    return rotation_from_rng(np.random.default_rng(seed))


# Cap geometry for digit projection: the spherical cap of half-angle pi/4
# around the +z pole receives the image through an orthographic map.
CAP_HALF_ANGLE = np.pi / 4.0


def project_digit(image: np.ndarray, cloud: PointCloud, rotation: np.ndarray) -> np.ndarray:
    """Paint a grayscale image onto a rotated spherical point cloud.

    The cloud is rotated by ``rotation``; points whose third coordinate
    exceeds cos(pi/4) form the cap.  Each cap point's (x, y) coordinates
    are mapped from [-sin(pi/4), sin(pi/4)]^2 onto the pixel grid
    (x -> column, increasing y -> upward, so row 0 is the top of the
    image) and the signal takes the nearest pixel's intensity.  Points
    outside the cap get zero.
    """
    img = np.asarray(image, dtype=float)
    if img.ndim != 2:
        raise DataError(f"image must be 2-D, got shape {img.shape}")
    coords = cloud.coords
    if coords.shape[1] != 3:
        raise DataError("digit projection needs a 3-D point cloud")
    norms = np.linalg.norm(coords, axis=1)
    if np.any(np.abs(norms - 1.0) > 1e-6):
        raise DataError("digit projection needs points on the unit sphere")
    rot = np.asarray(rotation, dtype=float)
    rotated = coords @ rot.T

    half = np.sin(CAP_HALF_ANGLE)
    cap = rotated[:, 2] > np.cos(CAP_HALF_ANGLE)
    rows, cols = img.shape
    signal = np.zeros(coords.shape[0])
    x = rotated[cap, 0]
    y = rotated[cap, 1]
    col_idx = np.rint((x + half) / (2 * half) * (cols - 1)).astype(int)
    row_idx = np.rint((half - y) / (2 * half) * (rows - 1)).astype(int)
    np.clip(col_idx, 0, cols - 1, out=col_idx)
    np.clip(row_idx, 0, rows - 1, out=row_idx)
    signal[cap] = img[row_idx, col_idx]
    return signal


def sphere_spectrum_oracle(max_degree: int) -> np.ndarray:
    """Analytic Laplacian spectrum of the unit two-sphere.

    Eigenvalue l(l+1) appears with multiplicity 2l+1 for l = 0..max_degree;
    returned ascending, (max_degree+1)^2 values in total.
    """
    if int(max_degree) < 0:
        raise ConfigError(f"max_degree must be >= 0, got {max_degree}")
    degrees = np.arange(int(max_degree) + 1)
    return np.repeat(degrees * (degrees + 1), 2 * degrees + 1).astype(float)


def _read_exact(fh, count: int, path, what: str) -> bytes:
    data = fh.read(count)
    if len(data) != count:
        raise DataError(f"{path}: truncated file while reading {what}")
    return data


def load_mnist_idx(images_path, labels_path):
    """Read an IDX image/label file pair.

    Images come back as an (M, rows, cols) float array scaled to [0, 1]
    (raw bytes divided by 255); labels as an (M,) integer array.  The two
    files must agree on the item count.
    """
    with open(images_path, "rb") as fh:
        (magic,) = struct.unpack(">i", _read_exact(fh, 4, images_path, "magic"))
        if magic != IMAGES_MAGIC:
            raise DataError(
                f"{images_path}: bad magic {magic:#010x} at offset 0 "
                f"(expected {IMAGES_MAGIC:#010x})"
            )
        count, rows, cols = struct.unpack(
            ">iii", _read_exact(fh, 12, images_path, "dimensions")
        )
        if count < 0 or rows <= 0 or cols <= 0:
            raise DataError(f"{images_path}: invalid dimensions {count}x{rows}x{cols}")
        raw = _read_exact(fh, count * rows * cols, images_path, "pixel data")
    images = np.frombuffer(raw, dtype=np.uint8).reshape(count, rows, cols) / 255.0

    with open(labels_path, "rb") as fh:
        (magic,) = struct.unpack(">i", _read_exact(fh, 4, labels_path, "magic"))
        if magic != LABELS_MAGIC:
            raise DataError(
                f"{labels_path}: bad magic {magic:#010x} at offset 0 "
                f"(expected {LABELS_MAGIC:#010x})"
            )
        (n_labels,) = struct.unpack(">i", _read_exact(fh, 4, labels_path, "count"))
        raw = _read_exact(fh, n_labels, labels_path, "label data")
    labels = np.frombuffer(raw, dtype=np.uint8).astype(int)

    if count != n_labels:
        raise DataError(
            f"image count {count} does not match label count {n_labels}"
        )
    return images, labels


def write_mnist_idx(images_path, labels_path, images, labels) -> None:
    """Write byte images (M x H x W uint8-compatible) and labels as IDX files."""
    arr = np.asarray(images)
    if arr.ndim != 3:
        raise DataError(f"images must be M x H x W, got shape {arr.shape}")
    lab = np.asarray(labels)
    if lab.shape[0] != arr.shape[0]:
        raise DataError(f"image count {arr.shape[0]} != label count {lab.shape[0]}")
    arr = np.clip(np.rint(arr), 0, 255).astype(np.uint8) if arr.dtype != np.uint8 else arr
    header = struct.pack(">iiii", IMAGES_MAGIC, *arr.shape)
    with open(images_path, "wb") as fh:
        fh.write(header + arr.tobytes())
    with open(labels_path, "wb") as fh:
        fh.write(struct.pack(">ii", LABELS_MAGIC, lab.shape[0]))
        fh.write(lab.astype(np.uint8).tobytes())


def _load_csv_matrix(path) -> np.ndarray:
    """Header-free comma-separated float matrix with line-numbered errors."""
    rows = []
    width = None
    try:
        fh = open(path, "r", encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot open {path}: {exc}") from exc
    with fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            cells = line.split(",")
            if width is None:
                width = len(cells)
            elif len(cells) != width:
                raise DataError(
                    f"{path}: line {lineno} has {len(cells)} fields, expected {width}"
                )
            try:
                rows.append([float(c) for c in cells])
            except ValueError:
                raise DataError(f"{path}: line {lineno} has a non-numeric field") from None
    if not rows:
        raise DataError(f"{path}: file contains no data rows")
    return np.array(rows)


def _save_csv_matrix(path, matrix) -> None:
    arr = np.atleast_2d(np.asarray(matrix, dtype=float))
    lines = [",".join(format(v, ".17g") for v in row) for row in arr]
    _atomic_write_text(path, "\n".join(lines) + "\n")


def load_pointcloud_csv(path, intrinsic_dim: int) -> PointCloud:
    """Point cloud from CSV (one point per row); d is supplied, never inferred."""
    return PointCloud(coords=_load_csv_matrix(path), intrinsic_dim=intrinsic_dim)


def save_pointcloud_csv(path, cloud: PointCloud) -> None:
    _save_csv_matrix(path, cloud.coords)


def load_signals_csv(path) -> np.ndarray:
    """Signals from CSV: S rows, one signal over the cloud per row."""
    return _load_csv_matrix(path)


def save_signals_csv(path, signals) -> None:
    _save_csv_matrix(path, signals)


def load_labels_csv(path) -> np.ndarray:
    values = _load_csv_matrix(path).ravel()
    labels = values.astype(int)
    if np.any(labels != values):
        raise DataError(f"{path}: labels must be integers")
    return labels


def save_labels_csv(path, labels) -> None:
    lab = np.asarray(labels).astype(int)
    _atomic_write_text(path, "\n".join(str(v) for v in lab) + "\n")
