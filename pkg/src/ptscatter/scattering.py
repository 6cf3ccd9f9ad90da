"""Dyadic wavelet filter bank and scattering moments.

Given a heat-operator backend H^t, the filter bank is

    W_0 f = f - H^1 f,
    W_j f = H^(2^(j-1)) f - H^(2^j) f   for 1 <= j <= J,
    A_J f = H^(2^J) f,

so the outputs telescope back to f exactly.  Scattering moments are
empirical q-th powers of iterated |wavelet| compositions:

    order 0:  mean |f|^q
    order 1:  mean |W_j f|^q
    order 2:  mean |W_j' |W_j f||^q            for j < j'
    order 3:  mean |W_j'' |W_j' |W_j f|||^q    for j < j' < j''

with the pointwise absolute value as the nonlinearity and the uniform
empirical measure (1/N sums) as quadrature.  Feature vectors are emitted
in a canonical order - path order ascending, scale tuples lexicographic,
moment exponent q ascending within a path - so runs and components can be
compared entrywise.

W_0 always uses the exact identity: under spectral truncation this keeps
the energy the truncation discards, and it is what makes the telescoping
sum exact for every backend.
"""

import csv
import io
import json
import re
from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .errors import ConfigError, DataError
from .operators import (
    MarkovOperator,
    SpectralHeatOperator,
    _atomic_write_text,
    heat_apply_spectral,
    markov_dyadic_apply,
)

__all__ = [
    "ScatteringConfig",
    "FeatureVector",
    "wavelet_apply",
    "sqrt_wavelet_apply",
    "lq_moment",
    "scattering_paths",
    "feature_count",
    "scattering_features",
    "dirac_signals",
    "manifold_embedding",
    "extract_feature_matrix",
    "path_label",
    "save_features_json",
    "save_features_csv",
    "load_features",
]


@dataclass(frozen=True)
class ScatteringConfig:
    """Tunables of the scattering transform.

    max_scale       largest dyadic exponent J (scales 2^0 .. 2^J)
    max_moment      largest moment exponent Q (q runs 1 .. Q)
    max_path_order  1, 2, or 3 cascade levels
    backend_kind    "spectral" or "markov"; checked against the operator
    wavelet_variant "plain" band-pass differences, or "sqrt" which takes
                    per-eigenvalue square roots (spectral backend only,
                    energy preserving)
    time_scale      rescales diffusion time: H^t is applied at time
                    time_scale * t, reaching finer scales when < 1
                    (spectral backend only)
    """

    max_scale: int = 8
    max_moment: int = 4
    max_path_order: int = 2
    backend_kind: str = "markov"
    wavelet_variant: str = "plain"
    time_scale: float = 1.0

    def __post_init__(self):
        if self.max_scale < 0:
            raise ConfigError(f"max_scale must be >= 0, got {self.max_scale}")
        if self.max_moment < 1:
            raise ConfigError(f"max_moment must be >= 1, got {self.max_moment}")
        if self.max_path_order not in (1, 2, 3):
            raise ConfigError(f"max_path_order must be 1, 2, or 3, got {self.max_path_order}")
        if self.backend_kind not in ("spectral", "markov"):
            raise ConfigError(f"unknown backend_kind {self.backend_kind!r}")
        if self.wavelet_variant not in ("plain", "sqrt"):
            raise ConfigError(f"unknown wavelet_variant {self.wavelet_variant!r}")
        if self.wavelet_variant == "sqrt" and self.backend_kind != "spectral":
            raise ConfigError("sqrt wavelets require the spectral backend")
        if not self.time_scale > 0.0:
            raise ConfigError(f"time_scale must be positive, got {self.time_scale}")
        if self.time_scale != 1.0 and self.backend_kind != "spectral":
            raise ConfigError("time_scale rescaling requires the spectral backend")

    def as_dict(self) -> dict:
        return {
            "J": self.max_scale,
            "Q": self.max_moment,
            "order": self.max_path_order,
            "backend": self.backend_kind,
            "wavelets": self.wavelet_variant,
            "tau": self.time_scale,
        }


@dataclass(frozen=True)
class FeatureVector:
    """Flat scattering moments plus parallel path / moment-order labels."""

    values: np.ndarray
    paths: tuple
    moments: tuple

    def __len__(self) -> int:
        return self.values.shape[0]

    def labels(self) -> list:
        return [path_label(p, q) for p, q in zip(self.paths, self.moments)]


def _check_signal(backend, values) -> np.ndarray:
    f = np.asarray(values, dtype=float)
    if f.shape[0] != backend.n_points:
        raise DataError(f"signal length {f.shape[0]} != operator size {backend.n_points}")
    if not np.all(np.isfinite(f)):
        raise DataError("signal contains non-finite values")
    return f


def _heat_ladder(backend, max_scale: int, f: np.ndarray, time_scale: float) -> list:
    """[H^(2^j) f for j = 0..J], columnwise over f."""
    if isinstance(backend, SpectralHeatOperator):
        return [
            heat_apply_spectral(backend, time_scale * 2.0**j, f)
            for j in range(max_scale + 1)
        ]
    if isinstance(backend, MarkovOperator):
        if time_scale != 1.0:
            raise ConfigError("time_scale rescaling requires the spectral backend")
        if backend.uses_cache:
            return [markov_dyadic_apply(backend, j, f) for j in range(max_scale + 1)]
        ladder = []
        out = f
        applied = 0
        for j in range(max_scale + 1):
            for _ in range(2**j - applied):
                out = backend.matrix @ out
            applied = 2**j
            ladder.append(out)
        return ladder
    raise ConfigError(f"unsupported backend type {type(backend).__name__}")


def wavelet_apply(backend, max_scale: int, values, time_scale: float = 1.0) -> list:
    """Band-pass wavelet outputs [W_0 f, ..., W_J f, A_J f].

    Computed as differences of heat applications, with the exact identity
    in W_0, so summing the returned list reproduces the input to roundoff.
    ``values`` may be a vector or a matrix of stacked column signals.
    """
    if int(max_scale) < 0:
        raise ConfigError(f"max_scale must be >= 0, got {max_scale}")
    f = _check_signal(backend, values)
    ladder = _heat_ladder(backend, int(max_scale), f, float(time_scale))
    out = [f - ladder[0]]
    for j in range(1, int(max_scale) + 1):
        out.append(ladder[j - 1] - ladder[j])
    out.append(ladder[-1])
    return out


def sqrt_wavelet_apply(backend, max_scale: int, values, time_scale: float = 1.0) -> list:
    """Energy-preserving wavelet variant, spectral backend only.

    Per eigenvalue, with g = exp(-time_scale * lambda), the filters are
    sqrt(1 - g), sqrt(g^(2^(j-1)) - g^(2^j)), and sqrt(g^(2^J)); their
    squares sum to one, so the bank is an isometry when the truncation
    keeps the full spectrum.
    """
    if not isinstance(backend, SpectralHeatOperator):
        raise ConfigError("sqrt wavelets require the spectral backend")
    big_j = int(max_scale)
    if big_j < 0:
        raise ConfigError(f"max_scale must be >= 0, got {max_scale}")
    f = _check_signal(backend, values)
    g = np.exp(-float(time_scale) * backend.eigenvalues)
    filters = [1.0 - g]
    filters += [g ** (2.0 ** (j - 1)) - g ** (2.0**j) for j in range(1, big_j + 1)]
    filters.append(g ** (2.0**big_j))
    coef = backend.eigenvectors.T @ f
    out = []
    for filt in filters:
        root = np.sqrt(np.maximum(filt, 0.0))
        out.append(backend.eigenvectors @ (root[:, None] * coef if f.ndim == 2 else root * coef))
    return out


def lq_moment(values, q: int) -> float:
    """Empirical q-th absolute moment: mean of |v_i|^q."""
    q = int(q)
    if q < 1:
        raise ConfigError(f"moment exponent must be >= 1, got {q}")
    v = np.asarray(values, dtype=float)
    if not np.all(np.isfinite(v)):
        raise DataError("moment input contains non-finite values")
    return float(np.mean(np.abs(v) ** q))


def scattering_paths(max_scale: int, max_moment: int, max_path_order: int):
    """Canonical (path, q) label sequence.

    Paths are ordered by length, then lexicographically by scale tuple;
    each path carries q = 1..max_moment in ascending order.
    """
    scales = range(max_scale + 1)
    paths = [()]
    paths += [(j,) for j in scales]
    if max_path_order >= 2:
        paths += list(combinations(scales, 2))
    if max_path_order >= 3:
        paths += list(combinations(scales, 3))
    out_paths, out_moments = [], []
    for p in paths:
        for q in range(1, max_moment + 1):
            out_paths.append(p)
            out_moments.append(q)
    return tuple(out_paths), tuple(out_moments)


def feature_count(max_scale: int, max_moment: int, max_path_order: int) -> int:
    n_scales = max_scale + 1
    total = 1 + n_scales
    if max_path_order >= 2:
        total += n_scales * (n_scales - 1) // 2
    if max_path_order >= 3:
        total += n_scales * (n_scales - 1) * (n_scales - 2) // 6
    return total * max_moment


def _check_backend_kind(backend, config: ScatteringConfig) -> None:
    expected = {"spectral": SpectralHeatOperator, "markov": MarkovOperator}[config.backend_kind]
    if not isinstance(backend, expected):
        raise ConfigError(
            f"config expects a {config.backend_kind} backend but got "
            f"{type(backend).__name__}"
        )


def _bank(backend, config: ScatteringConfig):
    apply_fn = sqrt_wavelet_apply if config.wavelet_variant == "sqrt" else wavelet_apply
    return lambda f: apply_fn(backend, config.max_scale, f, config.time_scale)


def scattering_features(backend, config: ScatteringConfig, values) -> FeatureVector:
    """All scattering moments of one signal, in canonical order."""
    _check_backend_kind(backend, config)
    f = _check_signal(backend, values)
    if f.ndim != 1:
        raise DataError("scattering_features expects a single signal vector")
    bank = _bank(backend, config)
    big_j, big_q = config.max_scale, config.max_moment
    n_scales = big_j + 1

    table: dict = {}
    for q in range(1, big_q + 1):
        table[((), q)] = lq_moment(f, q)

    first = bank(f)[:n_scales]  # drop the low-pass output; moments use W_j only
    for j in range(n_scales):
        for q in range(1, big_q + 1):
            table[((j,), q)] = lq_moment(first[j], q)

    if config.max_path_order >= 2:
        u1 = np.abs(np.stack(first, axis=1))  # (N, J+1)
        second = bank(u1)[:n_scales]
        pairs = list(combinations(range(n_scales), 2))
        for j, jp in pairs:
            for q in range(1, big_q + 1):
                table[((j, jp), q)] = lq_moment(second[jp][:, j], q)
        if config.max_path_order >= 3:
            u2 = np.abs(np.stack([second[jp][:, j] for j, jp in pairs], axis=1))
            third = bank(u2)[:n_scales]
            for col, (j, jp) in enumerate(pairs):
                for jpp in range(jp + 1, n_scales):
                    for q in range(1, big_q + 1):
                        table[((j, jp, jpp), q)] = lq_moment(third[jpp][:, col], q)

    paths, moments = scattering_paths(big_j, big_q, config.max_path_order)
    out = np.array([table[(p, q)] for p, q in zip(paths, moments)])
    return FeatureVector(values=out, paths=paths, moments=moments)


def dirac_signals(n_points: int, count: int, seed: int) -> np.ndarray:
    """``count`` one-hot probe signals at distinct random points.

    The indices are the first ``count`` entries of a random permutation of
    range(n_points) drawn from a PCG64 generator seeded with ``seed``.
    Returns a (count, n_points) array, one signal per row.
    """
    n = int(n_points)
    m = int(count)
    if not 1 <= m <= n:
        raise ConfigError(f"count must satisfy 1 <= count <= {n}, got {m}")
    idx = np.random.default_rng(seed).permutation(n)[:m]
    signals = np.zeros((m, n))
    signals[np.arange(m), idx] = 1.0
    return signals


def manifold_embedding(backend, config: ScatteringConfig, signals, mode: str = "concat") -> FeatureVector:
    """Represent a whole point cloud by scattering a family of probe signals.

    ``concat`` joins the per-signal feature vectors in order (path labels
    repeat per signal block); ``mean`` averages them entrywise, giving a
    summary invariant to the signal order.
    """
    if mode not in ("concat", "mean"):
        raise ConfigError(f"unknown embedding mode {mode!r}")
    signals = list(signals)
    if not signals:
        raise ConfigError("need at least one probe signal")
    feats = [scattering_features(backend, config, s) for s in signals]
    if mode == "mean":
        stacked = np.stack([fv.values for fv in feats])
        return FeatureVector(
            values=stacked.mean(axis=0), paths=feats[0].paths, moments=feats[0].moments
        )
    values = np.concatenate([fv.values for fv in feats])
    paths = tuple(p for fv in feats for p in fv.paths)
    moments = tuple(q for fv in feats for q in fv.moments)
    return FeatureVector(values=values, paths=paths, moments=moments)


def extract_feature_matrix(backend, config: ScatteringConfig, signals):
    """Features of several signals as an (S, F) matrix plus shared labels."""
    signals = np.asarray(signals, dtype=float)
    if signals.ndim != 2:
        raise DataError(f"signals must form an S x N matrix, got shape {signals.shape}")
    feats = [scattering_features(backend, config, row) for row in signals]
    values = np.stack([fv.values for fv in feats])
    return values, feats[0].paths, feats[0].moments


def path_label(path, q: int) -> str:
    return "S(" + ",".join(str(j) for j in path) + f")q{q}"


_LABEL_RE = re.compile(r"^S\(([\d,]*)\)q(\d+)$")


def _parse_label(label: str):
    m = _LABEL_RE.match(label.strip())
    if not m:
        raise DataError(f"malformed feature label {label!r}")
    scales = tuple(int(s) for s in m.group(1).split(",") if s != "")
    return scales, int(m.group(2))


def save_features_json(path, values, paths, moments, config_info: dict) -> None:
    """Feature file: config echo plus parallel paths / q / values arrays."""
    values = np.asarray(values, dtype=float)
    payload = {
        "config": config_info,
        "paths": [list(p) for p in paths],
        "q": list(moments),
        "values": values.tolist(),
    }
    _atomic_write_text(path, json.dumps(payload))


def save_features_csv(path, values, paths, moments) -> None:
    """Flat CSV: header of path labels, then one row per signal.

    Labels contain commas ("S(1,3)q2"), so the header cells are written
    with standard CSV quoting.
    """
    values = np.atleast_2d(np.asarray(values, dtype=float))
    header = [path_label(p, q) for p, q in zip(paths, moments)]
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in values:
        writer.writerow([format(v, ".17g") for v in row])
    _atomic_write_text(path, buffer.getvalue())


def load_features(path):
    """Read a feature file (JSON or CSV); returns (values, paths, moments)."""
    text_path = str(path)
    if text_path.endswith(".json"):
        try:
            with open(path, "r", encoding="utf-8") as fh:
                payload = json.load(fh)
            values = np.atleast_2d(np.asarray(payload["values"], dtype=float))
            paths = tuple(tuple(p) for p in payload["paths"])
            moments = tuple(int(q) for q in payload["q"])
        except (OSError, ValueError, KeyError) as exc:
            raise DataError(f"cannot read feature file {path}: {exc}") from exc
        return values, paths, moments
    try:
        with open(path, "r", encoding="utf-8", newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read feature file {path}: {exc}") from exc
    if not rows:
        raise DataError(f"feature file {path} is empty")
    labels = [_parse_label(cell) for cell in rows[0]]
    paths = tuple(p for p, _ in labels)
    moments = tuple(q for _, q in labels)
    try:
        values = np.array([[float(cell) for cell in row] for row in rows[1:]])
    except ValueError as exc:
        raise DataError(f"non-numeric feature value in {path}: {exc}") from exc
    if values.size == 0 or values.shape[1] != len(paths):
        raise DataError(f"feature file {path} has inconsistent row lengths")
    return values, paths, moments
