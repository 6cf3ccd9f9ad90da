"""Command-line pipelines: generate, project, extract, decompose, classify.

Subcommands wire the library into reproducible runs; every piece of
randomness flows from an explicit --seed.  Options can also come from a
flat key=value config file (--config); explicit flags win over the file,
the file wins over built-in defaults.

Exit codes: 0 success, 2 usage or configuration error, 3 input-data
error, 4 numerical failure.
"""

import argparse
import json
import sys

import numpy as np

from . import datasets, learn, scattering
from .errors import ConfigError, DataError, NumericalError
from .operators import (
    _atomic_write_text,
    build_backend,
    build_laplacian,
    epsilon_rule,
    load_eigenpairs,
    save_eigenpairs,
    smallest_eigs,
)
from .graph import gaussian_affinity

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4

# Defaults applied after merging flags with an optional config file.
DEFAULTS = {
    "backend": "markov",
    "kernel": "adaptive",
    "J": 8,
    "Q": 4,
    "order": 2,
    "eps": "auto",
    "eps_const": 2.0,
    "knn": 5,
    "tau": 1.0,
    "wavelets": "plain",
    "seed": 0,
    "model": "knn",
    "pca": 0,
    "pca_whiten": False,
    "test_frac": 0.3,
    "max_depth": 5,
    "min_leaf": 2,
}


def _as_bool(value) -> bool:
    if isinstance(value, bool):
        return value
    text = str(value).strip().lower()
    if text in ("1", "true", "yes", "on"):
        return True
    if text in ("0", "false", "no", "off"):
        return False
    raise ValueError(value)


def _read_config_file(path) -> dict:
    """Flat key=value lines mirroring flag names; '#' starts a comment."""
    values = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, start=1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}: line {lineno}: expected key=value")
                key, value = line.split("=", 1)
                values[key.strip().replace("-", "_")] = value.strip()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    return values


def _resolve(args, key, cast=None):
    """flags > config file > defaults."""
    value = getattr(args, key, None)
    if value is None:
        value = getattr(args, "_config_values", {}).get(key)
    if value is None:
        value = DEFAULTS.get(key)
    if value is None:
        raise ConfigError(f"missing required option --{key.replace('_', '-')}")
    if cast is not None and value is not None:
        try:
            value = cast(value)
        except (TypeError, ValueError):
            raise ConfigError(f"invalid value for --{key.replace('_', '-')}: {value!r}") from None
    return value


def _eps_value(raw):
    if raw in ("auto", None):
        return "auto"
    try:
        value = float(raw)
    except (TypeError, ValueError):
        raise ConfigError(f"--eps must be a float or 'auto', got {raw!r}") from None
    if not value > 0.0:
        raise ConfigError(f"--eps must be positive, got {value}")
    return value


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ptscatter",
        description="Scattering features for point clouds via heat-operator wavelets.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="flat key=value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--out", help="output path")

    p = sub.add_parser("gen-sphere", help="sample a uniform sphere point cloud to CSV")
    p.add_argument("--n", type=int, required=True, help="number of points")
    add_common(p)

    p = sub.add_parser("mnist-sphere", help="project IDX digits onto a spherical cloud")
    p.add_argument("--images", required=True, help="IDX image file")
    p.add_argument("--labels", required=True, help="IDX label file")
    p.add_argument("--points", required=True, help="point-cloud CSV (unit sphere)")
    p.add_argument("--count", type=int, required=True, help="number of digits to project")
    p.add_argument("--out-signals", required=True, help="signals CSV output")
    p.add_argument("--out-labels", required=True, help="labels CSV output")
    add_common(p)

    p = sub.add_parser("eigs", help="smallest Laplacian eigenpairs of a cloud")
    p.add_argument("--points", required=True)
    p.add_argument("--kappa", type=int, required=True)
    p.add_argument("--dim", type=int, required=True, help="intrinsic dimension")
    p.add_argument("--eps", help="kernel bandwidth (float or 'auto')")
    p.add_argument("--eps-const", dest="eps_const", type=float)
    add_common(p)

    p = sub.add_parser("extract", help="scattering features of signals on a cloud")
    p.add_argument("--points", required=True)
    p.add_argument("--signals", required=True)
    p.add_argument("--backend", choices=["spectral", "markov"])
    p.add_argument("--kernel", choices=["gaussian", "adaptive"])
    p.add_argument("--J", dest="J", type=int)
    p.add_argument("--Q", dest="Q", type=int)
    p.add_argument("--order", type=int)
    p.add_argument("--kappa", type=int)
    p.add_argument("--eps")
    p.add_argument("--eps-const", dest="eps_const", type=float)
    p.add_argument("--dim", type=int, help="intrinsic dimension")
    p.add_argument("--knn", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--wavelets", choices=["plain", "sqrt"])
    p.add_argument("--threshold", type=float, help="Markov sparsification level")
    p.add_argument("--eigs", help="reuse eigenpairs from a JSON file (spectral)")
    add_common(p)

    p = sub.add_parser("classify", help="evaluate a classifier on a feature file")
    p.add_argument("--features", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--model", choices=["knn", "tree"])
    p.add_argument("--pca", type=int)
    p.add_argument("--pca-whiten", dest="pca_whiten", action="store_const", const=True)
    p.add_argument("--knn", type=int, help="neighbor count for the knn model")
    p.add_argument("--max-depth", dest="max_depth", type=int)
    p.add_argument("--min-leaf", dest="min_leaf", type=int)
    p.add_argument("--test-frac", dest="test_frac", type=float)
    p.add_argument("--folds", type=int)
    add_common(p)

    return parser


def cmd_gen_sphere(args) -> int:
    out = _resolve(args, "out")
    cloud = datasets.sample_sphere(args.n, _resolve(args, "seed", int))
    datasets.save_pointcloud_csv(out, cloud)
    print(f"wrote {cloud.n_points} points to {out}")
    return EXIT_OK


def cmd_mnist_sphere(args) -> int:
    images, labels = datasets.load_mnist_idx(args.images, args.labels)
    cloud = datasets.load_pointcloud_csv(args.points, intrinsic_dim=2)
    count = int(args.count)
    if not 1 <= count <= images.shape[0]:
        raise ConfigError(f"--count must lie in 1..{images.shape[0]}, got {count}")
    rng = np.random.default_rng(_resolve(args, "seed", int))
    chosen = rng.choice(images.shape[0], size=count, replace=False)
    signals = np.empty((count, cloud.n_points))
    for row, idx in enumerate(chosen):
        rotation = datasets.rotation_from_rng(rng)
        signals[row] = datasets.project_digit(images[idx], cloud, rotation)
    datasets.save_signals_csv(args.out_signals, signals)
    datasets.save_labels_csv(args.out_labels, labels[chosen])
    print(f"wrote {count} signals to {args.out_signals}, labels to {args.out_labels}")
    return EXIT_OK


def cmd_eigs(args) -> int:
    out = _resolve(args, "out")
    dim = int(args.dim)
    cloud = datasets.load_pointcloud_csv(args.points, intrinsic_dim=dim)
    eps = _eps_value(_resolve(args, "eps"))
    if eps == "auto":
        eps = epsilon_rule(cloud.n_points, dim, _resolve(args, "eps_const", float))
    graph = gaussian_affinity(cloud, eps)
    operator = smallest_eigs(build_laplacian(graph, eps), args.kappa)
    save_eigenpairs(operator, out)
    print(
        f"wrote {operator.order} eigenpairs (eps={eps:.6g}, N={cloud.n_points}) to {out}"
    )
    return EXIT_OK


def _scattering_config(args) -> scattering.ScatteringConfig:
    return scattering.ScatteringConfig(
        max_scale=_resolve(args, "J", int),
        max_moment=_resolve(args, "Q", int),
        max_path_order=_resolve(args, "order", int),
        backend_kind=_resolve(args, "backend"),
        wavelet_variant=_resolve(args, "wavelets"),
        time_scale=_resolve(args, "tau", float),
    )


def cmd_extract(args) -> int:
    out = _resolve(args, "out")
    config = _scattering_config(args)
    kernel = _resolve(args, "kernel")
    dim = getattr(args, "dim", None)
    if dim is None and kernel == "gaussian" and not getattr(args, "eigs", None):
        raise ConfigError("--dim is required with the gaussian kernel")
    # the adaptive kernel never reads the intrinsic dimension
    dim = int(dim) if dim is not None else 1
    cloud = datasets.load_pointcloud_csv(args.points, intrinsic_dim=dim)
    signals = datasets.load_signals_csv(args.signals)
    if signals.shape[1] != cloud.n_points:
        raise DataError(
            f"signals have {signals.shape[1]} columns but the cloud has "
            f"{cloud.n_points} points"
        )

    if config.backend_kind == "spectral" and getattr(args, "eigs", None):
        backend = load_eigenpairs(args.eigs)
        if backend.n_points != cloud.n_points:
            raise DataError("eigenpair file does not match the point cloud size")
        info = {"backend": "spectral", "eigs": str(args.eigs), "kappa": backend.order}
    else:
        kappa = getattr(args, "kappa", None)
        backend, info = build_backend(
            cloud,
            config.backend_kind,
            kernel,
            eps=_eps_value(_resolve(args, "eps")),
            eps_const=_resolve(args, "eps_const", float),
            knn=_resolve(args, "knn", int),
            kappa=int(kappa) if kappa is not None else None,
            threshold=getattr(args, "threshold", None),
        )

    values, paths, moments = scattering.extract_feature_matrix(backend, config, signals)
    info.update(config.as_dict())
    if str(out).endswith(".csv"):
        scattering.save_features_csv(out, values, paths, moments)
    else:
        scattering.save_features_json(out, values, paths, moments, info)
    print(f"wrote {values.shape[0]} x {values.shape[1]} features to {out}")
    return EXIT_OK


def cmd_classify(args) -> int:
    out = _resolve(args, "out")
    values, _, _ = scattering.load_features(args.features)
    labels = datasets.load_labels_csv(args.labels)
    if labels.shape[0] != values.shape[0]:
        raise DataError(
            f"{values.shape[0]} feature rows but {labels.shape[0]} labels"
        )
    model = _resolve(args, "model")
    spec = {"model": model, "standardize": True}
    pca_r = _resolve(args, "pca", int)
    if pca_r:
        spec["pca"] = pca_r
        if _resolve(args, "pca_whiten", _as_bool):
            spec["pca_whiten"] = True
    if model == "knn":
        spec["k"] = _resolve(args, "knn", int)
    else:
        spec["max_depth"] = _resolve(args, "max_depth", int)
        spec["min_leaf"] = _resolve(args, "min_leaf", int)
    folds = getattr(args, "folds", None)
    report = learn.evaluate(
        values,
        labels,
        spec,
        split_seed=_resolve(args, "seed", int),
        test_fraction=None if folds else _resolve(args, "test_frac", float),
        folds=int(folds) if folds else None,
    )
    _atomic_write_text(out, json.dumps(report, indent=2))
    print(f"accuracy {report['accuracy']:.4f} ({report['n_test']} test rows) -> {out}")
    return EXIT_OK


COMMANDS = {
    "gen-sphere": cmd_gen_sphere,
    "mnist-sphere": cmd_mnist_sphere,
    "eigs": cmd_eigs,
    "extract": cmd_extract,
    "classify": cmd_classify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # argparse uses its own exit code for usage errors
        return EXIT_CONFIG if exc.code not in (0, None) else EXIT_OK
    try:
        if getattr(args, "config", None):
            args._config_values = _read_config_file(args.config)
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
