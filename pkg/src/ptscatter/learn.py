"""Small self-contained learning harness.

Just enough machinery to turn scattering features into accuracy numbers:
PCA, a k-nearest-neighbor classifier, a CART decision tree, Lloyd's
k-means with k-means++ seeding, and seeded stratified evaluation.  All
tie-breaking is deterministic (smallest label / smallest index / first
feature) so reruns agree exactly.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError, NumericalError

__all__ = [
    "PcaModel",
    "pca_fit",
    "pca_transform",
    "standardize_fit",
    "standardize_apply",
    "knn_fit_predict",
    "TreeModel",
    "tree_fit",
    "tree_predict",
    "kmeans",
    "cluster_proportions",
    "stratified_split",
    "evaluate",
]


def _check_xy(x, y=None):
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise DataError(f"feature matrix must be 2-D, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise DataError("feature matrix contains non-finite entries")
    if y is None:
        return x
    y = np.asarray(y).astype(int).ravel()
    if y.shape[0] != x.shape[0]:
        raise DataError(f"have {x.shape[0]} rows but {y.shape[0]} labels")
    return x, y


# ---------------------------------------------------------------------------
# PCA

@dataclass(frozen=True)
class PcaModel:
    mean: np.ndarray
    components: np.ndarray          # F x r, orthonormal columns
    explained_variance: np.ndarray  # descending


def pca_fit(x, n_components: int) -> PcaModel:
    """Top principal components of the centered data via thin SVD."""
    x = _check_xy(x)
    s_rows, n_feats = x.shape
    if s_rows < 2:
        raise ConfigError("PCA needs at least two rows")
    r = int(n_components)
    if not 1 <= r <= min(s_rows, n_feats):
        raise ConfigError(
            f"n_components must satisfy 1 <= r <= {min(s_rows, n_feats)}, got {r}"
        )
    mean = x.mean(axis=0)
    _, svals, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = vt[:r].T
    # sign convention: largest-|entry| coordinate positive, for reproducibility
    idx = np.argmax(np.abs(comps), axis=0)
    signs = np.sign(comps[idx, np.arange(r)])
    signs[signs == 0.0] = 1.0
    comps = comps * signs
    var = svals[:r] ** 2 / (s_rows - 1)
    return PcaModel(mean=mean, components=comps, explained_variance=var)


def pca_transform(model: PcaModel, x) -> np.ndarray:
    x = _check_xy(x)
    if x.shape[1] != model.mean.shape[0]:
        raise DataError(
            f"feature width {x.shape[1]} != fitted width {model.mean.shape[0]}"
        )
    return (x - model.mean) @ model.components


def standardize_fit(x):
    """Per-column mean and scale (std, with zero-variance columns kept at 1)."""
    x = _check_xy(x)
    mean = x.mean(axis=0)
    scale = x.std(axis=0)
    scale[scale == 0.0] = 1.0
    return mean, scale


def standardize_apply(x, mean, scale) -> np.ndarray:
    return (np.asarray(x, dtype=float) - mean) / scale


# ---------------------------------------------------------------------------
# k-nearest neighbors

def knn_fit_predict(train_x, train_y, k: int, test_x) -> np.ndarray:
    """Majority vote among the k nearest training rows (Euclidean).

    Vote ties go to the smallest label; distance ties prefer the smaller
    training index (stable argsort).
    """
    train_x, train_y = _check_xy(train_x, train_y)
    test_x = _check_xy(test_x)
    if train_x.shape[0] == 0:
        raise ConfigError("empty training set")
    k = int(k)
    if not 1 <= k <= train_x.shape[0]:
        raise ConfigError(f"k must satisfy 1 <= k <= {train_x.shape[0]}, got {k}")
    if test_x.shape[1] != train_x.shape[1]:
        raise DataError("train and test feature widths differ")
    classes, encoded = np.unique(train_y, return_inverse=True)
    d2 = (
        np.einsum("ij,ij->i", test_x, test_x)[:, None]
        + np.einsum("ij,ij->i", train_x, train_x)[None, :]
        - 2.0 * test_x @ train_x.T
    )
    order = np.argsort(d2, axis=1, kind="stable")[:, :k]
    votes = encoded[order]
    counts = np.zeros((test_x.shape[0], classes.shape[0]), dtype=int)
    for c in range(classes.shape[0]):
        counts[:, c] = (votes == c).sum(axis=1)
    return classes[np.argmax(counts, axis=1)]  # argmax takes the smallest label on ties


# ---------------------------------------------------------------------------
# CART decision tree

@dataclass(frozen=True)
class TreeModel:
    """Flattened binary tree; leaves have feature == -1 and store a label."""

    feature: np.ndarray    # per-node split feature, -1 for leaves
    threshold: np.ndarray  # per-node split threshold
    left: np.ndarray       # child indices, -1 for leaves
    right: np.ndarray
    label: np.ndarray      # majority label (valid at every node)


def _gini(counts: np.ndarray) -> float:
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts / total
    return float(1.0 - np.sum(p * p))


def _majority(y: np.ndarray) -> int:
    classes, counts = np.unique(y, return_counts=True)
    return int(classes[np.argmax(counts)])  # smallest label on ties


def _best_split(x: np.ndarray, y: np.ndarray, min_leaf: int):
    """(feature, threshold, weighted_gini) of the best axis-aligned split.

    Candidate thresholds are midpoints of consecutive distinct values.
    Ties keep the first candidate in (feature, threshold) order.  Returns
    None when no split leaves both sides with at least min_leaf rows.
    """
    n = x.shape[0]
    best = None
    for feat in range(x.shape[1]):
        col = x[:, feat]
        values = np.unique(col)
        if values.shape[0] < 2:
            continue
        for lo, hi in zip(values[:-1], values[1:]):
            thr = 0.5 * (lo + hi)
            mask = col <= thr
            n_left = int(mask.sum())
            if n_left < min_leaf or n - n_left < min_leaf:
                continue
            _, left_counts = np.unique(y[mask], return_counts=True)
            _, right_counts = np.unique(y[~mask], return_counts=True)
            score = (n_left * _gini(left_counts) + (n - n_left) * _gini(right_counts)) / n
            if best is None or score < best[2] - 1e-15:
                best = (feat, thr, score)
    return best


def tree_fit(train_x, train_y, max_depth: int = 5, min_leaf: int = 2) -> TreeModel:
    """Grow a CART tree: axis-aligned splits minimizing weighted Gini impurity.

    Pure nodes, the depth limit, the min_leaf constraint, and split
    exhaustion all terminate growth; single-class data yields a depth-0
    leaf.  Zero-gain splits are allowed (they are what crack XOR-style
    datasets within the depth budget).
    """
    x, y = _check_xy(train_x, train_y)
    if int(max_depth) < 1 or int(min_leaf) < 1:
        raise ConfigError("max_depth and min_leaf must be >= 1")

    feature, threshold, left, right, label = [], [], [], [], []

    def grow(rows: np.ndarray, depth: int) -> int:
        node = len(feature)
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        label.append(_majority(y[rows]))
        if depth >= max_depth or np.unique(y[rows]).shape[0] == 1:
            return node
        split = _best_split(x[rows], y[rows], int(min_leaf))
        if split is None:
            return node
        feat, thr, _ = split
        mask = x[rows, feat] <= thr
        feature[node] = feat
        threshold[node] = thr
        left[node] = grow(rows[mask], depth + 1)
        right[node] = grow(rows[~mask], depth + 1)
        return node

    grow(np.arange(x.shape[0]), 0)
    return TreeModel(
        feature=np.array(feature),
        threshold=np.array(threshold),
        left=np.array(left),
        right=np.array(right),
        label=np.array(label),
    )


def tree_predict(model: TreeModel, x) -> np.ndarray:
    x = _check_xy(x)
    out = np.empty(x.shape[0], dtype=int)
    for i, row in enumerate(x):
        node = 0
        while model.feature[node] != -1:
            node = model.left[node] if row[model.feature[node]] <= model.threshold[node] else model.right[node]
        out[i] = model.label[node]
    return out


# ---------------------------------------------------------------------------
# k-means

def _inertia(x, centroids, assignments) -> float:
    return float(np.sum((x - centroids[assignments]) ** 2))


def kmeans(x, n_clusters: int, seed: int, max_iters: int = 100):
    """Lloyd's algorithm with k-means++ seeding.

    Runs to an assignment fixpoint or max_iters.  Inertia is checked to be
    non-increasing every iteration.  If a cluster empties, its centroid is
    re-seeded at the point farthest from its assigned centroid.
    Returns (assignments, centroids).
    """
    x = _check_xy(x)
    n = x.shape[0]
    k = int(n_clusters)
    if not 1 <= k <= n:
        raise ConfigError(f"n_clusters must satisfy 1 <= K <= {n}, got {k}")
    rng = np.random.default_rng(seed)

    # k-means++ seeding
    centroids = np.empty((k, x.shape[1]))
    centroids[0] = x[rng.integers(n)]
    closest = np.sum((x - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            centroids[c] = x[rng.integers(n)]
        else:
            centroids[c] = x[rng.choice(n, p=closest / total)]
        closest = np.minimum(closest, np.sum((x - centroids[c]) ** 2, axis=1))

    assignments = None
    previous_inertia = np.inf
    for _ in range(int(max_iters)):
        d2 = (
            np.einsum("ij,ij->i", x, x)[:, None]
            + np.einsum("ij,ij->i", centroids, centroids)[None, :]
            - 2.0 * x @ centroids.T
        )
        new_assignments = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new_assignments == c):
                dist = np.maximum(d2[np.arange(n), new_assignments], 0.0)
                farthest = int(np.argmax(dist))
                centroids[c] = x[farthest]
                new_assignments[farthest] = c
        inertia = _inertia(x, centroids, new_assignments)
        if inertia > previous_inertia + 1e-9 * max(1.0, previous_inertia):
            raise NumericalError(
                f"k-means inertia increased: {previous_inertia} -> {inertia}"
            )
        previous_inertia = inertia
        if assignments is not None and np.array_equal(new_assignments, assignments):
            break
        assignments = new_assignments
        for c in range(k):
            members = x[assignments == c]
            if members.shape[0]:
                centroids[c] = members.mean(axis=0)
    return assignments, centroids


def cluster_proportions(assignments, n_clusters: int) -> np.ndarray:
    """Normalized histogram of cluster assignments (a simplex vector)."""
    a = np.asarray(assignments).astype(int)
    k = int(n_clusters)
    if a.size == 0:
        raise ConfigError("no assignments to summarize")
    if np.any((a < 0) | (a >= k)):
        raise DataError("assignment index out of range")
    return np.bincount(a, minlength=k) / a.size


# ---------------------------------------------------------------------------
# evaluation

def stratified_split(labels, test_fraction: float, seed: int):
    """Deterministic per-class shuffle split; returns (train_idx, test_idx).

    Every class contributes at least one test row and keeps at least one
    training row.
    """
    y = np.asarray(labels).astype(int).ravel()
    if not 0.0 < float(test_fraction) < 1.0:
        raise ConfigError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.shape[0] < 2:
            raise ConfigError(f"class {cls} has fewer than 2 members; cannot split")
        perm = members[rng.permutation(members.shape[0])]
        n_test = int(round(test_fraction * members.shape[0]))
        n_test = min(max(n_test, 1), members.shape[0] - 1)
        test_idx.append(perm[:n_test])
        train_idx.append(perm[n_test:])
    return np.sort(np.concatenate(train_idx)), np.sort(np.concatenate(test_idx))


def _kfold_indices(labels, folds: int, seed: int):
    y = np.asarray(labels).astype(int).ravel()
    k = int(folds)
    if k < 2:
        raise ConfigError(f"need at least 2 folds, got {k}")
    rng = np.random.default_rng(seed)
    fold_of = np.empty(y.shape[0], dtype=int)
    for cls in np.unique(y):
        members = np.flatnonzero(y == cls)
        if members.shape[0] < k:
            raise ConfigError(f"class {cls} has {members.shape[0]} members < {k} folds")
        perm = members[rng.permutation(members.shape[0])]
        fold_of[perm] = np.arange(perm.shape[0]) % k
    return fold_of


def _fit_predict(model_spec: dict, train_x, train_y, test_x):
    spec = dict(model_spec)
    name = spec.get("model", "knn")
    if spec.get("standardize", True):
        mean, scale = standardize_fit(train_x)
        train_x = standardize_apply(train_x, mean, scale)
        test_x = standardize_apply(test_x, mean, scale)
    pca_r = spec.get("pca")
    if pca_r:
        pca_r = min(int(pca_r), min(train_x.shape))
        model = pca_fit(train_x, pca_r)
        train_x = pca_transform(model, train_x)
        test_x = pca_transform(model, test_x)
        if spec.get("pca_whiten"):
            # unit variance per kept component, so the classifier metric
            # does not defer to the high-variance directions
            w = np.sqrt(np.maximum(model.explained_variance, 1e-12))
            train_x = train_x / w
            test_x = test_x / w
    if name == "knn":
        return knn_fit_predict(train_x, train_y, int(spec.get("k", 5)), test_x)
    if name == "tree":
        tree = tree_fit(
            train_x, train_y,
            max_depth=int(spec.get("max_depth", 5)),
            min_leaf=int(spec.get("min_leaf", 2)),
        )
        return tree_predict(tree, test_x)
    raise ConfigError(f"unknown model {name!r}")


def evaluate(
    features,
    labels,
    model_spec: dict,
    split_seed: int,
    test_fraction: float | None = None,
    folds: int | None = None,
) -> dict:
    """Accuracy of a model spec under a seeded stratified split or k-fold.

    ``model_spec`` is a plain dict: {"model": "knn"|"tree", plus
    hyperparameters, optional "pca": r, "standardize": bool}.  The report
    carries the full configuration for reproducibility.
    """
    x, y = _check_xy(features, labels)
    if np.unique(y).shape[0] < 2:
        raise ConfigError("evaluation needs at least 2 classes")
    if (test_fraction is None) == (folds is None):
        raise ConfigError("specify exactly one of test_fraction or folds")

    per_class: dict = {}

    def tally(true, pred):
        for cls in np.unique(true):
            mask = true == cls
            entry = per_class.setdefault(int(cls), {"n_test": 0, "correct": 0})
            entry["n_test"] += int(mask.sum())
            entry["correct"] += int((pred[mask] == cls).sum())

    if folds is None:
        train_idx, test_idx = stratified_split(y, test_fraction, split_seed)
        pred = _fit_predict(model_spec, x[train_idx], y[train_idx], x[test_idx])
        tally(y[test_idx], pred)
        n_train, n_test = train_idx.shape[0], test_idx.shape[0]
        correct = int((pred == y[test_idx]).sum())
        split_info = {"test_fraction": float(test_fraction)}
    else:
        fold_of = _kfold_indices(y, folds, split_seed)
        correct, n_test = 0, 0
        for fold in range(int(folds)):
            test_mask = fold_of == fold
            pred = _fit_predict(model_spec, x[~test_mask], y[~test_mask], x[test_mask])
            tally(y[test_mask], pred)
            correct += int((pred == y[test_mask]).sum())
            n_test += int(test_mask.sum())
        n_train = x.shape[0] - x.shape[0] // int(folds)  # typical fold complement
        split_info = {"folds": int(folds)}

    return {
        "accuracy": correct / n_test,
        "n_train": int(n_train),
        "n_test": int(n_test),
        "model": dict(model_spec),
        "seed": int(split_seed),
        "split": split_info,
        "per_class": per_class,
    }
