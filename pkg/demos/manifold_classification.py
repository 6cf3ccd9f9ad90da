"""Telling point clouds apart by their scattering signatures.

Each cloud is summarized by concatenating the scattering moments of a few
random one-hot probe signals; a nearest-neighbor vote then classifies
whole clouds.  Two contrasts are shown:

  * spheres of radius 1.0 vs 1.5 through the fixed-bandwidth spectral
    backend, which sees absolute scale and separates them perfectly;

  * the same task through the adaptive-kernel Markov backend, which is
    exactly invariant under global rescaling (per-point bandwidths scale
    with the data), so the two classes are statistically identical and
    accuracy sits at chance.  This invariance is a feature for
    density-robust analysis and a blind spot for size discrimination -
    pick the backend to match the question.
"""

import numpy as np

from ptscatter.datasets import sample_sphere
from ptscatter.graph import PointCloud
from ptscatter.learn import knn_fit_predict
from ptscatter.operators import build_backend
from ptscatter.scattering import ScatteringConfig, dirac_signals, manifold_embedding

CLOUDS_PER_CLASS = 10
POINTS = 100
PROBES = 8


def embed(cloud, backend_kind, probe_seed):
    config = ScatteringConfig(
        max_scale=8, max_moment=4, max_path_order=3, backend_kind=backend_kind
    )
    if backend_kind == "markov":
        backend, _ = build_backend(cloud, "markov", "adaptive", knn=3)
    else:
        backend, _ = build_backend(cloud, "spectral", "gaussian", kappa=50, eps_const=0.5)
    probes = dirac_signals(cloud.n_points, PROBES, seed=probe_seed)
    return manifold_embedding(backend, config, probes, mode="concat").values


def leave_one_out(features, labels):
    hits = 0
    for i in range(labels.shape[0]):
        mask = np.arange(labels.shape[0]) != i
        pred = knn_fit_predict(features[mask], labels[mask], 1, features[i][None, :])
        hits += int(pred[0] == labels[i])
    return hits / labels.shape[0]


for backend_kind in ("spectral", "markov"):
    features, labels = [], []
    for cls, (radius, seed0) in enumerate([(1.0, 0), (1.5, 100)]):
        for i in range(CLOUDS_PER_CLASS):
            base = sample_sphere(POINTS, seed=seed0 + i)
            cloud = PointCloud(radius * base.coords, intrinsic_dim=2)
            features.append(embed(cloud, backend_kind, probe_seed=seed0 + i + 1000))
            labels.append(cls)
    accuracy = leave_one_out(np.vstack(features), np.array(labels))
    print(f"radius 1.0 vs 1.5, {backend_kind:8s} backend: leave-one-out accuracy {accuracy:.2f}")

print()
print("the markov/adaptive number is not a bug: rescaling a cloud rescales every")
print("neighbor distance by the same factor, the kernel ratios cancel, and the")
print("features come out bit-for-bit identical - verify:")
base = sample_sphere(POINTS, seed=5)
small = PointCloud(base.coords, intrinsic_dim=2)
large = PointCloud(1.5 * base.coords, intrinsic_dim=2)
gap = np.max(np.abs(embed(small, "markov", 7) - embed(large, "markov", 7)))
print(f"max |feature difference| between a cloud and its 1.5x copy: {gap:.1e}")
