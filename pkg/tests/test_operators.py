import numpy as np
import pytest
import scipy.sparse

from ptscatter.errors import ConfigError, DataError
from ptscatter.graph import AffinityGraph, PointCloud, adaptive_affinity, gaussian_affinity
from ptscatter.operators import (
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

from oracles import dense_heat_matrix, markov_sequential_apply

E1 = np.exp(-1.0)


def two_point_graph():
    w = np.array([[1.0, E1], [E1, 1.0]])
    return AffinityGraph(weights=w, degrees=w.sum(axis=1), kernel="gaussian", bandwidth=1.0)


def random_graph(rng, n=9):
    cloud = PointCloud(rng.standard_normal((n, 3)), intrinsic_dim=2)
    return adaptive_affinity(cloud, 3)


class TestEpsilonRule:
    def test_single_point_returns_constant(self):
        assert epsilon_rule(1, 7, 3.5) == pytest.approx(3.5)

    def test_known_value(self):
        assert epsilon_rule(1024, 2, 1.0) == pytest.approx(1024 ** (-0.25), abs=1e-15)
        assert epsilon_rule(1024, 2, 1.0) == pytest.approx(0.17677669529663687)

    def test_strictly_decreasing_in_n(self):
        values = [epsilon_rule(n, 3, 1.7) for n in [10, 50, 100, 1000, 5000]]
        assert all(a > b for a, b in zip(values, values[1:]))

    def test_validation(self):
        with pytest.raises(ConfigError):
            epsilon_rule(0, 2, 1.0)
        with pytest.raises(ConfigError):
            epsilon_rule(10, 2, 0.0)


class TestBuildLaplacian:
    def test_two_point_example(self):
        lap = build_laplacian(two_point_graph(), 1.0)
        expected = 0.5 * np.array([[E1, -E1], [-E1, E1]])
        assert np.allclose(lap.matrix, expected, atol=1e-15)

    def test_kills_constants(self, rng):
        graph = random_graph(rng)
        lap = build_laplacian(graph, 0.3)
        assert np.max(np.abs(lap.matrix @ np.ones(graph.n_points))) <= 1e-10

    def test_two_point_eigenvalues(self):
        lap = build_laplacian(two_point_graph(), 1.0)
        vals = np.linalg.eigvalsh(lap.matrix)
        assert np.allclose(np.sort(vals), [0.0, E1], atol=1e-12)

    def test_eigenvalues_scale_with_normalization(self, rng):
        graph = random_graph(rng)
        v1 = np.linalg.eigvalsh(build_laplacian(graph, 1.0).matrix)
        v2 = np.linalg.eigvalsh(build_laplacian(graph, 2.0).matrix)
        assert np.allclose(v1, 2.0 * v2, atol=1e-10)

    def test_psd(self, rng):
        lap = build_laplacian(random_graph(rng), 0.5).matrix
        for _ in range(20):
            v = rng.standard_normal(lap.shape[0])
            assert v @ lap @ v >= -1e-10


class TestSmallestEigs:
    def test_two_point_example(self):
        op = smallest_eigs(build_laplacian(two_point_graph(), 1.0), 2)
        assert np.allclose(op.eigenvalues, [0.0, E1], atol=1e-12)
        assert np.allclose(np.abs(op.eigenvectors[:, 0]), 1.0 / np.sqrt(2.0), atol=1e-12)

    def test_kernel_vector_is_constant(self, rng):
        op = smallest_eigs(build_laplacian(random_graph(rng), 1.0), 1)
        assert op.eigenvalues[0] <= 1e-8
        u0 = op.eigenvectors[:, 0]
        assert np.allclose(np.abs(u0), np.abs(u0[0]), atol=1e-8)

    def test_matches_full_decomposition_oracle(self, rng):
        graph = random_graph(rng, n=12)
        lap = build_laplacian(graph, 0.8)
        op = smallest_eigs(lap, 5)
        vals, vecs = np.linalg.eigh(lap.matrix)
        assert np.allclose(op.eigenvalues, vals[:5], atol=1e-8)
        for k in range(5):
            overlap = abs(float(op.eigenvectors[:, k] @ vecs[:, k]))
            assert overlap == pytest.approx(1.0, abs=1e-6)

    def test_orthonormal_columns(self, rng):
        op = smallest_eigs(build_laplacian(random_graph(rng, n=15), 1.0), 8)
        gram = op.eigenvectors.T @ op.eigenvectors
        assert np.max(np.abs(gram - np.eye(8))) <= 1e-10

    def test_residual_bound(self, rng):
        lap = build_laplacian(random_graph(rng, n=15), 1.0)
        op = smallest_eigs(lap, 15)
        res = lap.matrix @ op.eigenvectors - op.eigenvectors * op.eigenvalues
        assert np.max(np.linalg.norm(res, axis=0)) <= 1e-8

    def test_sign_convention_reproducible(self, rng):
        lap = build_laplacian(random_graph(rng, n=10), 1.0)
        a = smallest_eigs(lap, 6)
        b = smallest_eigs(lap, 6)
        assert np.array_equal(a.eigenvectors, b.eigenvectors)
        idx = np.argmax(np.abs(a.eigenvectors), axis=0)
        assert np.all(a.eigenvectors[idx, np.arange(6)] > 0.0)

    def test_count_out_of_range(self, rng):
        lap = build_laplacian(random_graph(rng), 1.0)
        with pytest.raises(ConfigError):
            smallest_eigs(lap, 0)
        with pytest.raises(ConfigError):
            smallest_eigs(lap, lap.n_points + 1)

    def test_permutation_equivariance(self, rng):
        graph = random_graph(rng, n=11)
        perm = rng.permutation(11)
        w = graph.weights[np.ix_(perm, perm)]
        permuted = AffinityGraph(w, w.sum(axis=1), kernel="adaptive", n_neighbors=3)
        op = smallest_eigs(build_laplacian(graph, 1.0), 4)
        op_p = smallest_eigs(build_laplacian(permuted, 1.0), 4)
        assert np.allclose(op.eigenvalues, op_p.eigenvalues, atol=1e-10)


class TestHeatApplySpectral:
    def test_time_zero_full_spectrum_is_identity(self, rng):
        lap = build_laplacian(random_graph(rng, n=8), 1.0)
        op = smallest_eigs(lap, 8)
        f = rng.standard_normal(8)
        assert np.allclose(heat_apply_spectral(op, 0.0, f), f, atol=1e-10)

    def test_eigenvector_input(self, rng):
        op = smallest_eigs(build_laplacian(random_graph(rng, n=8), 1.0), 4)
        u1 = op.eigenvectors[:, 1]
        out = heat_apply_spectral(op, 2.5, u1)
        assert np.allclose(out, np.exp(-op.eigenvalues[1] * 2.5) * u1, atol=1e-12)

    def test_matches_dense_assembly_oracle(self, rng):
        lap = build_laplacian(random_graph(rng, n=6), 1.0)
        op = smallest_eigs(lap, 6)
        dense = dense_heat_matrix(op.eigenvalues, op.eigenvectors, 3.0)
        f = rng.standard_normal(6)
        assert np.allclose(heat_apply_spectral(op, 3.0, f), dense @ f, atol=1e-10)

    def test_contraction(self, rng):
        op = smallest_eigs(build_laplacian(random_graph(rng, n=10), 1.0), 10)
        for _ in range(10):
            f = rng.standard_normal(10)
            t = float(rng.uniform(0.0, 4.0))
            assert np.linalg.norm(heat_apply_spectral(op, t, f)) <= np.linalg.norm(f) + 1e-12

    def test_semigroup_full_spectrum(self, rng):
        op = smallest_eigs(build_laplacian(random_graph(rng, n=10), 1.0), 10)
        for _ in range(10):
            f = rng.standard_normal(10)
            t, s = rng.uniform(0.0, 4.0, size=2)
            lhs = heat_apply_spectral(op, t, heat_apply_spectral(op, s, f))
            rhs = heat_apply_spectral(op, t + s, f)
            assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(f)

    def test_validation(self, rng):
        op = smallest_eigs(build_laplacian(random_graph(rng, n=8), 1.0), 4)
        with pytest.raises(ConfigError):
            heat_apply_spectral(op, -1.0, np.ones(8))
        with pytest.raises(DataError):
            heat_apply_spectral(op, 1.0, np.ones(5))


class TestMarkovOperator:
    def test_two_point_example(self):
        op = markov_operator(two_point_graph())
        expected = np.array([[1.0, E1], [E1, 1.0]]) / (1.0 + E1)
        assert np.allclose(op.matrix, expected, atol=1e-15)
        assert np.allclose(op.matrix.sum(axis=1), 1.0, atol=1e-12)

    def test_stochastic_fixed_point(self, rng):
        op = markov_operator(random_graph(rng))
        ones = np.ones(op.n_points)
        assert np.allclose(op.matrix @ ones, ones, atol=1e-12)

    def test_matches_division_oracle(self, rng):
        graph = random_graph(rng, n=9)
        op = markov_operator(graph)
        expected = np.array(
            [[graph.weights[i, j] / graph.degrees[i] for j in range(9)] for i in range(9)]
        )
        assert np.max(np.abs(op.matrix - expected)) <= 1e-14

    def test_maximum_principle(self, rng):
        op = markov_operator(random_graph(rng))
        for _ in range(10):
            f = rng.standard_normal(op.n_points) * 10
            assert np.max(np.abs(op.matrix @ f)) <= np.max(np.abs(f)) + 1e-12

    def test_permutation_conjugation(self, rng):
        graph = random_graph(rng, n=7)
        perm = rng.permutation(7)
        w = graph.weights[np.ix_(perm, perm)]
        permuted = AffinityGraph(w, w.sum(axis=1), kernel="adaptive", n_neighbors=3)
        p1 = markov_operator(graph).matrix
        p2 = markov_operator(permuted).matrix
        assert np.allclose(p1[np.ix_(perm, perm)], p2, atol=1e-14)


class TestMarkovDyadicApply:
    def test_identity_matrix(self):
        w = np.eye(4)
        graph = AffinityGraph(w, w.sum(axis=1), kernel="gaussian", bandwidth=1.0)
        op = markov_operator(graph)
        f = np.array([1.0, -2.0, 3.0, 0.5])
        for j in range(5):
            assert np.array_equal(markov_dyadic_apply(op, j, f), f)

    def test_ones_invariant(self, rng):
        op = markov_operator(random_graph(rng))
        ones = np.ones(op.n_points)
        for j in range(4):
            assert np.allclose(markov_dyadic_apply(op, j, ones), ones, atol=1e-10)

    def test_matches_sequential_oracle(self, rng):
        cloud = PointCloud(rng.standard_normal((5, 2)), intrinsic_dim=1)
        op = markov_operator(adaptive_affinity(cloud, 2))
        f = rng.standard_normal(5)
        out = markov_dyadic_apply(op, 3, f)
        assert np.allclose(out, markov_sequential_apply(op.matrix, 8, f), atol=1e-10)

    def test_uncached_path_matches_cached(self, rng, monkeypatch):
        graph = random_graph(rng, n=8)
        cached = markov_operator(graph)
        uncached = markov_operator(graph)
        monkeypatch.setattr(
            type(uncached), "uses_cache", property(lambda self: False)
        )
        f = rng.standard_normal(8)
        for j in range(5):
            assert np.allclose(
                markov_dyadic_apply(cached, j, f),
                markov_dyadic_apply(uncached, j, f),
                atol=1e-10,
            )

    def test_validation(self, rng):
        op = markov_operator(random_graph(rng))
        with pytest.raises(ConfigError):
            markov_dyadic_apply(op, -1, np.ones(op.n_points))
        with pytest.raises(DataError):
            markov_dyadic_apply(op, 1, np.ones(op.n_points + 2))


class TestSparsify:
    def test_zero_threshold_is_noop(self, rng):
        op = markov_operator(random_graph(rng))
        out = sparsify(op, 0.0)
        assert np.array_equal(out.matrix, op.matrix)

    def test_permutation_matrix_unchanged(self):
        w = np.eye(5)[::-1].copy()  # anti-diagonal permutation
        graph = AffinityGraph(w, w.sum(axis=1), kernel="gaussian", bandwidth=1.0)
        op = markov_operator(graph)
        out = sparsify(op, 0.99)
        assert np.allclose(np.asarray(out.matrix.todense()), w, atol=1e-15)

    def test_row_stochastic_and_close(self, rng):
        op = markov_operator(random_graph(rng, n=12))
        theta = 0.01
        out = sparsify(op, theta)
        dense = np.asarray(out.matrix.todense())
        assert np.allclose(dense.sum(axis=1), 1.0, atol=1e-12)
        # each row changes by at most N * theta in L1
        row_gap = np.abs(dense - op.matrix).sum(axis=1)
        assert np.all(row_gap <= 12 * theta + 1e-12)

    def test_keeps_largest_entry_when_row_would_vanish(self):
        w = np.array([[0.6, 0.4], [0.5, 0.5]])
        graph = AffinityGraph(w, w.sum(axis=1), kernel="gaussian", bandwidth=1.0)
        op = markov_operator(graph)
        out = sparsify(op, 0.9)
        dense = np.asarray(out.matrix.todense())
        assert np.allclose(dense, [[1.0, 0.0], [1.0, 0.0]])

    def test_threshold_validation(self, rng):
        op = markov_operator(random_graph(rng))
        with pytest.raises(ConfigError):
            sparsify(op, 1.0)
        with pytest.raises(ConfigError):
            sparsify(op, -0.1)

    def test_sparse_dyadic_apply(self, rng):
        op = sparsify(markov_operator(random_graph(rng, n=10)), 0.05)
        assert scipy.sparse.issparse(op.matrix)
        f = rng.standard_normal(10)
        dense = np.asarray(op.matrix.todense())
        assert np.allclose(
            markov_dyadic_apply(op, 2, f), markov_sequential_apply(dense, 4, f), atol=1e-10
        )


class TestEigenpairIO:
    def test_round_trip(self, rng, tmp_path):
        op = smallest_eigs(build_laplacian(random_graph(rng, n=8), 1.0), 5)
        path = tmp_path / "eigs.json"
        save_eigenpairs(op, path)
        loaded = load_eigenpairs(path)
        assert np.array_equal(loaded.eigenvalues, op.eigenvalues)
        assert np.array_equal(loaded.eigenvectors, op.eigenvectors)

    def test_rejects_garbage(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(DataError):
            load_eigenpairs(path)


class TestBuildBackend:
    def test_gaussian_spectral(self, rng):
        cloud = PointCloud(rng.standard_normal((12, 3)), intrinsic_dim=2)
        op, info = build_backend(cloud, "spectral", "gaussian", kappa=4)
        assert op.order == 4
        assert info["eps"] == pytest.approx(epsilon_rule(12, 2, 2.0))

    def test_adaptive_markov(self, rng):
        cloud = PointCloud(rng.standard_normal((12, 3)), intrinsic_dim=2)
        op, info = build_backend(cloud, "markov", "adaptive", knn=3)
        assert np.allclose(np.asarray(op.matrix).sum(axis=1), 1.0, atol=1e-12)
        assert info["knn"] == 3

    def test_missing_requirements(self, rng):
        cloud = PointCloud(rng.standard_normal((12, 3)), intrinsic_dim=2)
        with pytest.raises(ConfigError):
            build_backend(cloud, "spectral", "gaussian")  # no kappa
        with pytest.raises(ConfigError):
            build_backend(cloud, "markov", "adaptive")  # no knn
        with pytest.raises(ConfigError):
            build_backend(cloud, "markov", "unknown")
