import json
import struct
from pathlib import Path

import numpy as np
import pytest

from ptscatter.cli import main
from ptscatter.datasets import (
    load_labels_csv,
    load_pointcloud_csv,
    load_signals_csv,
    sample_sphere,
    save_pointcloud_csv,
    write_mnist_idx,
)
from ptscatter.operators import load_eigenpairs
from ptscatter.scattering import load_features
from ptscatter.datasets import sphere_spectrum_oracle

DATA = Path(__file__).parent / "data"


def run(*args):
    return main([str(a) for a in args])


class TestGenSphere:
    def test_writes_expected_shape(self, tmp_path):
        out = tmp_path / "pc.csv"
        assert run("gen-sphere", "--n", 642, "--seed", 0, "--out", out) == 0
        cloud = load_pointcloud_csv(out, intrinsic_dim=2)
        assert cloud.coords.shape == (642, 3)

    def test_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a.csv", tmp_path / "b.csv"
        assert run("gen-sphere", "--n", 40, "--seed", 3, "--out", a) == 0
        assert run("gen-sphere", "--n", 40, "--seed", 3, "--out", b) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_invalid_out_path_exit_2(self, tmp_path):
        out = tmp_path / "missing_dir" / "pc.csv"
        assert run("gen-sphere", "--n", 10, "--seed", 0, "--out", out) == 2

    def test_missing_required_flag_exit_2(self, tmp_path):
        assert run("gen-sphere", "--seed", 0, "--out", tmp_path / "x.csv") == 2


@pytest.fixture
def digit_files(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, size=(12, 6, 6), dtype=np.uint8)
    images[3] = 0  # one all-zero digit
    labels = np.arange(12) % 10
    img, lab = tmp_path / "digits.idx", tmp_path / "labels.idx"
    write_mnist_idx(img, lab, images, labels)
    return img, lab


class TestMnistSphere:
    def test_projects_and_writes(self, tmp_path, digit_files):
        img, lab = digit_files
        points = tmp_path / "pc.csv"
        run("gen-sphere", "--n", 80, "--seed", 1, "--out", points)
        sig_out, lab_out = tmp_path / "sig.csv", tmp_path / "lab.csv"
        code = run(
            "mnist-sphere", "--images", img, "--labels", lab, "--points", points,
            "--count", 5, "--seed", 2, "--out-signals", sig_out, "--out-labels", lab_out,
        )
        assert code == 0
        signals = load_signals_csv(sig_out)
        assert signals.shape == (5, 80)
        assert load_labels_csv(lab_out).shape == (5,)

    def test_deterministic(self, tmp_path, digit_files):
        img, lab = digit_files
        points = tmp_path / "pc.csv"
        run("gen-sphere", "--n", 50, "--seed", 1, "--out", points)
        outs = []
        for name in ("s1.csv", "s2.csv"):
            sig_out = tmp_path / name
            run(
                "mnist-sphere", "--images", img, "--labels", lab, "--points", points,
                "--count", 6, "--seed", 9, "--out-signals", sig_out,
                "--out-labels", tmp_path / ("lab_" + name),
            )
            outs.append(sig_out.read_bytes())
        assert outs[0] == outs[1]

    def test_zero_image_gives_zero_row(self, tmp_path, digit_files):
        img, lab = digit_files
        points = tmp_path / "pc.csv"
        run("gen-sphere", "--n", 50, "--seed", 1, "--out", points)
        sig_out = tmp_path / "sig.csv"
        # count = all images so the all-zero one is included
        run(
            "mnist-sphere", "--images", img, "--labels", lab, "--points", points,
            "--count", 12, "--seed", 0, "--out-signals", sig_out,
            "--out-labels", tmp_path / "lo.csv",
        )
        signals = load_signals_csv(sig_out)
        assert np.any(np.all(signals == 0.0, axis=1))

    def test_idx_parse_error_exit_3(self, tmp_path):
        bad = tmp_path / "bad.idx"
        bad.write_bytes(struct.pack(">iiii", 1234, 1, 2, 2) + bytes(4))
        lab = tmp_path / "lab.idx"
        lab.write_bytes(struct.pack(">ii", 2049, 1) + bytes([1]))
        points = tmp_path / "pc.csv"
        run("gen-sphere", "--n", 20, "--seed", 1, "--out", points)
        code = run(
            "mnist-sphere", "--images", bad, "--labels", lab, "--points", points,
            "--count", 1, "--seed", 0, "--out-signals", tmp_path / "s.csv",
            "--out-labels", tmp_path / "l.csv",
        )
        assert code == 3


class TestEigs:
    def test_sphere_spectrum_clusters(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(900, seed=0))
        out = tmp_path / "eigs.json"
        code = run(
            "eigs", "--points", points, "--kappa", 9, "--dim", 2,
            "--eps", "auto", "--eps-const", 0.7, "--out", out,
        )
        assert code == 0
        op = load_eigenpairs(out)
        assert op.eigenvalues[0] <= 1e-8
        oracle = sphere_spectrum_oracle(2)  # (0, 2 x3, 6 x5)
        rel = np.abs(op.eigenvalues[1:] - oracle[1:]) / oracle[1:]
        assert np.all(rel < 0.35)

    def test_kappa_too_large_exit_2(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(30, seed=0))
        assert run(
            "eigs", "--points", points, "--kappa", 31, "--dim", 2, "--out",
            tmp_path / "e.json",
        ) == 2

    def test_round_trip_into_extract(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(40, seed=3))
        eigs = tmp_path / "eigs.json"
        assert run(
            "eigs", "--points", points, "--kappa", 20, "--dim", 2, "--out", eigs
        ) == 0
        signals = tmp_path / "sig.csv"
        rngsig = np.random.default_rng(1).standard_normal((2, 40))
        np.savetxt(signals, rngsig, delimiter=",")
        direct = tmp_path / "direct.json"
        reused = tmp_path / "reused.json"
        common = ["extract", "--points", points, "--signals", signals,
                  "--backend", "spectral", "--kernel", "gaussian", "--dim", "2",
                  "--J", "3", "--Q", "2", "--order", "2", "--kappa", "20"]
        assert run(*common, "--out", direct) == 0
        assert run(*common, "--eigs", eigs, "--out", reused) == 0
        v1, _, _ = load_features(direct)
        v2, _, _ = load_features(reused)
        assert np.max(np.abs(v1 - v2)) <= 1e-12


class TestExtract:
    def test_feature_shape_and_counting(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(30, seed=5))
        signals = tmp_path / "sig.csv"
        np.savetxt(signals, np.random.default_rng(0).standard_normal((10, 30)), delimiter=",")
        out = tmp_path / "f.json"
        code = run(
            "extract", "--points", points, "--signals", signals,
            "--backend", "markov", "--kernel", "adaptive", "--knn", 3,
            "--J", 8, "--Q", 4, "--order", 2, "--out", out,
        )
        assert code == 0
        values, paths, moments = load_features(out)
        assert values.shape == (10, 184)

    def test_backends_share_shape_and_labels(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(25, seed=5))
        signals = tmp_path / "sig.csv"
        np.savetxt(signals, np.random.default_rng(0).standard_normal((3, 25)), delimiter=",")
        results = {}
        for backend in ("markov", "spectral"):
            out = tmp_path / f"{backend}.json"
            assert run(
                "extract", "--points", points, "--signals", signals,
                "--backend", backend, "--kernel", "gaussian", "--dim", 2,
                "--kappa", 25, "--knn", 3, "--J", 4, "--Q", 2, "--order", 2,
                "--out", out,
            ) == 0
            results[backend] = load_features(out)
        assert results["markov"][0].shape == results["spectral"][0].shape
        assert results["markov"][1] == results["spectral"][1]
        assert results["markov"][2] == results["spectral"][2]

    def test_reproduces_committed_golden_file(self, tmp_path):
        with open(DATA / "golden_features.json", "r", encoding="utf-8") as fh:
            golden = json.load(fh)
        out = tmp_path / "f.json"
        code = run(
            "extract", "--points", DATA / "points30.csv",
            "--signals", DATA / "signals30.csv",
            "--backend", "markov", "--kernel", "adaptive", "--knn", 3,
            "--J", 3, "--Q", 2, "--order", 2, "--out", out,
        )
        assert code == 0
        values, paths, moments = load_features(out)
        expected = np.asarray(golden["values"])
        assert values.shape == expected.shape
        assert np.max(np.abs(values - expected)) <= 1e-10
        assert [list(p) for p in paths] == golden["paths"]
        assert list(moments) == golden["q"]

    def test_gaussian_without_dim_exit_2(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(20, seed=5))
        signals = tmp_path / "sig.csv"
        np.savetxt(signals, np.zeros((1, 20)), delimiter=",")
        code = run(
            "extract", "--points", points, "--signals", signals,
            "--backend", "markov", "--kernel", "gaussian",
            "--out", tmp_path / "f.json",
        )
        assert code == 2

    def test_sqrt_with_markov_exit_2(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(20, seed=5))
        signals = tmp_path / "sig.csv"
        np.savetxt(signals, np.zeros((1, 20)), delimiter=",")
        code = run(
            "extract", "--points", points, "--signals", signals,
            "--backend", "markov", "--kernel", "adaptive", "--knn", 3,
            "--wavelets", "sqrt", "--out", tmp_path / "f.json",
        )
        assert code == 2

    def test_csv_output_mode(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(20, seed=5))
        signals = tmp_path / "sig.csv"
        np.savetxt(signals, np.random.default_rng(2).standard_normal((2, 20)), delimiter=",")
        out_json, out_csv = tmp_path / "f.json", tmp_path / "f.csv"
        args = [
            "extract", "--points", points, "--signals", signals,
            "--backend", "markov", "--kernel", "adaptive", "--knn", 3,
            "--J", 3, "--Q", 2, "--order", 2,
        ]
        assert run(*args, "--out", out_json) == 0
        assert run(*args, "--out", out_csv) == 0
        vj, pj, mj = load_features(out_json)
        vc, pc, mc = load_features(out_csv)
        assert np.max(np.abs(vj - vc)) == 0.0
        assert pj == pc and mj == mc

    def test_signal_width_mismatch_exit_3(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(20, seed=5))
        signals = tmp_path / "sig.csv"
        np.savetxt(signals, np.zeros((2, 19)), delimiter=",")
        code = run(
            "extract", "--points", points, "--signals", signals,
            "--backend", "markov", "--kernel", "adaptive", "--knn", 3,
            "--out", tmp_path / "f.json",
        )
        assert code == 3


class TestClassify:
    def test_separable_features_accuracy_one(self, tmp_path):
        features = tmp_path / "f.csv"
        labels = tmp_path / "l.csv"
        rng = np.random.default_rng(0)
        x = np.vstack([rng.standard_normal((20, 4)), rng.standard_normal((20, 4)) + 30])
        header = ",".join(f"S({j})q1" for j in range(4))
        lines = [header] + [",".join(f"{v:.17g}" for v in row) for row in x]
        features.write_text("\n".join(lines) + "\n")
        labels.write_text("\n".join(["0"] * 20 + ["1"] * 20) + "\n")
        out = tmp_path / "report.json"
        code = run(
            "classify", "--features", features, "--labels", labels,
            "--model", "knn", "--knn", 3, "--seed", 1, "--test-frac", 0.25,
            "--out", out,
        )
        assert code == 0
        report = json.loads(out.read_text())
        assert report["accuracy"] == 1.0
        for key in ("accuracy", "n_train", "n_test", "model", "seed", "per_class"):
            assert key in report

    def test_label_count_mismatch_exit_3(self, tmp_path):
        features = tmp_path / "f.csv"
        features.write_text("S()q1\n1.0\n2.0\n")
        labels = tmp_path / "l.csv"
        labels.write_text("0\n1\n0\n")
        assert run(
            "classify", "--features", features, "--labels", labels,
            "--model", "knn", "--out", tmp_path / "r.json",
        ) == 3


class TestConfigFile:
    def test_flags_override_config_file(self, tmp_path):
        points = tmp_path / "pc.csv"
        save_pointcloud_csv(points, sample_sphere(20, seed=5))
        signals = tmp_path / "sig.csv"
        np.savetxt(signals, np.random.default_rng(2).standard_normal((1, 20)), delimiter=",")
        config = tmp_path / "run.cfg"
        config.write_text("J = 2\nQ = 3\nknn = 3\nkernel = adaptive\nbackend = markov\n")
        out = tmp_path / "f.json"
        assert run(
            "extract", "--points", points, "--signals", signals,
            "--config", config, "--Q", 1, "--order", 1, "--out", out,
        ) == 0
        values, paths, moments = load_features(out)
        # J = 2 from file, Q = 1 from flag: 1 + 3 scales, one moment each
        assert values.shape == (1, 4)
        assert max(moments) == 1

    def test_malformed_config_exit_2(self, tmp_path):
        config = tmp_path / "run.cfg"
        config.write_text("this is not a key value line\n")
        assert run(
            "extract", "--points", "x.csv", "--signals", "y.csv",
            "--config", config, "--out", "f.json",
        ) == 2
