"""End-to-end CLI tests: exit codes, determinism, pipeline behaviour."""

import json
from pathlib import Path

import numpy as np
import pytest

from latentmc import fileio
from latentmc.cli import main
from latentmc.forward_model import psnr


def write_image(path, values):
    return fileio.write_vector_csv(path, np.asarray(values, float), header="pixel")


def manifest_without_wall_time(path):
    data = json.loads(Path(path).read_text())
    data.pop("wall_time_seconds", None)
    return data


def tree_bytes(root):
    """Map of relative path -> file bytes, excluding the run manifest."""
    out = {}
    for p in sorted(Path(root).rglob("*")):
        if p.is_file() and p.name != "run_manifest.json":
            out[str(p.relative_to(root))] = p.read_bytes()
    return out


class TestExitCodes:
    def test_unknown_flag_is_usage_error(self, tmp_path, capsys):
        code = main(["simulate", "--no-such-flag"])
        assert code == 1

    def test_missing_input_path_is_usage_error(self, tmp_path):
        # referenced paths are checked up front, before any work happens
        code = main([
            "sample", "--y", str(tmp_path / "missing.csv"), "--decoder",
            "parabola", "--out", str(tmp_path / "out"),
        ])
        assert code == 1
        assert not (tmp_path / "out").exists()

    def test_out_required_without_env(self, tmp_path, monkeypatch):
        monkeypatch.delenv("LATENTMC_OUT", raising=False)
        img = write_image(tmp_path / "x.csv", [0.1, 0.2])
        code = main(["simulate", "--image", str(img)])
        assert code == 1

    def test_out_from_environment(self, tmp_path, monkeypatch):
        monkeypatch.setenv("LATENTMC_OUT", str(tmp_path / "envout"))
        img = write_image(tmp_path / "x.csv", [0.1, 0.2])
        assert main(["simulate", "--image", str(img)]) == 0
        assert (tmp_path / "envout" / "y.csv").exists()


class TestSimulate:
    def test_rerun_bit_identical(self, tmp_path):
        img = write_image(tmp_path / "x.csv", [0.3, 0.8])
        for name in ("a", "b"):
            assert main([
                "simulate", "--image", str(img), "--op", "denoise",
                "--sigma", "0.25", "--seed", "1", "--out", str(tmp_path / name),
            ]) == 0
        assert (tmp_path / "a/y.csv").read_bytes() == (tmp_path / "b/y.csv").read_bytes()
        assert (tmp_path / "a/y.json").read_bytes() == (tmp_path / "b/y.json").read_bytes()

    def test_inpaint_sidecar_has_mask(self, tmp_path):
        img = write_image(tmp_path / "x.csv", np.linspace(0, 1, 16))
        assert main([
            "simulate", "--image", str(img), "--op", "inpaint",
            "--keep-fraction", "0.25", "--seed", "2", "--out", str(tmp_path / "o"),
        ]) == 0
        meta = json.loads((tmp_path / "o/y.json").read_text())
        assert meta["operator"]["kind"] == "mask"
        assert len(meta["operator"]["kept_indices"]) == 4


class TestSampleAndEstimate:
    @pytest.fixture
    def observed(self, tmp_path):
        img = write_image(tmp_path / "x.csv", [0.5, 0.25])
        main(["simulate", "--image", str(img), "--op", "denoise", "--sigma",
              "0.1", "--seed", "3", "--out", str(tmp_path / "obs")])
        return tmp_path, img

    def test_traces_and_manifest(self, observed):
        tmp_path, _ = observed
        assert main([
            "sample", "--y", str(tmp_path / "obs/y.csv"), "--decoder", "parabola",
            "--chains", "3", "--ladder", "linear", "--samples", "1000",
            "--burn-in", "200", "--seed", "4", "--out", str(tmp_path / "run"),
        ]) == 0
        assert sorted(p.name for p in (tmp_path / "run").glob("trace_*.csv")) == [
            "trace_00.csv", "trace_01.csv", "trace_02.csv",
        ]
        manifest = json.loads((tmp_path / "run/run_manifest.json").read_text())
        assert manifest["run"]["temperatures"] == [0.0, 0.5, 1.0]
        assert "wall_time_seconds" in manifest
        assert manifest["version"].startswith("latentmc")

    def test_estimate_beats_observation_psnr(self, tmp_path):
        # conjugate affine setup: the MMSE estimate denoises the observation
        rng = np.random.default_rng(0)
        truth = rng.uniform(0.2, 0.8, 9)
        img = write_image(tmp_path / "x.csv", truth)
        main(["simulate", "--image", str(img), "--op", "denoise", "--sigma",
              "0.35", "--seed", "5", "--out", str(tmp_path / "obs")])
        main([
            "sample", "--y", str(tmp_path / "obs/y.csv"), "--decoder",
            "identity:9", "--chains", "1", "--ladder", "explicit:1.0",
            "--samples", "20000", "--burn-in", "2000", "--beta0", "0.3",
            "--seed", "6", "--out", str(tmp_path / "run"),
        ])
        assert main([
            "estimate", "--trace", str(tmp_path / "run"), "--decoder",
            "identity:9", "--truth", str(img), "--pca",
            "--out", str(tmp_path / "est"),
        ]) == 0
        mmse = fileio.read_vector_csv(tmp_path / "est/mmse.csv")
        y = fileio.read_vector_csv(tmp_path / "obs/y.csv")
        assert psnr(mmse, truth) > psnr(y, truth)
        # square image: PGM exports plus the decoded uncertainty-map grid
        assert (tmp_path / "est/mmse.pgm").exists()
        assert len(list((tmp_path / "est/pca_grid").glob("grid_*.pgm"))) == 25

    def test_estimate_writes_pgm_and_pca(self, observed):
        tmp_path, _ = observed
        main([
            "sample", "--y", str(tmp_path / "obs/y.csv"), "--decoder", "parabola",
            "--chains", "1", "--ladder", "explicit:1.0", "--samples", "500",
            "--burn-in", "100", "--seed", "7", "--out", str(tmp_path / "run2"),
        ])
        assert main([
            "estimate", "--trace", str(tmp_path / "run2"), "--decoder", "parabola",
            "--pca", "--out", str(tmp_path / "est2"),
        ]) == 0
        assert (tmp_path / "est2/pca_eigenvalues.csv").exists()
        assert (tmp_path / "est2/pca_projections.csv").exists()


class TestDeterminismAcrossThreads:
    def test_sample_outputs_identical_at_1_and_3_threads(self, tmp_path):
        img = write_image(tmp_path / "x.csv", [0.4, 0.6])
        main(["simulate", "--image", str(img), "--op", "denoise", "--sigma",
              "0.2", "--seed", "8", "--out", str(tmp_path / "obs")])
        for name, threads in (("t1", "1"), ("t1b", "1"), ("t3", "3")):
            assert main([
                "sample", "--y", str(tmp_path / "obs/y.csv"), "--decoder",
                "parabola", "--chains", "3", "--ladder", "linear", "--samples",
                "800", "--burn-in", "150", "--seed", "9", "--threads", threads,
                "--out", str(tmp_path / name),
            ]) == 0
        assert tree_bytes(tmp_path / "t1") == tree_bytes(tmp_path / "t1b")
        assert tree_bytes(tmp_path / "t1") == tree_bytes(tmp_path / "t3")
        a = manifest_without_wall_time(tmp_path / "t1/run_manifest.json")
        b = manifest_without_wall_time(tmp_path / "t1b/run_manifest.json")
        assert {k: v for k, v in a.items() if k != "parameters"} == \
               {k: v for k, v in b.items() if k != "parameters"}


class TestEvidenceCommand:
    def test_evidence_json_and_report(self, tmp_path):
        img = write_image(tmp_path / "x.csv", [0.0])
        main(["simulate", "--image", str(img), "--op", "denoise", "--sigma",
              "1.0", "--seed", "10", "--out", str(tmp_path / "obs")])
        assert main([
            "evidence", "--y", str(tmp_path / "obs/y.csv"), "--decoder",
            "identity:1", "--chains", "6", "--ladder", "power5", "--samples",
            "3000", "--burn-in", "500", "--iid-t0", "--seed", "11",
            "--out", str(tmp_path / "ev"),
        ]) == 0
        summary = json.loads((tmp_path / "ev/evidence.json").read_text())
        assert np.isfinite(summary["log_evidence"])
        report = fileio.read_matrix_csv(tmp_path / "ev/evidence_report.csv")
        assert report.shape == (6, 3)

    def test_reference_decision(self, tmp_path):
        from latentmc.evidence import ReferenceDistribution

        ref = ReferenceDistribution(np.linspace(-3.0, -1.0, 50))
        ref_path = ref.save(tmp_path / "ref.csv")
        img = write_image(tmp_path / "x.csv", [5.0])  # far-off observation
        main(["simulate", "--image", str(img), "--op", "denoise", "--sigma",
              "0.1", "--seed", "12", "--out", str(tmp_path / "obs")])
        assert main([
            "evidence", "--y", str(tmp_path / "obs/y.csv"), "--decoder",
            "identity:1", "--chains", "6", "--ladder", "power5", "--samples",
            "2000", "--burn-in", "400", "--iid-t0", "--reference", str(ref_path),
            "--seed", "13", "--out", str(tmp_path / "ev2"),
        ]) == 0
        summary = json.loads((tmp_path / "ev2/evidence.json").read_text())
        assert summary["misspecification_decision"] == "rejected"


class TestDemoCommand:
    def test_rosenbrock_demo_outputs(self, tmp_path):
        assert main([
            "rosenbrock-demo", "--seed", "7", "--out", str(tmp_path / "demo"),
        ]) == 0
        names = {p.name for p in (tmp_path / "demo").iterdir()}
        assert {"trace_single.csv", "trace_pt_00.csv", "trace_pt_01.csv",
                "trace_pt_02.csv", "pushforward_scatter.csv",
                "rosenbrock_density.csv", "run_manifest.json"} <= names
        manifest = json.loads((tmp_path / "demo/run_manifest.json").read_text())
        assert manifest["single_chain_dominant_fraction"] == 0.0
        assert manifest["tempered_final500_dominant_fraction"] >= 0.5
        assert manifest["ladder"] == [0.0, 0.5, 1.0]


class TestModelChecks:
    def test_lipschitz_command(self, tmp_path):
        assert main([
            "lipschitz", "--decoder", "identity:4", "--out", str(tmp_path / "lip"),
        ]) == 0
        result = json.loads((tmp_path / "lip/lipschitz.json").read_text())
        assert result["lipschitz_upper_bound"] == pytest.approx(1.0, abs=1e-6)

    def test_check_model_command(self, tmp_path):
        assert main([
            "check-model", "--decoder", "identity:2", "--sigma", "1.0",
            "--out", str(tmp_path / "chk"),
        ]) == 0
        report = json.loads((tmp_path / "chk/wellposedness.json").read_text())
        assert report["C6_uniform_bound"] == pytest.approx(1.0 / (2 * np.pi))
        assert report["weak_well_posed"]

    def test_dim_check_command(self, tmp_path):
        rng = np.random.default_rng(5)
        means = rng.standard_normal((500, 4))
        means[:, 3] *= 0.01
        logvars = np.full((500, 4), -2.0)
        header = ",".join(f"mu_{i+1}" for i in range(4)) + "," + \
                 ",".join(f"logvar_{i+1}" for i in range(4))
        enc_path = fileio.write_matrix_csv(
            tmp_path / "enc.csv", np.hstack([means, logvars]), header
        )
        assert main([
            "dim-check", "--encodings", str(enc_path), "--out", str(tmp_path / "dim"),
        ]) == 0
        result = json.loads((tmp_path / "dim/dim_check.json").read_text())
        assert result["latent_dim"] == 4
        assert result["redundancy_flagged"] is True
        assert result["per_dim_variances"][3] < 0.01


class TestDecodeCommand:
    def test_decode_parabola(self, tmp_path):
        latents = fileio.write_matrix_csv(tmp_path / "z.csv",
                                          np.array([[0.0], [2.0]]), "z_1")
        assert main([
            "decode", "--decoder", "parabola", "--latents", str(latents),
            "--out", str(tmp_path / "dec"),
        ]) == 0
        images = fileio.read_matrix_csv(tmp_path / "dec/decoded.csv")
        np.testing.assert_array_equal(images, [[0.0, 0.0], [2.0, 4.0]])


class TestBatchPsnr:
    def test_empty_dataset_usage_error(self, tmp_path):
        (tmp_path / "empty").mkdir()
        code = main([
            "batch-psnr", "--dataset", str(tmp_path / "empty"), "--decoder",
            "parabola", "--out", str(tmp_path / "bp"),
        ])
        assert code == 1

    def test_small_batch_runs(self, tmp_path):
        data = tmp_path / "data"
        data.mkdir()
        rng = np.random.default_rng(3)
        for i in range(3):
            z = rng.standard_normal()
            write_image(data / f"img_{i}.csv", [z, z * z])
        for name in ("bp2", "bp2_rerun"):
            assert main([
                "batch-psnr", "--dataset", str(data), "--decoder", "parabola",
                "--op", "denoise", "--sigma", "0.1", "--chains", "1", "--ladder",
                "explicit:1.0", "--samples", "2000", "--burn-in", "400",
                "--seed", "14", "--out", str(tmp_path / name),
            ]) == 0
        summary = json.loads((tmp_path / "bp2/summary.json").read_text())
        assert summary["n_images"] == 3 and summary["n_skipped"] == 0
        rows = (tmp_path / "bp2/per_image_psnr.csv").read_text().splitlines()
        assert len(rows) == 4  # header + 3 images
        # per-image derived seeds: rerun reproduces every PSNR bit for bit
        assert (tmp_path / "bp2/per_image_psnr.csv").read_bytes() == \
               (tmp_path / "bp2_rerun/per_image_psnr.csv").read_bytes()

    def test_unreadable_images_skipped_and_flagged(self, tmp_path):
        data = tmp_path / "data2"
        data.mkdir()
        write_image(data / "good.csv", [0.5, 0.25])
        (data / "bad.csv").write_text("pixel\nnot-a-number\n")
        code = main([
            "batch-psnr", "--dataset", str(data), "--decoder", "parabola",
            "--op", "denoise", "--sigma", "0.1", "--chains", "1", "--ladder",
            "explicit:1.0", "--samples", "500", "--burn-in", "100",
            "--seed", "15", "--out", str(tmp_path / "bp3"),
        ])
        assert code == 2  # > 1% skipped
        summary = json.loads((tmp_path / "bp3/summary.json").read_text())
        assert summary["n_skipped"] == 1
