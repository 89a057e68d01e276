import json
import shutil
import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from mriexplain import formats
from mriexplain.cli import main
from mriexplain.core import BinaryMask, Heatmap
from mriexplain.segmentation import SegmentationParams, segment_heatmap

FIXTURES = Path(__file__).parent / "fixtures"

PIPELINE_ARGS = [
    "--atlas", str(FIXTURES / "atlas.nii"),
    "--labels", str(FIXTURES / "atlas_labels.csv"),
    "--atlas-slice", "2",
    "--model", "InceptionResNetV2",
    "--predicted-class", "Meningioma",
    "--saliency-method", "GradCAMpp",
    "--confidence", "0.93",
]


def run_cli(args, capsys=None) -> int:
    return main(args)


class TestSegment:
    def test_writes_mask_and_metrics(self, tmp_path, capsys):
        out = tmp_path / "out"
        code = main([
            "segment",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(out),
        ])
        assert code == 0
        metrics = json.loads((out / "segmentation_metrics.json").read_text())
        heatmap = formats.read_heatmap(FIXTURES / "heatmap.npy")
        gt = formats.read_mask(FIXTURES / "gt_mask.png")
        expected = segment_heatmap(heatmap, gt, SegmentationParams())
        assert metrics["alpha_star"] == expected.alpha_star
        assert metrics["dsc"] == pytest.approx(expected.dsc)
        assert metrics["iou"] == pytest.approx(expected.iou)
        assert formats.read_mask(out / "mask.png") == expected.mask
        stdout = capsys.readouterr().out
        assert json.loads(stdout)["alpha_star"] == expected.alpha_star

    def test_missing_file_exit_2_names_path(self, tmp_path, capsys):
        code = main([
            "segment",
            "--heatmap", str(tmp_path / "nope.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(tmp_path),
        ])
        assert code == 2
        err = capsys.readouterr().err
        assert err.startswith("error:")
        assert "nope.npy" in err

    def test_alpha_range_constrains_alpha_star(self, tmp_path):
        out = tmp_path / "out"
        code = main([
            "segment",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(out),
            "--alpha-range", "80:90",
        ])
        assert code == 0
        metrics = json.loads((out / "segmentation_metrics.json").read_text())
        assert 80 <= metrics["alpha_star"] <= 90


class TestRois:
    def test_descriptor_json(self, tmp_path):
        out = tmp_path / "rois.json"
        code = main(["rois", "--mask", str(FIXTURES / "gt_mask.png"), "--out", str(out)])
        assert code == 0
        payload = json.loads(out.read_text())
        assert len(payload) == 1
        assert payload[0]["area"] == 253


class TestMapAtlas:
    def test_coverage_csv(self, tmp_path):
        out = tmp_path / "cov.csv"
        code = main([
            "map-atlas",
            "--mask", str(FIXTURES / "gt_mask.png"),
            "--atlas", str(FIXTURES / "atlas.nii"),
            "--labels", str(FIXTURES / "atlas_labels.csv"),
            "--atlas-slice", "2",
            "--out", str(out),
        ])
        assert code == 0
        lines = out.read_text().splitlines()
        assert lines[0] == "label,region,voxel_count,percentage"
        assert len(lines) > 1

    def test_invalid_slice_exit_2(self, tmp_path, capsys):
        code = main([
            "map-atlas",
            "--mask", str(FIXTURES / "gt_mask.png"),
            "--atlas", str(FIXTURES / "atlas.nii"),
            "--labels", str(FIXTURES / "atlas_labels.csv"),
            "--atlas-slice", "99",
            "--out", str(tmp_path / "cov.csv"),
        ])
        assert code == 2
        assert "--atlas-slice" in capsys.readouterr().err


class TestEvaluateText:
    def test_metrics_json(self, tmp_path):
        report = tmp_path / "r.txt"
        report.write_text("The tumor is here. The tumor is large. It compresses tissue.")
        out = tmp_path / "m.json"
        assert main(["evaluate-text", "--text", str(report), "--out", str(out)]) == 0
        metrics = json.loads(out.read_text())
        assert metrics["n_tokens"] == 11
        assert 0 < metrics["ttr"] <= 1
        assert metrics["cohs"] is not None

    def test_single_sentence_yields_null_cohs(self, tmp_path):
        report = tmp_path / "r.txt"
        report.write_text("Only one sentence here.")
        out = tmp_path / "m.json"
        assert main(["evaluate-text", "--text", str(report), "--out", str(out)]) == 0
        metrics = json.loads(out.read_text())
        assert metrics["cohs"] is None
        assert metrics["fres"] is not None

    def test_corpus_mode_reports_mean_and_sd(self, tmp_path):
        a = tmp_path / "a.txt"
        b = tmp_path / "b.txt"
        a.write_text("The tumor is here. The tumor is large.")
        b.write_text("One region shows overlap. Another region is spared. Review is advised.")
        out = tmp_path / "m.json"
        assert main(["evaluate-text", "--text", str(a), str(b), "--out", str(out)]) == 0
        payload = json.loads(out.read_text())
        assert len(payload["texts"]) == 2
        ttr_values = [t["ttr"] for t in payload["texts"]]
        mean = sum(ttr_values) / 2
        assert payload["summary"]["ttr"]["mean"] == pytest.approx(mean)
        assert payload["summary"]["ttr"]["n"] == 2
        assert payload["summary"]["ttr"]["sd"] is not None


def run_pipeline(tmp_path: Path, name: str, extra=()) -> Path:
    out = tmp_path / name
    code = main([
        "pipeline",
        "--heatmap", str(FIXTURES / "heatmap.npy"),
        "--gt-mask", str(FIXTURES / "gt_mask.png"),
        "--out-dir", str(out),
        "--image-id", "sample-001",
        "--atlas-id", "test-atlas",
        *PIPELINE_ARGS,
        *extra,
    ])
    assert code == 0
    return out


class TestPipeline:
    def test_offline_writes_six_artifacts_and_manifest(self, tmp_path):
        out = run_pipeline(tmp_path, "run1", ("--offline",))
        names = sorted(p.name for p in out.iterdir())
        assert names == [
            "coverage.csv",
            "findings.json",
            "manifest.json",
            "mask.png",
            "overlay.png",
            "report.txt",
            "report_metrics.json",
        ]
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["artifacts"]) == 6
        for entry in manifest["artifacts"]:
            assert len(entry["sha256"]) == 64

    def test_offline_runs_are_byte_identical(self, tmp_path):
        out1 = run_pipeline(tmp_path, "run1", ("--offline",))
        out2 = run_pipeline(tmp_path, "run2", ("--offline",))
        m1 = (out1 / "manifest.json").read_bytes()
        m2 = (out2 / "manifest.json").read_bytes()
        assert m1 == m2
        for p in out1.iterdir():
            assert p.read_bytes() == (out2 / p.name).read_bytes(), p.name

    def test_skip_report_writes_four_artifacts(self, tmp_path):
        out = run_pipeline(tmp_path, "run-skip", ("--skip-report",))
        names = sorted(p.name for p in out.iterdir())
        assert names == ["coverage.csv", "findings.json", "manifest.json", "mask.png", "overlay.png"]
        manifest = json.loads((out / "manifest.json").read_text())
        assert len(manifest["artifacts"]) == 4

    def test_findings_artifact_validates(self, tmp_path):
        from mriexplain.findings import validate_findings

        out = run_pipeline(tmp_path, "run-v", ("--offline",))
        doc = validate_findings((out / "findings.json").read_text())
        assert doc.predicted_class == "Meningioma"
        assert doc.provenance.slice_index == 2
        assert len(doc.regions) >= 1

    def test_report_metrics_include_grounding(self, tmp_path):
        out = run_pipeline(tmp_path, "run-g", ("--offline",))
        metrics = json.loads((out / "report_metrics.json").read_text())
        assert metrics["grounding_violations"] == []
        assert metrics["cohs"] is not None

    def test_invalid_atlas_slice_exit_2(self, tmp_path, capsys):
        code = main([
            "pipeline",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(tmp_path / "x"),
            "--atlas", str(FIXTURES / "atlas.nii"),
            "--labels", str(FIXTURES / "atlas_labels.csv"),
            "--atlas-slice", "99",
            "--model", "M",
            "--predicted-class", "Glioma",
            "--offline",
        ])
        assert code == 2
        err = capsys.readouterr().err
        assert "--atlas-slice" in err
        assert "stage map-atlas" in err

    def test_partial_suffix_kept_on_failure(self, tmp_path, monkeypatch):
        # make the findings stage blow up after earlier artifacts were written
        import mriexplain.cli as cli

        def boom(*args, **kwargs):
            raise RuntimeError("synthetic failure")

        monkeypatch.setattr(cli, "build_findings", boom)
        out = tmp_path / "x"
        code = main([
            "pipeline",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(out),
            "--offline",
            *PIPELINE_ARGS,
        ])
        assert code == 3
        assert (out / "mask.png").exists()
        assert not (out / "manifest.json").exists()

    def test_batch_mode(self, tmp_path):
        samples = tmp_path / "samples"
        for i, cls in enumerate(["Glioma", "Meningioma"]):
            d = samples / f"s{i}"
            d.mkdir(parents=True)
            shutil.copy(FIXTURES / "heatmap.npy", d / "heatmap.npy")
            shutil.copy(FIXTURES / "gt_mask.png", d / "gt_mask.png")
            (d / "pred.json").write_text(json.dumps({
                "model_name": "TinyNet",
                "predicted_class": cls,
                "confidence": 0.5 + i / 10,
            }))
        out = tmp_path / "out"
        code = main([
            "pipeline",
            "--batch", str(samples),
            "--out-dir", str(out),
            "--atlas", str(FIXTURES / "atlas.nii"),
            "--labels", str(FIXTURES / "atlas_labels.csv"),
            "--atlas-slice", "2",
            "--saliency-method", "GradCAM",
            "--offline",
        ])
        assert code == 0
        for i in range(2):
            assert (out / f"s{i}" / "manifest.json").exists()
        doc = json.loads((out / "s0" / "findings.json").read_text())
        assert doc["predicted_class"] == "Glioma"
        assert doc["model_name"] == "TinyNet"


class TestConfigPrecedence:
    def test_config_file_supplies_segmentation_params(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('alpha_range = "80:90"\nmin_area = 5\nradius = 1\n')
        out = tmp_path / "out"
        code = main([
            "--config", str(cfg),
            "segment",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(out),
        ])
        assert code == 0
        metrics = json.loads((out / "segmentation_metrics.json").read_text())
        assert 80 <= metrics["alpha_star"] <= 90

    def test_flags_override_config(self, tmp_path):
        cfg = tmp_path / "cfg.toml"
        cfg.write_text('alpha_range = "80:90"\n')
        out = tmp_path / "out"
        code = main([
            "--config", str(cfg),
            "segment",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(out),
            "--alpha-range", "94:95",
        ])
        assert code == 0
        metrics = json.loads((out / "segmentation_metrics.json").read_text())
        assert 94 <= metrics["alpha_star"] <= 95

    def test_env_supplies_atlas_paths(self, tmp_path, monkeypatch):
        monkeypatch.setenv("MRIEXPLAIN_ATLAS", str(FIXTURES / "atlas.nii"))
        monkeypatch.setenv("MRIEXPLAIN_LABELS", str(FIXTURES / "atlas_labels.csv"))
        out = tmp_path / "out"
        code = main([
            "pipeline",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(out),
            "--atlas-slice", "2",
            "--model", "M",
            "--predicted-class", "Glioma",
            "--offline",
        ])
        assert code == 0
        assert (out / "manifest.json").exists()

    def test_missing_config_file_exit_2(self, tmp_path, capsys):
        code = main([
            "--config", str(tmp_path / "missing.toml"),
            "segment",
            "--heatmap", str(FIXTURES / "heatmap.npy"),
            "--gt-mask", str(FIXTURES / "gt_mask.png"),
            "--out-dir", str(tmp_path / "o"),
        ])
        assert code == 2
        assert "missing.toml" in capsys.readouterr().err


class TestConsoleScript:
    def test_module_entrypoint(self):
        proc = subprocess.run(
            [sys.executable, "-m", "mriexplain.cli", "--help"],
            capture_output=True,
            text=True,
        )
        assert proc.returncode == 0
        assert "pipeline" in proc.stdout
