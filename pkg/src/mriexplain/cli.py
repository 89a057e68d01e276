"""Command-line interface.

One subcommand per pipeline stage (segment, rois, map-atlas, findings,
report, evaluate-text) plus ``pipeline`` which runs the whole chain and
writes a manifest of artifact hashes.  Exit codes: 0 success, 2 input
error, 3 processing error; every failure prints a single ``error:``
line to stderr.

Configuration precedence is flags > environment > TOML config file >
defaults.  The LLM API key is only ever read from the LLM_API_KEY
environment variable.
"""

from __future__ import annotations

import argparse
import csv as _csv
import hashlib
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable, List, Optional, Sequence

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import formats
from .atlas import map_rois
from .core import CoverageRow, CoverageTable
from .findings import (
    FindingsDocument,
    Provenance,
    Region,
    SegmentationMetrics,
    build_findings,
    validate_findings,
)
from .report import (
    LlmAuthError,
    LlmEmptyCompletion,
    LlmEndpointConfig,
    LlmRetriesExhausted,
    generate_report,
    ground_check,
)
from .rois import extract_rois
from .segmentation import SegmentationParams, segment_heatmap
from .textmetrics import coherence, fres, maas, text_report, tokenize, ttr

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_PROCESSING = 3

EPOCH_ISO = "1970-01-01T00:00:00+00:00"

log = logging.getLogger("mriexplain")


class InputError(Exception):
    """User-supplied paths, flags or file contents are unusable."""


# ---------------------------------------------------------------------------
# configuration helpers

def _load_config(path: Optional[str]) -> dict:
    if not path:
        return {}
    p = Path(path)
    if not p.exists():
        raise InputError(f"config file not found: {path}")
    with open(p, "rb") as fh:
        return tomllib.load(fh)


def _resolve(flag, env_name: Optional[str], config: dict, key: str, default=None):
    if flag is not None:
        return flag
    if env_name and os.environ.get(env_name):
        return os.environ[env_name]
    if key in config:
        return config[key]
    return default


def _parse_alpha_range(text: str) -> tuple:
    try:
        lo, hi = text.split(":")
        return int(lo), int(hi)
    except ValueError as exc:
        raise InputError(f"--alpha-range must look like LO:HI, got {text!r}") from exc


def _seg_params(args, config: dict) -> SegmentationParams:
    alpha = _resolve(args.alpha_range, None, config, "alpha_range")
    if isinstance(alpha, str):
        alpha = _parse_alpha_range(alpha)
    try:
        return SegmentationParams(
            alpha_range=tuple(alpha) if alpha is not None else (70, 97),
            s_min=int(_resolve(args.min_area, None, config, "min_area", 50)),
            r=int(_resolve(args.radius, None, config, "radius", 3)),
            epsilon=float(_resolve(args.epsilon, None, config, "epsilon", 1e-6)),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _require_file(path: str, flag: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"{flag}: file not found: {path}")
    return p


def _created_at(args, offline: bool) -> str:
    if getattr(args, "created_at", None):
        return args.created_at
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    if epoch:
        return datetime.fromtimestamp(int(epoch), tz=timezone.utc).isoformat(timespec="seconds")
    if offline:
        # fixed timestamp keeps offline runs byte-reproducible
        return EPOCH_ISO
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def _llm_config(args, config: dict) -> LlmEndpointConfig:
    base_url = _resolve(args.base_url, "LLM_BASE_URL", config, "base_url")
    model_id = _resolve(args.model_id, "LLM_MODEL_ID", config, "model_id")
    if not base_url or not model_id:
        raise InputError("--base-url and --model-id are required unless --offline is given")
    try:
        return LlmEndpointConfig(
            base_url=str(base_url),
            model_id=str(model_id),
            api_key=os.environ.get("LLM_API_KEY", ""),
            timeout=float(_resolve(args.timeout, None, config, "timeout", 60.0)),
            max_retries=int(_resolve(args.max_retries, None, config, "max_retries", 3)),
            temperature=float(_resolve(args.temperature, None, config, "temperature", 0.2)),
        )
    except ValueError as exc:
        raise InputError(str(exc)) from exc


# ---------------------------------------------------------------------------
# artifact writing

def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_artifact(out_dir: Path, name: str, writer: Callable[[Path], None]) -> Path:
    """Write through a .partial temp name, renaming only on success."""
    final = out_dir / name
    partial = out_dir / (name + ".partial")
    writer(partial)
    partial.replace(final)
    return final


def _write_text(path: Path, text: str) -> None:
    path.write_text(text, encoding="utf-8")


def _coverage_csv(table: CoverageTable) -> str:
    lines = ["label,region,voxel_count,percentage"]
    for row in table.rows:
        name = row.region_name
        if "," in name or '"' in name:
            name = '"' + name.replace('"', '""') + '"'
        lines.append(f"{row.label},{name},{row.voxel_count},{row.percentage!r}")
    return "\n".join(lines) + "\n"


def _read_coverage_csv(path: Path) -> CoverageTable:
    rows = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = _csv.DictReader(fh)
        for rec in reader:
            rows.append(
                CoverageRow(
                    label=int(rec["label"]),
                    region_name=rec["region"],
                    voxel_count=int(rec["voxel_count"]),
                    percentage=float(rec["percentage"]),
                )
            )
    return CoverageTable(rows=tuple(rows))


def _out_stream(path: Optional[str]):
    if path in (None, "-"):
        return sys.stdout, False
    return open(path, "w", encoding="utf-8"), True


def _emit(path: Optional[str], text: str) -> None:
    stream, close = _out_stream(path)
    try:
        stream.write(text)
    finally:
        if close:
            stream.close()


# ---------------------------------------------------------------------------
# subcommands

def cmd_segment(args) -> int:
    config = _load_config(args.config)
    params = _seg_params(args, config)
    heatmap = formats.read_heatmap(_require_file(args.heatmap, "--heatmap"))
    gt = formats.read_mask(_require_file(args.gt_mask, "--gt-mask"))
    result = segment_heatmap(heatmap, gt, params)
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    _write_artifact(out_dir, "mask.png", lambda p: formats.write_mask(p, result.mask))
    metrics = {
        "dsc": result.dsc,
        "iou": result.iou,
        "alpha_star": result.alpha_star,
        "threshold_value": result.threshold_value,
    }
    _write_artifact(
        out_dir,
        "segmentation_metrics.json",
        lambda p: _write_text(p, json.dumps(metrics, indent=2) + "\n"),
    )
    print(json.dumps(metrics))
    return EXIT_OK


def cmd_rois(args) -> int:
    mask = formats.read_mask(_require_file(args.mask, "--mask"))
    descriptors = extract_rois(mask)
    payload = [
        {"area": d.area, "bbox": list(d.bbox), "coords": [list(c) for c in d.coords]}
        for d in descriptors
    ]
    _emit(args.out, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _atlas_slice_index(args, atlas) -> int:
    if args.atlas_slice is not None:
        z = args.atlas_slice
        if not 0 <= z < atlas.dims[2]:
            raise InputError(
                f"--atlas-slice {z} is out of range for atlas with {atlas.dims[2]} slices"
            )
        return z
    z = atlas.dims[2] // 2
    log.warning("no --atlas-slice given; defaulting to mid-slice z=%d", z)
    return z


def cmd_map_atlas(args) -> int:
    mask = formats.read_mask(_require_file(args.mask, "--mask"))
    atlas = formats.read_atlas(
        _require_file(args.atlas, "--atlas"), _require_file(args.labels, "--labels")
    )
    table = map_rois(mask, atlas, _atlas_slice_index(args, atlas))
    _emit(args.out, _coverage_csv(table))
    return EXIT_OK


def cmd_findings(args) -> int:
    metrics = json.loads(_require_file(args.metrics, "--metrics").read_text())
    coverage = _read_coverage_csv(_require_file(args.coverage, "--coverage"))
    doc = FindingsDocument(
        model_name=args.model,
        predicted_class=args.predicted_class,
        saliency_method=args.saliency_method,
        regions=tuple(
            Region(
                name=r.region_name,
                label=r.label,
                voxel_count=r.voxel_count,
                percentage=round(r.percentage, 2),
            )
            for r in coverage.rows
        ),
        segmentation_metrics=SegmentationMetrics(
            dsc=float(metrics["dsc"]),
            iou=float(metrics["iou"]),
            alpha_star=float(metrics["alpha_star"]),
        ),
        provenance=Provenance(
            source_image_id=args.image_id,
            atlas_id=args.atlas_id,
            slice_index=args.atlas_slice,
            created_at=_created_at(args, offline=True),
        ),
        prediction_confidence=args.confidence,
        note=None if len(coverage) else "no atlas-region overlap",
    )
    _emit(args.out, doc.to_json())
    return EXIT_OK


def cmd_report(args) -> int:
    raw = _require_file(args.findings, "--findings").read_text(encoding="utf-8")
    doc = validate_findings(raw)
    cfg = None if args.offline else _llm_config(args, _load_config(args.config))
    report = generate_report(doc, cfg, created_at=_created_at(args, offline=args.offline))
    _emit(args.out, report.text)
    if args.check:
        violations = ground_check(report, doc)
        for v in violations:
            print(f"grounding-violation [{v.kind}] {v.detail}", file=sys.stderr)
        if violations:
            return EXIT_PROCESSING
    return EXIT_OK


def _text_metrics_dict(text: str) -> dict:
    tokens = tokenize(text)
    metrics = {"n_tokens": len(tokens), "n_types": len(set(tokens))}
    for name, fn in (("ttr", ttr), ("maas", maas), ("fres", fres), ("cohs", coherence)):
        try:
            metrics[name] = fn(text)
        except ValueError as exc:
            log.warning("%s not computable: %s", name, exc)
            metrics[name] = None
    return metrics


def cmd_evaluate_text(args) -> int:
    if not args.text or args.text == ["-"]:
        payload = _text_metrics_dict(sys.stdin.read())
    elif len(args.text) == 1:
        payload = _text_metrics_dict(_require_file(args.text[0], "--text").read_text(encoding="utf-8"))
    else:
        # corpus mode: per-text metrics plus mean +/- sd over the corpus
        per_text = []
        for path in args.text:
            metrics = _text_metrics_dict(_require_file(path, "--text").read_text(encoding="utf-8"))
            metrics["path"] = path
            per_text.append(metrics)
        summary = {}
        for name in ("ttr", "maas", "fres", "cohs"):
            values = [m[name] for m in per_text if m[name] is not None]
            if not values:
                summary[name] = {"mean": None, "sd": None, "n": 0}
                continue
            mean = sum(values) / len(values)
            sd = (
                (sum((v - mean) ** 2 for v in values) / (len(values) - 1)) ** 0.5
                if len(values) > 1
                else None
            )
            summary[name] = {"mean": mean, "sd": sd, "n": len(values)}
        payload = {"texts": per_text, "summary": summary}
    _emit(args.out, json.dumps(payload, indent=2) + "\n")
    return EXIT_OK


def _run_pipeline_single(args, config: dict, sample_dir: Path, out_dir: Path, tag: str) -> None:
    current_stage = "setup"

    def stage(name: str):
        nonlocal current_stage
        current_stage = name
        log.info("[%s] %s", tag, name)

    params = _seg_params(args, config)
    heatmap_path = sample_dir / args.heatmap_name if args.batch else Path(args.heatmap)
    mask_path = sample_dir / args.mask_name if args.batch else Path(args.gt_mask)
    if not heatmap_path.is_file():
        raise InputError(f"--heatmap: file not found: {heatmap_path}")
    if not mask_path.is_file():
        raise InputError(f"--gt-mask: file not found: {mask_path}")

    model, predicted, confidence = args.model, args.predicted_class, args.confidence
    pred_json = sample_dir / "pred.json" if args.batch else None
    if pred_json and pred_json.is_file():
        pred = json.loads(pred_json.read_text())
        model = model or pred.get("model_name")
        predicted = predicted or pred.get("predicted_class")
        if confidence is None:
            confidence = pred.get("confidence")
    if not model or not predicted:
        raise InputError("--model and --predicted-class are required")

    out_dir.mkdir(parents=True, exist_ok=True)
    artifacts: List[Path] = []

    try:
        stage("segment")
        heatmap = formats.read_heatmap(heatmap_path)
        gt = formats.read_mask(mask_path)
        result = segment_heatmap(heatmap, gt, params)
        artifacts.append(
            _write_artifact(out_dir, "mask.png", lambda p: formats.write_mask(p, result.mask))
        )
        artifacts.append(
            _write_artifact(
                out_dir, "overlay.png", lambda p: formats.write_overlay(heatmap, result.mask, p)
            )
        )

        stage("extract-rois")
        # descriptors are exposed via the `rois` subcommand; running the
        # extraction here keeps stage ordering and error attribution honest
        extract_rois(result.mask)

        stage("map-atlas")
        atlas_path = _resolve(args.atlas, "MRIEXPLAIN_ATLAS", config, "atlas")
        labels_path = _resolve(args.labels, "MRIEXPLAIN_LABELS", config, "labels")
        if not atlas_path or not labels_path:
            raise InputError("--atlas and --labels are required (flag, env or config)")
        atlas = formats.read_atlas(
            _require_file(atlas_path, "--atlas"), _require_file(labels_path, "--labels")
        )
        z = _atlas_slice_index(args, atlas)
        table = map_rois(result.mask, atlas, z)
        artifacts.append(
            _write_artifact(out_dir, "coverage.csv", lambda p: _write_text(p, _coverage_csv(table)))
        )

        stage("findings")
        offline = bool(args.offline or args.skip_report)
        doc = build_findings(
            model_name=model,
            predicted_class=predicted,
            saliency_method=args.saliency_method,
            coverage=table,
            seg=result,
            provenance=Provenance(
                source_image_id=args.image_id or tag,
                atlas_id=args.atlas_id or Path(str(atlas_path)).name,
                slice_index=z,
                created_at=_created_at(args, offline=offline),
            ),
            prediction_confidence=confidence,
        )
        artifacts.append(
            _write_artifact(out_dir, "findings.json", lambda p: _write_text(p, doc.to_json()))
        )

        if not args.skip_report:
            stage("report")
            cfg = None if args.offline else _llm_config(args, config)
            report = generate_report(doc, cfg, created_at=_created_at(args, offline=offline))
            artifacts.append(
                _write_artifact(out_dir, "report.txt", lambda p: _write_text(p, report.text))
            )

            stage("evaluate")
            tm = text_report(report.text)
            payload = {
                "n_tokens": tm.n_tokens,
                "n_types": tm.n_types,
                "ttr": tm.ttr,
                "maas": tm.maas,
                "fres": tm.fres,
                "cohs": tm.cohs,
                "grounding_violations": [
                    {"kind": v.kind, "detail": v.detail} for v in ground_check(report, doc)
                ],
            }
            artifacts.append(
                _write_artifact(
                    out_dir,
                    "report_metrics.json",
                    lambda p: _write_text(p, json.dumps(payload, indent=2) + "\n"),
                )
            )
    except Exception as exc:
        message = f"stage {current_stage}: {exc}"
        if isinstance(exc, (InputError, formats.FormatError, FileNotFoundError, ValueError)):
            raise InputError(message) from exc
        raise RuntimeError(message) from exc

    manifest = {
        "artifacts": [
            {"path": p.name, "sha256": _sha256_file(p)} for p in sorted(artifacts)
        ]
    }
    _write_artifact(
        out_dir, "manifest.json", lambda p: _write_text(p, json.dumps(manifest, indent=2) + "\n")
    )


def cmd_pipeline(args) -> int:
    config = _load_config(args.config)
    out_dir = Path(args.out_dir)
    if args.batch:
        samples_root = Path(args.batch)
        if not samples_root.is_dir():
            raise InputError(f"--batch: directory not found: {args.batch}")
        sample_dirs = sorted(d for d in samples_root.iterdir() if d.is_dir())
        if not sample_dirs:
            raise InputError(f"--batch: no sample subdirectories in {args.batch}")
        failures = []

        def run(sample: Path):
            try:
                _run_pipeline_single(args, config, sample, out_dir / sample.name, sample.name)
            except Exception as exc:  # collected, reported per sample
                failures.append((sample.name, exc))

        with ThreadPoolExecutor(max_workers=args.jobs) as pool:
            list(pool.map(run, sample_dirs))
        for name, exc in failures:
            print(f"error: [{name}] {exc}", file=sys.stderr)
        if failures:
            return EXIT_PROCESSING
        return EXIT_OK
    _run_pipeline_single(args, config, Path("."), out_dir, out_dir.name)
    return EXIT_OK


# ---------------------------------------------------------------------------
# parser

def _add_seg_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--alpha-range", help="inclusive percentile search range LO:HI (default 70:97)")
    p.add_argument("--min-area", type=int, help="minimum surviving component area (default 50)")
    p.add_argument("--radius", type=int, help="closing disk radius (default 3)")
    p.add_argument("--epsilon", type=float, help="Dice smoothing constant (default 1e-6)")


def _add_llm_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--offline", action="store_true", help="use the deterministic stub generator")
    p.add_argument("--base-url", help="chat endpoint base URL including version prefix")
    p.add_argument("--model-id", help="model identifier sent to the endpoint")
    p.add_argument("--timeout", type=float, help="request timeout in seconds")
    p.add_argument("--max-retries", type=int, help="retry budget for transient failures")
    p.add_argument("--temperature", type=float, help="decoding temperature (default 0.2)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mriexplain",
        description="Saliency-to-report explainability pipeline for brain MRI.",
    )
    parser.add_argument("--config", help="TOML config file (flags and env take precedence)")
    parser.add_argument("--verbose", action="store_true", help="log stage progress")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("segment", help="heatmap -> binary mask + metrics")
    p.add_argument("--heatmap", required=True)
    p.add_argument("--gt-mask", required=True)
    p.add_argument("--out-dir", required=True)
    _add_seg_flags(p)
    p.set_defaults(fn=cmd_segment)

    p = sub.add_parser("rois", help="mask -> connected-region descriptors (JSON)")
    p.add_argument("--mask", required=True)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_rois)

    p = sub.add_parser("map-atlas", help="mask + atlas -> region coverage CSV")
    p.add_argument("--mask", required=True)
    p.add_argument("--atlas", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--atlas-slice", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_map_atlas)

    p = sub.add_parser("findings", help="assemble the findings JSON document")
    p.add_argument("--metrics", required=True, help="segmentation_metrics.json from segment")
    p.add_argument("--coverage", required=True, help="coverage CSV from map-atlas")
    p.add_argument("--model", required=True)
    p.add_argument("--predicted-class", required=True, choices=["Glioma", "Meningioma", "PituitaryTumor"])
    p.add_argument("--saliency-method", required=True, choices=["GradCAM", "GradCAMpp", "ScoreCAM"])
    p.add_argument("--confidence", type=float)
    p.add_argument("--image-id", required=True)
    p.add_argument("--atlas-id", required=True)
    p.add_argument("--atlas-slice", type=int, required=True)
    p.add_argument("--created-at")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_findings)

    p = sub.add_parser("report", help="findings JSON -> narrative report")
    p.add_argument("--findings", required=True)
    p.add_argument("--check", action="store_true", help="run the grounding check on the result")
    p.add_argument("--created-at")
    p.add_argument("--out")
    _add_llm_flags(p)
    p.set_defaults(fn=cmd_report)

    p = sub.add_parser("evaluate-text", help="report text -> quality metrics JSON")
    p.add_argument(
        "--text",
        nargs="*",
        help="input file(s); several files get a mean/sd summary; omit or '-' for stdin",
    )
    p.add_argument("--out")
    p.set_defaults(fn=cmd_evaluate_text)

    p = sub.add_parser("pipeline", help="run every stage and write a manifest")
    p.add_argument("--heatmap")
    p.add_argument("--gt-mask")
    p.add_argument("--atlas", help="atlas volume (or MRIEXPLAIN_ATLAS / config)")
    p.add_argument("--labels", help="label table (or MRIEXPLAIN_LABELS / config)")
    p.add_argument("--atlas-slice", type=int)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--model")
    p.add_argument("--predicted-class", choices=["Glioma", "Meningioma", "PituitaryTumor"])
    p.add_argument("--saliency-method", default="GradCAMpp", choices=["GradCAM", "GradCAMpp", "ScoreCAM"])
    p.add_argument("--confidence", type=float)
    p.add_argument("--image-id")
    p.add_argument("--atlas-id")
    p.add_argument("--created-at")
    p.add_argument("--skip-report", action="store_true", help="stop after findings; no endpoint contact")
    p.add_argument("--batch", help="directory of per-sample subdirectories to process in parallel")
    p.add_argument("--heatmap-name", default="heatmap.npy", help="per-sample heatmap filename in batch mode")
    p.add_argument("--mask-name", default="gt_mask.png", help="per-sample mask filename in batch mode")
    p.add_argument("--jobs", type=int, default=4, help="parallel workers in batch mode")
    _add_seg_flags(p)
    _add_llm_flags(p)
    p.set_defaults(fn=cmd_pipeline)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    if args.command == "pipeline" and not args.batch:
        if not args.heatmap or not args.gt_mask:
            print("error: --heatmap and --gt-mask are required outside batch mode", file=sys.stderr)
            return EXIT_INPUT
    try:
        return args.fn(args)
    except (InputError, FileNotFoundError, formats.FormatError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (LlmAuthError, LlmRetriesExhausted, LlmEmptyCompletion) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING
    except Exception as exc:  # anything else is a processing failure
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROCESSING


if __name__ == "__main__":
    sys.exit(main())
