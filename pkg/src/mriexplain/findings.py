"""Structured findings document that grounds report generation.

The document carries the classification backbone, predicted class,
saliency method, the atlas-region coverage list and the segmentation
quality metrics for one sample.  Serialization is canonical: fixed key
order, percentages with exactly two decimal places, other floats at
full round-trip precision, so identical documents always produce
byte-identical JSON.

Key names follow the snake_case schema shipped at
``schemas/findings.schema.json`` and versioned with this package.
"""

from __future__ import annotations

import importlib.resources
import json
import math
from dataclasses import dataclass
from typing import List, Optional, Tuple

import jsonschema

from .core import CoverageTable, SegmentationResult

__all__ = [
    "PREDICTED_CLASSES",
    "SALIENCY_METHODS",
    "Region",
    "Provenance",
    "SegmentationMetrics",
    "FindingsDocument",
    "FindingsValidationError",
    "build_findings",
    "validate_findings",
    "load_schema",
]

SCHEMA_VERSION = "1.0"
PREDICTED_CLASSES = ("Glioma", "Meningioma", "PituitaryTumor")
SALIENCY_METHODS = ("GradCAM", "GradCAMpp", "ScoreCAM")
NO_OVERLAP_NOTE = "no atlas-region overlap"


class FindingsValidationError(ValueError):
    """Raised when JSON text fails schema validation.

    ``errors`` lists every violation as (json_pointer, message) pairs.
    """

    def __init__(self, errors: List[Tuple[str, str]]):
        self.errors = errors
        lines = "; ".join(f"{ptr or '/'}: {msg}" for ptr, msg in errors)
        super().__init__(f"findings document is invalid: {lines}")


@dataclass(frozen=True)
class Region:
    name: str
    label: int
    voxel_count: int
    percentage: float


@dataclass(frozen=True)
class Provenance:
    source_image_id: str
    atlas_id: str
    slice_index: int
    created_at: str


@dataclass(frozen=True)
class SegmentationMetrics:
    dsc: float
    iou: float
    alpha_star: float


@dataclass(frozen=True)
class FindingsDocument:
    model_name: str
    predicted_class: str
    saliency_method: str
    regions: Tuple[Region, ...]
    segmentation_metrics: "SegmentationMetrics"
    provenance: Provenance
    prediction_confidence: Optional[float] = None
    note: Optional[str] = None

    def __post_init__(self) -> None:
        if self.predicted_class not in PREDICTED_CLASSES:
            raise ValueError(f"predicted_class must be one of {PREDICTED_CLASSES}")
        if self.saliency_method not in SALIENCY_METHODS:
            raise ValueError(f"saliency_method must be one of {SALIENCY_METHODS}")
        if self.prediction_confidence is not None and not 0.0 <= self.prediction_confidence <= 1.0:
            raise ValueError("prediction_confidence must lie in [0, 1]")
        object.__setattr__(self, "regions", tuple(self.regions))

    def to_dict(self) -> dict:
        d = {
            "schema_version": SCHEMA_VERSION,
            "model_name": self.model_name,
            "predicted_class": self.predicted_class,
        }
        if self.prediction_confidence is not None:
            d["prediction_confidence"] = self.prediction_confidence
        d["saliency_method"] = self.saliency_method
        d["regions"] = [
            {
                "name": r.name,
                "label": r.label,
                "voxel_count": r.voxel_count,
                "percentage": r.percentage,
            }
            for r in self.regions
        ]
        if self.note is not None:
            d["note"] = self.note
        d["segmentation_metrics"] = {
            "dsc": self.segmentation_metrics.dsc,
            "iou": self.segmentation_metrics.iou,
            "alpha_star": self.segmentation_metrics.alpha_star,
        }
        d["provenance"] = {
            "source_image_id": self.provenance.source_image_id,
            "atlas_id": self.provenance.atlas_id,
            "slice_index": self.provenance.slice_index,
            "created_at": self.provenance.created_at,
        }
        return d

    def to_json(self) -> str:
        """Canonical JSON text (stable key order, fixed float formats)."""
        return _canonical(self.to_dict(), indent=0) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "FindingsDocument":
        return cls(
            model_name=d["model_name"],
            predicted_class=d["predicted_class"],
            saliency_method=d["saliency_method"],
            regions=tuple(
                Region(
                    name=r["name"],
                    label=r["label"],
                    voxel_count=r["voxel_count"],
                    percentage=float(r["percentage"]),
                )
                for r in d["regions"]
            ),
            segmentation_metrics=SegmentationMetrics(
                dsc=float(d["segmentation_metrics"]["dsc"]),
                iou=float(d["segmentation_metrics"]["iou"]),
                alpha_star=float(d["segmentation_metrics"]["alpha_star"]),
            ),
            provenance=Provenance(
                source_image_id=d["provenance"]["source_image_id"],
                atlas_id=d["provenance"]["atlas_id"],
                slice_index=d["provenance"]["slice_index"],
                created_at=d["provenance"]["created_at"],
            ),
            prediction_confidence=(
                float(d["prediction_confidence"]) if "prediction_confidence" in d else None
            ),
            note=d.get("note"),
        )


def _format_float(x: float, fixed2: bool) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x}")
    if fixed2:
        return format(x, ".2f")
    # repr round-trips exactly and is the shortest such representation
    return repr(float(x))


def _canonical(value, indent: int, key: str | None = None) -> str:
    pad = "  " * indent
    child_pad = "  " * (indent + 1)
    if isinstance(value, dict):
        if not value:
            return "{}"
        items = [
            f'{child_pad}"{k}": {_canonical(v, indent + 1, key=k)}' for k, v in value.items()
        ]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, list):
        if not value:
            return "[]"
        items = [f"{child_pad}{_canonical(v, indent + 1, key=key)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return _format_float(value, fixed2=(key == "percentage"))
    if isinstance(value, str):
        return json.dumps(value, ensure_ascii=True)
    if value is None:
        return "null"
    raise TypeError(f"cannot serialize {type(value).__name__}")


def load_schema() -> dict:
    text = (
        importlib.resources.files("mriexplain")
        .joinpath("schemas/findings.schema.json")
        .read_text(encoding="utf-8")
    )
    return json.loads(text)


def build_findings(
    model_name: str,
    predicted_class: str,
    saliency_method: str,
    coverage: CoverageTable,
    seg: SegmentationResult,
    provenance: Provenance,
    prediction_confidence: Optional[float] = None,
) -> FindingsDocument:
    """Assemble a findings document from one sample's pipeline outputs.

    Regions are copied in coverage order with percentages rounded to two
    decimal places (the precision the document serializes at).  An empty
    coverage table yields ``regions: []`` plus an explanatory note.
    """
    regions = tuple(
        Region(
            name=row.region_name,
            label=row.label,
            voxel_count=row.voxel_count,
            percentage=round(row.percentage, 2),
        )
        for row in coverage.rows
    )
    return FindingsDocument(
        model_name=model_name,
        predicted_class=predicted_class,
        saliency_method=saliency_method,
        regions=regions,
        segmentation_metrics=SegmentationMetrics(
            dsc=seg.dsc, iou=seg.iou, alpha_star=seg.alpha_star
        ),
        provenance=provenance,
        prediction_confidence=prediction_confidence,
        note=None if regions else NO_OVERLAP_NOTE,
    )


def validate_findings(raw: str) -> FindingsDocument:
    """Parse and validate JSON text against the shipped schema.

    Returns the document on success; raises
    :class:`FindingsValidationError` carrying the exhaustive list of
    violations (each with a JSON-pointer path) otherwise.  Malformed
    JSON raises ``json.JSONDecodeError``.
    """
    data = json.loads(raw)
    validator = jsonschema.Draft202012Validator(load_schema())
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.absolute_path))
    if errors:
        raise FindingsValidationError(
            [("/" + "/".join(str(p) for p in e.absolute_path), e.message) for e in errors]
        )
    return FindingsDocument.from_dict(data)
