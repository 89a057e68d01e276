"""Shared domain types for the explainability pipeline.

Conventions used across the whole package:

* pixel indexing is (row, col) with the origin at the top-left corner;
* bounding boxes are reported as inclusive ``(x_min, y_min, x_max, y_max)``
  with ``x`` meaning column and ``y`` meaning row;
* all types are immutable after construction and safe to share across
  threads (backing arrays are marked read-only).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence, Tuple

import numpy as np

__all__ = [
    "Heatmap",
    "BinaryMask",
    "LabelGrid",
    "Atlas",
    "RegionDescriptor",
    "CoverageRow",
    "CoverageTable",
    "SegmentationResult",
    "UnknownAtlasLabelWarning",
    "validate_heatmap",
]


class UnknownAtlasLabelWarning(UserWarning):
    """A nonzero atlas label had no entry in the atlas name table."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Heatmap:
    """2D saliency map with every value in [0, 1].

    Use :func:`validate_heatmap` to build one from raw, possibly
    unnormalized data.
    """

    values: np.ndarray

    def __post_init__(self) -> None:
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.size == 0:
            raise ValueError(f"heatmap must be a nonempty 2D grid, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValueError("heatmap contains non-finite values")
        if v.min() < 0.0 or v.max() > 1.0:
            raise ValueError("heatmap values must lie in [0, 1]; use validate_heatmap to rescale")
        object.__setattr__(self, "values", _readonly(v))

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.values.shape  # type: ignore[return-value]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Heatmap):
            return NotImplemented
        return np.array_equal(self.values, other.values)


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """2D boolean grid marking tumor-relevant pixels."""

    bits: np.ndarray

    def __post_init__(self) -> None:
        b = np.asarray(self.bits)
        if b.dtype != np.bool_:
            if not np.isin(b, (0, 1)).all():
                raise ValueError("mask values must be boolean or 0/1")
            b = b.astype(bool)
        if b.ndim != 2 or b.size == 0:
            raise ValueError(f"mask must be a nonempty 2D grid, got shape {b.shape}")
        object.__setattr__(self, "bits", _readonly(b))

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.bits.shape  # type: ignore[return-value]

    @property
    def foreground_count(self) -> int:
        return int(self.bits.sum())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BinaryMask):
            return NotImplemented
        return np.array_equal(self.bits, other.bits)


@dataclass(frozen=True, eq=False)
class LabelGrid:
    """2D grid of non-negative integer labels; 0 is background."""

    labels: np.ndarray

    def __post_init__(self) -> None:
        g = np.asarray(self.labels)
        if not np.issubdtype(g.dtype, np.integer):
            raise ValueError(f"labels must be integers, got dtype {g.dtype}")
        if g.ndim != 2 or g.size == 0:
            raise ValueError(f"label grid must be a nonempty 2D grid, got shape {g.shape}")
        if g.min() < 0:
            raise ValueError("labels must be >= 0")
        object.__setattr__(self, "labels", _readonly(g.astype(np.int64)))

    @property
    def height(self) -> int:
        return self.labels.shape[0]

    @property
    def width(self) -> int:
        return self.labels.shape[1]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.labels.shape  # type: ignore[return-value]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LabelGrid):
            return NotImplemented
        return np.array_equal(self.labels, other.labels)


@dataclass(frozen=True, eq=False)
class Atlas:
    """Labeled 3D reference volume plus an index-to-region-name table.

    Completeness of ``names`` is not enforced here: a nonzero label with
    no name entry is reported by the mapping stage (see
    :func:`mriexplain.atlas.map_rois`), not rejected at load time.
    """

    labels: np.ndarray
    names: Mapping[int, str]

    def __post_init__(self) -> None:
        vol = np.asarray(self.labels)
        if not np.issubdtype(vol.dtype, np.integer):
            raise ValueError(f"atlas volume must be integer-valued, got dtype {vol.dtype}")
        if vol.ndim != 3 or min(vol.shape) <= 0:
            raise ValueError(f"atlas volume must be 3D with positive dims, got shape {vol.shape}")
        if vol.min() < 0:
            raise ValueError("atlas labels must be >= 0")
        object.__setattr__(self, "labels", _readonly(vol.astype(np.int64)))
        object.__setattr__(self, "names", dict(self.names))

    @property
    def dims(self) -> Tuple[int, int, int]:
        return self.labels.shape  # type: ignore[return-value]


@dataclass(frozen=True)
class RegionDescriptor:
    """One connected component: pixel coords, tight bbox, area.

    ``coords`` are (row, col) pairs in raster order; ``bbox`` is the
    inclusive ``(x_min, y_min, x_max, y_max)`` rectangle.
    """

    coords: Tuple[Tuple[int, int], ...]
    bbox: Tuple[int, int, int, int]
    area: int

    def __post_init__(self) -> None:
        if self.area != len(self.coords) or self.area <= 0:
            raise ValueError("area must equal the number of coords and be > 0")
        rows = [r for r, _ in self.coords]
        cols = [c for _, c in self.coords]
        tight = (min(cols), min(rows), max(cols), max(rows))
        if tuple(self.bbox) != tight:
            raise ValueError(f"bbox {self.bbox} is not the tightest enclosing rectangle {tight}")
        object.__setattr__(self, "coords", tuple((int(r), int(c)) for r, c in self.coords))
        object.__setattr__(self, "bbox", tight)


@dataclass(frozen=True)
class CoverageRow:
    label: int
    region_name: str
    voxel_count: int
    percentage: float


@dataclass(frozen=True)
class CoverageTable:
    """Per-region tally of an ROI mask, sorted by voxel count descending."""

    rows: Tuple[CoverageRow, ...]

    def __post_init__(self) -> None:
        rows = tuple(self.rows)
        counts = [r.voxel_count for r in rows]
        if counts != sorted(counts, reverse=True):
            raise ValueError("coverage rows must be sorted by voxel_count descending")
        if rows:
            total_pct = sum(r.percentage for r in rows)
            if abs(total_pct - 100.0) > 1e-6:
                raise ValueError(f"percentages must sum to 100, got {total_pct!r}")
        object.__setattr__(self, "rows", rows)

    @property
    def total_voxels(self) -> int:
        return sum(r.voxel_count for r in self.rows)

    def __len__(self) -> int:
        return len(self.rows)

    def __iter__(self):
        return iter(self.rows)


@dataclass(frozen=True)
class SegmentationResult:
    """Output of the adaptive thresholding pipeline for one sample."""

    mask: BinaryMask
    alpha_star: float
    threshold_value: float
    dsc: float
    iou: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.dsc <= 1.0 and 0.0 <= self.iou <= 1.0):
            raise ValueError("dsc and iou must lie in [0, 1]")
        if not (0.0 <= self.alpha_star <= 100.0):
            raise ValueError("alpha_star must be a percentile in [0, 100]")


def validate_heatmap(raw: Sequence[Sequence[float]] | np.ndarray) -> Heatmap:
    """Coerce a raw rectangular grid into a valid :class:`Heatmap`.

    Values already within [0, 1] pass through unchanged.  Otherwise the
    grid is min-max rescaled as ``(v - min) / (max - min)``; a constant
    (zero-range) out-of-range grid maps to all zeros, which downstream
    thresholding treats as "no salient region".

    Raises ``ValueError`` for empty grids, ragged rows or non-finite
    values.
    """
    v = np.asarray(raw, dtype=np.float64)
    if v.ndim != 2 or v.size == 0:
        raise ValueError(f"expected a nonempty rectangular 2D grid, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise ValueError("heatmap contains non-finite values")
    lo = float(v.min())
    hi = float(v.max())
    if lo < 0.0 or hi > 1.0:
        if hi == lo:
            v = np.zeros_like(v)
        else:
            v = (v - lo) / (hi - lo)
    return Heatmap(v)
