"""Aligns ROI masks with a labeled atlas volume and tallies region coverage.

The atlas's first two axes map to (row, col) of the extracted slice;
orientation correction of real-world volumes is the loader's concern
(see :mod:`mriexplain.formats`), not this module's.
"""

from __future__ import annotations

import warnings
from typing import Tuple

import numpy as np

from .core import Atlas, BinaryMask, CoverageRow, CoverageTable, LabelGrid, UnknownAtlasLabelWarning

__all__ = ["extract_slice", "resample_nearest", "map_rois"]


def extract_slice(atlas: Atlas, z: int) -> LabelGrid:
    """Axial slice A[:, :, z] of the atlas volume as a 2D label grid."""
    depth = atlas.dims[2]
    if not 0 <= z < depth:
        raise IndexError(f"slice index {z} out of range for atlas with {depth} slices")
    return LabelGrid(atlas.labels[:, :, z])


def resample_nearest(grid: LabelGrid, target: Tuple[int, int]) -> LabelGrid:
    """Nearest-neighbour (order 0) resample to ``target`` = (height, width).

    Output pixel (i, j) takes the source value at
    (floor(i * src_h / out_h), floor(j * src_w / out_w)), so the output
    never contains a label absent from the source.
    """
    out_h, out_w = target
    if out_h <= 0 or out_w <= 0:
        raise ValueError(f"target dims must be positive, got {target}")
    src_h, src_w = grid.shape
    rows = (np.arange(out_h) * src_h) // out_h
    cols = (np.arange(out_w) * src_w) // out_w
    return LabelGrid(grid.labels[np.ix_(rows, cols)])


def map_rois(mask: BinaryMask, atlas: Atlas, z: int) -> CoverageTable:
    """Tally which named atlas regions the mask foreground lands on.

    The z-th axial slice is resampled to the mask shape, labels are read
    at foreground pixels, background (label 0) is filtered out, and the
    remaining labels are counted.  Rows are sorted by voxel count
    descending (ties by ascending label).  A nonzero label with no name
    entry yields an ``UNKNOWN(<label>)`` row plus a warning, not a
    failure.
    """
    grid = resample_nearest(extract_slice(atlas, z), mask.shape)
    resampled = np.rint(grid.labels).astype(np.int64)
    picked = resampled[mask.bits]
    picked = picked[picked != 0]
    if picked.size == 0:
        return CoverageTable(rows=())

    labels, counts = np.unique(picked, return_counts=True)
    total = int(counts.sum())
    order = sorted(range(len(labels)), key=lambda i: (-int(counts[i]), int(labels[i])))
    rows = []
    for i in order:
        label = int(labels[i])
        name = atlas.names.get(label)
        if name is None:
            name = f"UNKNOWN({label})"
            warnings.warn(
                f"atlas label {label} has no entry in the region-name table",
                UnknownAtlasLabelWarning,
                stacklevel=2,
            )
        rows.append(
            CoverageRow(
                label=label,
                region_name=name,
                voxel_count=int(counts[i]),
                percentage=int(counts[i]) / total * 100.0,
            )
        )
    return CoverageTable(rows=tuple(rows))
