"""Connected-component labelling and region-property extraction.

Connectivity is 4-adjacency (shared edges only, no diagonals).  Labels
are assigned in raster-scan first-encounter order, so output is fully
deterministic for a given mask.
"""

from __future__ import annotations

from collections import deque
from typing import List

import numpy as np

from .core import BinaryMask, LabelGrid, RegionDescriptor

__all__ = ["label_components", "region_props", "extract_rois"]


def label_components(mask: BinaryMask) -> LabelGrid:
    """Label maximal 4-connected foreground regions 1..K; background stays 0."""
    h, w = mask.shape
    bits = mask.bits.tolist()
    labels = [[0] * w for _ in range(h)]
    next_label = 0
    for r in range(h):
        bit_row = bits[r]
        label_row = labels[r]
        for c in range(w):
            if not bit_row[c] or label_row[c]:
                continue
            next_label += 1
            label_row[c] = next_label
            queue = deque([(r, c)])
            while queue:
                i, j = queue.popleft()
                for ni, nj in ((i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)):
                    if 0 <= ni < h and 0 <= nj < w and bits[ni][nj] and not labels[ni][nj]:
                        labels[ni][nj] = next_label
                        queue.append((ni, nj))
    return LabelGrid(np.array(labels, dtype=np.int64))


def region_props(grid: LabelGrid) -> List[RegionDescriptor]:
    """One descriptor per label, ordered by ascending label index.

    For each region: raster-ordered (row, col) coords, the inclusive
    tight bounding box (x_min, y_min, x_max, y_max) with x = column,
    and the pixel area.
    """
    labels = grid.labels
    out: List[RegionDescriptor] = []
    for k in range(1, int(labels.max(initial=0)) + 1):
        rows, cols = np.nonzero(labels == k)
        if rows.size == 0:
            continue
        coords = tuple(zip(rows.tolist(), cols.tolist()))
        bbox = (int(cols.min()), int(rows.min()), int(cols.max()), int(rows.max()))
        out.append(RegionDescriptor(coords=coords, bbox=bbox, area=int(rows.size)))
    return out


def extract_rois(mask: BinaryMask) -> List[RegionDescriptor]:
    """Extract all ROIs from a binary mask.

    Equivalent to ``region_props(label_components(mask))``: the coord
    sets partition the mask foreground.
    """
    return region_props(label_components(mask))
