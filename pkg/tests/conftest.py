from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def fixtures() -> Path:
    return FIXTURES


def random_mask(rng: np.random.Generator, h: int, w: int, p: float = 0.5) -> np.ndarray:
    return rng.random((h, w)) < p


def random_blobby_mask(rng: np.random.Generator, h: int, w: int) -> np.ndarray:
    """Masks with spatial structure (a few rectangles/disks), not iid noise."""
    mask = np.zeros((h, w), dtype=bool)
    for _ in range(rng.integers(1, 4)):
        r0, c0 = rng.integers(0, h), rng.integers(0, w)
        if rng.random() < 0.5:
            r1 = min(h, r0 + int(rng.integers(1, max(2, h // 2))))
            c1 = min(w, c0 + int(rng.integers(1, max(2, w // 2))))
            mask[r0:r1, c0:c1] = True
        else:
            rad = int(rng.integers(1, max(2, min(h, w) // 3)))
            yy, xx = np.mgrid[0:h, 0:w]
            mask |= (yy - r0) ** 2 + (xx - c0) ** 2 <= rad * rad
    return mask
