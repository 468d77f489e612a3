from __future__ import annotations

import sys
from pathlib import Path

import numpy as np
import pytest
from PIL import Image

sys.path.insert(0, str(Path(__file__).parent))

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)


def write_gray_png(path: Path, raw: np.ndarray) -> Path:
    """Write raw uint8 grayscale bytes as PNG (independent of the package I/O)."""
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raw.astype(np.uint8), mode="L").save(path)
    return path


def blob_mask(h: int, w: int, r0: int, c0: int, r1: int, c1: int) -> np.ndarray:
    """Rectangular foreground blob, handy for non-degenerate ground truths."""
    gt = np.zeros((h, w), dtype=np.uint8)
    gt[r0:r1, c0:c1] = 1
    return gt
