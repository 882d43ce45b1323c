from __future__ import annotations

import numpy as np
import pytest
from PIL import Image

from greenview.imaging import RasterImage, VegetationMask

GREEN = (0, 255, 0)
GRAY = (128, 128, 128)


def solid_image(w: int, h: int, rgb: tuple[int, int, int], id: str = "img") -> RasterImage:
    px = np.zeros((h, w, 3), dtype=np.uint8)
    px[:, :] = rgb
    return RasterImage(id=id, pixels=px)


def image_from_array(arr: np.ndarray, id: str = "img") -> RasterImage:
    return RasterImage(id=id, pixels=np.asarray(arr, dtype=np.uint8))


def mask_of(bits) -> VegetationMask:
    return VegetationMask(bits=np.asarray(bits, dtype=bool))


def write_png(path, arr: np.ndarray, mode: str | None = None) -> None:
    Image.fromarray(arr, mode=mode).save(path, format="PNG")


def speck_fixture_image() -> RasterImage:
    """100x100 gray image with one 30x30 green square and 20 isolated specks.

    Segmenting with default config must keep exactly the square: 900 of
    10,000 pixels -> GVI 9.0.
    """
    px = np.zeros((100, 100, 3), dtype=np.uint8)
    px[:, :] = GRAY
    px[10:40, 10:40] = GREEN
    rng = np.random.default_rng(7)
    placed = 0
    occupied = {(r, c) for r in range(8, 42) for c in range(8, 42)}
    while placed < 20:
        r = int(rng.integers(0, 100))
        c = int(rng.integers(0, 100))
        neighborhood = {(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)}
        if neighborhood & occupied:
            continue
        px[r, c] = GREEN
        occupied |= neighborhood
        placed += 1
    return RasterImage(id="speck_fixture", pixels=px)


@pytest.fixture
def speck_image() -> RasterImage:
    return speck_fixture_image()
