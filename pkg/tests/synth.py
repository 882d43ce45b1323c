"""Synthetic green-rectangle datasets for pipeline-level tests.

Each image is a gray field with one bright-green rectangle big enough to
survive speck filtering; its label mask is the same rectangle widened by
(index mod 3) columns, so predicted and true GVI disagree by a known,
size-dependent amount.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from greenview.dataset import ManifestEntry, SampleManifest, save_manifest
from greenview.imaging import VegetationMask, mask_to_png

from conftest import GRAY, GREEN, write_png


def build_dataset(
    root: Path,
    n_images: int,
    cities: tuple[str, ...] = ("alpha", "beta"),
    size: tuple[int, int] = (32, 32),
    seed: int = 0,
    images_per_point: int = 2,
    with_labels: bool = True,
) -> Path:
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    if with_labels:
        (root / "labels").mkdir(parents=True, exist_ok=True)
    w, h = size
    rng = np.random.default_rng(seed)
    entries = []
    for i in range(n_images):
        rect_h = int(rng.integers(12, min(20, h - 4)))
        rect_w = int(rng.integers(12, min(20, w - 6)))
        top = int(rng.integers(1, h - rect_h - 1))
        left = int(rng.integers(1, w - rect_w - 3))

        px = np.zeros((h, w, 3), dtype=np.uint8)
        px[:, :] = GRAY
        px[top:top + rect_h, left:left + rect_w] = GREEN
        image_id = f"syn_{i:04d}"
        image_path = root / "images" / f"{image_id}.png"
        write_png(image_path, px)

        label_path = None
        true_gvi = None
        if with_labels:
            bits = np.zeros((h, w), dtype=bool)
            bits[top:top + rect_h, left:left + rect_w + (i % 3)] = True
            label_path = root / "labels" / f"{image_id}.png"
            mask_to_png(VegetationMask(bits=bits), label_path)
            true_gvi = 100.0 * int(bits.sum()) / bits.size

        entries.append(
            ManifestEntry(
                id=image_id,
                city=cities[(i // images_per_point) % len(cities)],
                image_path=str(image_path),
                label_mask_path=str(label_path) if label_path else None,
                true_gvi=true_gvi,
                lat=1.0 + i * 0.001,
                lon=103.0 + i * 0.001,
                heading=float((i * 60) % 360),
                pitch=0.0,
                point_id=f"pt_{i // images_per_point:04d}",
            )
        )
    manifest_path = root / "manifest.csv"
    save_manifest(SampleManifest(entries=tuple(entries)), manifest_path)
    return manifest_path
