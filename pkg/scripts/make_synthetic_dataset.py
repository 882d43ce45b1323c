#!/usr/bin/env python3
"""Generate a synthetic labeled dataset for demos and benchmarks.

Gray scenes with bright-green rectangles plus speck noise; labels are the
rectangles alone, so the threshold-and-cluster defaults recover them almost
exactly and the evaluate command has something nontrivial to score.
"""

import argparse
from pathlib import Path

import numpy as np

from greenview.dataset import ManifestEntry, SampleManifest, save_manifest
from greenview.imaging import VegetationMask, mask_to_png
from PIL import Image


def make_scene(rng, w, h):
    px = np.zeros((h, w, 3), dtype=np.uint8)
    px[:, :] = (128, 128, 128)
    bits = np.zeros((h, w), dtype=bool)
    for _ in range(rng.integers(1, 3)):
        rect_h = int(rng.integers(12, max(13, h // 3)))
        rect_w = int(rng.integers(12, max(13, w // 3)))
        top = int(rng.integers(0, h - rect_h))
        left = int(rng.integers(0, w - rect_w))
        px[top:top + rect_h, left:left + rect_w] = (30, 200, 40)
        bits[top:top + rect_h, left:left + rect_w] = True
    for _ in range(int(rng.integers(5, 30))):  # specks the filter should drop
        r, c = int(rng.integers(0, h)), int(rng.integers(0, w))
        px[r, c] = (30, 220, 30)
    return px, bits


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", required=True, help="dataset root directory")
    parser.add_argument("--images", type=int, default=100)
    parser.add_argument("--size", type=int, nargs=2, default=(128, 128), metavar=("W", "H"))
    parser.add_argument("--cities", nargs="+", default=["alpha", "beta"])
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    root = Path(args.out)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)
    w, h = args.size

    entries = []
    for i in range(args.images):
        px, bits = make_scene(rng, w, h)
        image_id = f"syn_{i:05d}"
        image_path = root / "images" / f"{image_id}.png"
        label_path = root / "labels" / f"{image_id}.png"
        Image.fromarray(px).save(image_path)
        mask_to_png(VegetationMask(bits=bits), label_path)
        entries.append(
            ManifestEntry(
                id=image_id,
                city=args.cities[i % len(args.cities)],
                image_path=str(image_path),
                label_mask_path=str(label_path),
                true_gvi=100.0 * int(bits.sum()) / bits.size,
                point_id=f"pt_{i // 2:05d}",
            )
        )
    manifest_path = root / "manifest.csv"
    save_manifest(SampleManifest(entries=tuple(entries)), manifest_path)
    print(f"wrote {len(entries)} images + labels, manifest at {manifest_path}")


if __name__ == "__main__":
    main()
