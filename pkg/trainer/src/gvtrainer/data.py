"""Dataset plumbing: manifest CSV reading, mask/image loading, synthetic data.

Talks to the GVI toolkit purely through its file formats: the manifest CSV
(header id,city,image_path,label_mask_path,true_gvi,lat,lon,heading,pitch,
point_id,split) and single-channel 0/255 mask PNGs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch
from PIL import Image
from torch.utils.data import Dataset

NORM_MEAN = (0.5, 0.5, 0.5)
NORM_STD = (0.5, 0.5, 0.5)


@dataclass(frozen=True)
class Sample:
    id: str
    image_path: str
    label_mask_path: str | None
    true_gvi: float | None
    split: str | None


def read_manifest(path) -> list[Sample]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        samples = []
        for row in reader:
            samples.append(
                Sample(
                    id=row["id"],
                    image_path=row["image_path"],
                    label_mask_path=row["label_mask_path"] or None,
                    true_gvi=float(row["true_gvi"]) if row["true_gvi"] else None,
                    split=row["split"] or None,
                )
            )
    return samples


def load_image(path, resolution: int) -> torch.Tensor:
    """RGB image -> normalized float tensor (3, R, R)."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        if rgb.size != (resolution, resolution):
            rgb = rgb.resize((resolution, resolution), Image.BILINEAR)
        arr = np.asarray(rgb, dtype=np.float32) / 255.0
    mean = np.asarray(NORM_MEAN, dtype=np.float32)
    std = np.asarray(NORM_STD, dtype=np.float32)
    return torch.from_numpy(((arr - mean) / std).transpose(2, 0, 1).copy())


def load_mask(path, resolution: int) -> torch.Tensor:
    """0/255 mask PNG -> int64 tensor (R, R) of {0, 1}."""
    with Image.open(path) as img:
        if img.size != (resolution, resolution):
            img = img.resize((resolution, resolution), Image.NEAREST)
        arr = np.asarray(img)
    return torch.from_numpy((arr >= 128).astype(np.int64))


class SegmentationDataset(Dataset):
    def __init__(self, samples: list[Sample], resolution: int):
        self.samples = [s for s in samples if s.label_mask_path]
        if not self.samples:
            raise ValueError("no samples with label masks")
        self.resolution = resolution

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        s = self.samples[i]
        return load_image(s.image_path, self.resolution), load_mask(s.label_mask_path, self.resolution)


class RegressionDataset(Dataset):
    def __init__(self, samples: list[Sample], resolution: int):
        self.samples = [s for s in samples if s.true_gvi is not None]
        if not self.samples:
            raise ValueError("no samples with true_gvi")
        self.resolution = resolution

    def __len__(self):
        return len(self.samples)

    def __getitem__(self, i):
        s = self.samples[i]
        return load_image(s.image_path, self.resolution), torch.tensor([s.true_gvi], dtype=torch.float32)


GRAY = (128, 128, 128)
GREEN = (30, 200, 40)


def synthetic_scene(rng: np.random.Generator, resolution: int) -> tuple[np.ndarray, np.ndarray]:
    """Gray field with one or two green rectangles; returns (rgb, bits)."""
    px = np.zeros((resolution, resolution, 3), dtype=np.uint8)
    px[:, :] = GRAY
    bits = np.zeros((resolution, resolution), dtype=bool)
    for _ in range(int(rng.integers(1, 3))):
        side = resolution // 3
        rect_h = int(rng.integers(side // 2, side + 1))
        rect_w = int(rng.integers(side // 2, side + 1))
        top = int(rng.integers(0, resolution - rect_h))
        left = int(rng.integers(0, resolution - rect_w))
        px[top:top + rect_h, left:left + rect_w] = GREEN
        bits[top:top + rect_h, left:left + rect_w] = True
    return px, bits


def write_mask_png(bits: np.ndarray, path) -> None:
    Image.fromarray(np.where(bits, 255, 0).astype(np.uint8), mode="L").save(path, format="PNG")


def make_synthetic_dataset(root, n_images: int, resolution: int = 64, seed: int = 0) -> Path:
    """Green-rectangle images + exact labels + manifest, in the toolkit's formats."""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    (root / "labels").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)
    header = "id,city,image_path,label_mask_path,true_gvi,lat,lon,heading,pitch,point_id,split"
    lines = [header]
    for i in range(n_images):
        px, bits = synthetic_scene(rng, resolution)
        image_id = f"toy_{i:04d}"
        image_path = root / "images" / f"{image_id}.png"
        label_path = root / "labels" / f"{image_id}.png"
        Image.fromarray(px).save(image_path, format="PNG")
        write_mask_png(bits, label_path)
        gvi = 100.0 * int(bits.sum()) / bits.size
        lines.append(f"{image_id},toyville,{image_path},{label_path},{gvi!r},,,,,,")
    manifest = root / "manifest.csv"
    manifest.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return manifest
