"""Core pixel types, image decoding, and the binary vegetation mask format.

Images are always materialized as 8-bit RGB; 16-bit sources are downscaled by
truncation (high byte kept). Masks are stored on disk as single-channel 8-bit
PNGs with 0 = non-vegetation and 255 = vegetation; any other pixel value is an
error rather than being rounded, so label-pipeline bugs surface immediately.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import (
    CorruptImage,
    NonBinaryMask,
    NotALabelImage,
    UnreadableFile,
    UnsupportedFormat,
)

SUPPORTED_FORMATS = {"PNG", "JPEG"}


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class RasterImage:
    """Decoded RGB street-level image plus its sampling provenance.

    pixels is a read-only (height, width, 3) uint8 array. location is
    (latitude, longitude) in degrees; pose is (heading [0, 360), pitch).
    """

    id: str
    pixels: np.ndarray
    city: str | None = None
    location: tuple[float, float] | None = None
    pose: tuple[float, float] | None = None

    def __post_init__(self):
        px = np.asarray(self.pixels)
        if px.dtype != np.uint8:
            raise ValueError(f"pixels must be uint8, got {px.dtype}")
        if px.ndim != 3 or px.shape[2] != 3:
            raise ValueError(f"pixels must have shape (h, w, 3), got {px.shape}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("image dimensions must be >= 1")
        object.__setattr__(self, "pixels", _frozen(px))

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]

    def __eq__(self, other):
        if not isinstance(other, RasterImage):
            return NotImplemented
        return (
            self.id == other.id
            and self.city == other.city
            and self.location == other.location
            and self.pose == other.pose
            and np.array_equal(self.pixels, other.pixels)
        )


@dataclass(frozen=True, eq=False)
class VegetationMask:
    """Per-pixel binary classification, True = vertical vegetation."""

    bits: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.bits)
        if b.dtype != np.bool_:
            raise ValueError(f"bits must be bool, got {b.dtype}")
        if b.ndim != 2:
            raise ValueError(f"bits must have shape (h, w), got {b.shape}")
        object.__setattr__(self, "bits", _frozen(b))

    @property
    def width(self) -> int:
        return self.bits.shape[1]

    @property
    def height(self) -> int:
        return self.bits.shape[0]

    @property
    def vegetation_pixel_count(self) -> int:
        return int(np.count_nonzero(self.bits))

    def __eq__(self, other):
        if not isinstance(other, VegetationMask):
            return NotImplemented
        return self.bits.shape == other.bits.shape and np.array_equal(self.bits, other.bits)


def _open_checked(path) -> Image.Image:
    path = Path(path)
    try:
        fh = open(path, "rb")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    try:
        img = Image.open(fh)
    except UnidentifiedImageError as exc:
        fh.close()
        raise UnsupportedFormat(f"{path}: not a recognized raster format") from exc
    except OSError as exc:
        fh.close()
        raise UnreadableFile(f"{path}: {exc}") from exc
    if img.format not in SUPPORTED_FORMATS:
        fh.close()
        raise UnsupportedFormat(f"{path}: format {img.format!r} not supported (PNG/JPEG only)")
    return img


def _load_pixels(img: Image.Image, path) -> Image.Image:
    try:
        img.load()
    except OSError as exc:
        raise CorruptImage(f"{path}: {exc}") from exc
    return img


def decode_image(path, id: str | None = None) -> RasterImage:
    """Decode a PNG/JPEG file to 8-bit RGB.

    Alpha is dropped, grayscale expanded to RGB, 16-bit channels truncated
    to their high byte. id defaults to the file stem.
    """
    img = _load_pixels(_open_checked(path), path)
    with img:
        if img.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
            arr = np.asarray(img, dtype=np.uint32)
            arr = (arr >> 8).astype(np.uint8)
            rgb = np.repeat(arr[:, :, None], 3, axis=2)
        else:
            try:
                rgb = np.asarray(img.convert("RGB"))
            except OSError as exc:
                raise CorruptImage(f"{path}: {exc}") from exc
    return RasterImage(id=id if id is not None else Path(path).stem, pixels=rgb)


def decode_label_image(path, id: str | None = None) -> RasterImage:
    """Decode a label raster, keeping palette indices as values.

    Palettized and grayscale label files (e.g. Cityscapes labelIds) are
    flattened to their index values and replicated across the three channels,
    so mask_from_label_image sees the raw class ids.
    """
    img = _load_pixels(_open_checked(path), path)
    with img:
        if img.mode in ("P", "L"):
            arr = np.asarray(img, dtype=np.uint8)
            rgb = np.repeat(arr[:, :, None], 3, axis=2)
        elif img.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
            arr = (np.asarray(img, dtype=np.uint32) >> 8).astype(np.uint8)
            rgb = np.repeat(arr[:, :, None], 3, axis=2)
        else:
            rgb = np.asarray(img.convert("RGB"))
    return RasterImage(id=id if id is not None else Path(path).stem, pixels=rgb)


def mask_from_label_image(img: RasterImage, vegetation_value: int) -> VegetationMask:
    """Collapse a flattened multi-class label raster into a binary mask.

    Every pixel whose (equal) channel value matches vegetation_value becomes
    True. Raises NotALabelImage if the three channels differ anywhere.
    """
    px = img.pixels
    if not (np.array_equal(px[:, :, 0], px[:, :, 1]) and np.array_equal(px[:, :, 0], px[:, :, 2])):
        raise NotALabelImage(f"{img.id}: channels differ, not a flattened label raster")
    return VegetationMask(bits=px[:, :, 0] == np.uint8(vegetation_value))


def mask_to_png(mask: VegetationMask, path) -> None:
    """Write a mask as a single-channel 8-bit PNG (0 / 255)."""
    arr = np.where(mask.bits, np.uint8(255), np.uint8(0))
    Image.fromarray(arr, mode="L").save(Path(path), format="PNG")


def mask_from_png(path) -> VegetationMask:
    """Read a mask written by mask_to_png; strictly 0/255 single-channel."""
    img = _load_pixels(_open_checked(path), path)
    with img:
        if img.format != "PNG":
            raise UnsupportedFormat(f"{path}: mask files must be PNG")
        arr = np.asarray(img)
    if arr.ndim != 2:
        raise NonBinaryMask(f"{path}: expected a single-channel mask, got mode {img.mode!r}")
    if arr.dtype != np.uint8:
        raise NonBinaryMask(f"{path}: expected 8-bit samples, got {arr.dtype}")
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        y, x = np.argwhere(bad)[0]
        raise NonBinaryMask(f"{path}: pixel ({int(x)}, {int(y)}) has value {int(arr[y, x])}, not 0/255")
    return VegetationMask(bits=arr == 255)
