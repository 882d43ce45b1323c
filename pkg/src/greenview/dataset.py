"""Manifest-driven dataset ingestion, Cityscapes binary conversion, splitting.

The manifest is a UTF-8 CSV with header
``id,city,image_path,label_mask_path,true_gvi,lat,lon,heading,pitch,point_id,split``
and empty fields for absent optionals. Floats round-trip at full precision.
"""

from __future__ import annotations

import csv
import dataclasses
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .errors import (
    DuplicateId,
    MalformedRow,
    MissingColumn,
    OrphanLabel,
    SizeMismatch,
    UnreadableFile,
)
from .gvi import gvi_of_mask
from .imaging import decode_label_image, mask_from_label_image, mask_to_png

COLUMNS = (
    "id", "city", "image_path", "label_mask_path", "true_gvi",
    "lat", "lon", "heading", "pitch", "point_id", "split",
)
SPLITS = ("train", "val", "test")

CITYSCAPES_VEGETATION_ID = 21  # `vegetation` class id in the Cityscapes label schema


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    city: str
    image_path: str
    label_mask_path: str | None = None
    true_gvi: float | None = None
    lat: float | None = None
    lon: float | None = None
    heading: float | None = None
    pitch: float | None = None
    point_id: str | None = None
    split: str | None = None

    def __post_init__(self):
        if not self.id:
            raise ValueError("entry id must be non-empty")
        if self.true_gvi is not None and not 0.0 <= self.true_gvi <= 100.0:
            raise ValueError(f"true_gvi out of [0, 100]: {self.true_gvi}")
        if self.split is not None and self.split not in SPLITS:
            raise ValueError(f"unknown split {self.split!r}")
        if self.lat is not None and not -90.0 <= self.lat <= 90.0:
            raise ValueError(f"latitude out of range: {self.lat}")
        if self.lon is not None and not -180.0 <= self.lon <= 180.0:
            raise ValueError(f"longitude out of range: {self.lon}")
        if self.heading is not None and not 0.0 <= self.heading < 360.0:
            raise ValueError(f"heading out of [0, 360): {self.heading}")


@dataclass(frozen=True)
class SampleManifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        object.__setattr__(self, "entries", tuple(self.entries))
        seen = set()
        for e in self.entries:
            if e.id in seen:
                raise DuplicateId(e.id)
            seen.add(e.id)

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[ManifestEntry]:
        return iter(self.entries)

    def cities(self) -> list[str]:
        return sorted({e.city for e in self.entries})


def _parse_optional_float(raw: str, field: str, row_number: int) -> float | None:
    if raw == "":
        return None
    try:
        return float(raw)
    except ValueError as exc:
        raise MalformedRow(row_number, f"{field}: not a number: {raw!r}") from exc


def load_manifest(path) -> SampleManifest:
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise UnreadableFile(f"{path}: {exc}") from exc
    entries = []
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file")
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise MissingColumn(f"{path}: missing columns {missing}")
        index = {c: header.index(c) for c in COLUMNS}
        seen: set[str] = set()
        for row_number, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise MalformedRow(row_number, f"expected {len(header)} fields, got {len(row)}")
            get = lambda c: row[index[c]]
            if get("id") in seen:
                raise DuplicateId(f"row {row_number}: duplicate id {get('id')!r}")
            seen.add(get("id"))
            try:
                entry = ManifestEntry(
                    id=get("id"),
                    city=get("city"),
                    image_path=get("image_path"),
                    label_mask_path=get("label_mask_path") or None,
                    true_gvi=_parse_optional_float(get("true_gvi"), "true_gvi", row_number),
                    lat=_parse_optional_float(get("lat"), "lat", row_number),
                    lon=_parse_optional_float(get("lon"), "lon", row_number),
                    heading=_parse_optional_float(get("heading"), "heading", row_number),
                    pitch=_parse_optional_float(get("pitch"), "pitch", row_number),
                    point_id=get("point_id") or None,
                    split=get("split") or None,
                )
            except ValueError as exc:
                raise MalformedRow(row_number, str(exc)) from exc
            entries.append(entry)
    return SampleManifest(entries=tuple(entries))


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(float(value))  # float() normalizes numpy scalars
    return str(value)


def save_manifest(manifest: SampleManifest, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(COLUMNS)
        for e in manifest:
            writer.writerow([_fmt(getattr(e, c)) for c in COLUMNS])


def split_dataset(
    manifest: SampleManifest,
    sizes: tuple[int, int, int],
    seed: int,
    stratify_by_city: bool = True,
) -> SampleManifest:
    """Assign train/val/test splits, deterministically for a fixed seed.

    Stratified mode apportions each city's entries to the splits as evenly
    as the requested sizes allow (floor quotas, leftovers to the largest
    fractional remainders with global capacity). Entry order is preserved.
    """
    n = len(manifest)
    if sum(sizes) != n:
        raise SizeMismatch(f"sizes {sizes} sum to {sum(sizes)}, manifest has {n} entries")
    if any(s < 0 for s in sizes):
        raise SizeMismatch(f"negative split size in {sizes}")
    if any(e.split is not None for e in manifest):
        raise ValueError("manifest entries already carry split assignments")

    rng = random.Random(seed)
    assignment: dict[str, str] = {}

    if not stratify_by_city:
        ids = [e.id for e in manifest]
        rng.shuffle(ids)
        bounds = (sizes[0], sizes[0] + sizes[1], n)
        for i, eid in enumerate(ids):
            assignment[eid] = SPLITS[0] if i < bounds[0] else SPLITS[1] if i < bounds[1] else SPLITS[2]
    else:
        by_city: dict[str, list[str]] = {}
        for e in manifest:
            by_city.setdefault(e.city, []).append(e.id)
        needs = list(sizes)
        plans = []
        for city in sorted(by_city):
            ids = by_city[city]
            rng.shuffle(ids)
            # exact integer quotas: base floor plus fractional remainder num/n
            base = [len(ids) * s // n for s in sizes]
            frac_num = [len(ids) * s % n for s in sizes]
            rem = len(ids) - sum(base)
            plans.append((ids, base, _extra_options(frac_num, rem)))
            for k in range(3):
                needs[k] -= base[k]
        extras = _assign_extras(plans, needs)
        for (ids, base, _), extra in zip(plans, extras):
            counts = list(base)
            for k in extra:
                counts[k] += 1
            cursor = 0
            for k in range(3):
                for eid in ids[cursor:cursor + counts[k]]:
                    assignment[eid] = SPLITS[k]
                cursor += counts[k]

    return SampleManifest(
        entries=tuple(dataclasses.replace(e, split=assignment[e.id]) for e in manifest)
    )


def _extra_options(frac_num: list[int], rem: int) -> list[tuple[int, ...]]:
    """Ways to place a city's leftover entries, one per split with a
    nonzero fractional quota (keeps every count at floor or ceil)."""
    if rem == 0:
        return [()]
    allowed = [k for k in range(3) if frac_num[k] > 0]
    if rem == 1:
        singles = sorted(allowed, key=lambda k: (-frac_num[k], k))
        return [(k,) for k in singles]
    pairs = [(a, b) for i, a in enumerate(allowed) for b in allowed[i + 1:]]
    pairs.sort(key=lambda p: (-(frac_num[p[0]] + frac_num[p[1]]), p))
    return pairs


def _assign_extras(plans, needs: list[int]) -> list[tuple[int, ...]]:
    """Pick one leftover-placement option per city so the global split
    sizes come out exact. Always solvable (2-D controlled rounding);
    the memoized search is deterministic and prefers larger remainders."""
    failed: set[tuple[int, int, int]] = set()
    chosen: list[tuple[int, ...]] = [()] * len(plans)

    def dfs(i: int, nt: int, nv: int, ns: int) -> bool:
        if i == len(plans):
            return nt == nv == ns == 0
        if (i, nt, nv) in failed:
            return False
        remaining = [nt, nv, ns]
        for option in plans[i][2]:
            if all(remaining[k] > 0 for k in option):
                taken = [remaining[k] - (1 if k in option else 0) for k in range(3)]
                if dfs(i + 1, *taken):
                    chosen[i] = option
                    return True
        failed.add((i, nt, nv))
        return False

    if not dfs(0, *needs):
        raise AssertionError("controlled rounding infeasible; should not happen")
    return chosen


def convert_cityscapes(
    labels_dir,
    images_dir,
    out_dir,
    vegetation_label_id: int = CITYSCAPES_VEGETATION_ID,
    workers: int = 4,
) -> SampleManifest:
    """Collapse multi-class label rasters to binary vegetation masks.

    Expects ``<labels_dir>/<city>/<name>_labelIds.png`` paired with
    ``<images_dir>/<city>/<name>_leftImg8bit.png``. Writes one mask PNG per
    label into out_dir, computes true_gvi from the mask, and returns the
    manifest (rows sorted by id).
    """
    labels_dir, images_dir, out_dir = Path(labels_dir), Path(images_dir), Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    label_files = sorted(labels_dir.glob("*/*_labelIds.png"))

    def convert_one(label_path: Path) -> ManifestEntry:
        city = label_path.parent.name
        name = label_path.name[: -len("_labelIds.png")]
        image_path = images_dir / city / f"{name}_leftImg8bit.png"
        if not image_path.is_file():
            raise OrphanLabel(f"{label_path}: no image at {image_path}")
        sample_id = f"{city}_{name}"
        label_img = decode_label_image(label_path, id=sample_id)
        mask = mask_from_label_image(label_img, vegetation_label_id)
        mask_path = out_dir / f"{sample_id}.png"
        mask_to_png(mask, mask_path)
        return ManifestEntry(
            id=sample_id,
            city=city,
            image_path=str(image_path),
            label_mask_path=str(mask_path),
            true_gvi=gvi_of_mask(mask).value,
        )

    if workers <= 1:
        entries = [convert_one(p) for p in label_files]
    else:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            entries = list(ex.map(convert_one, label_files))
    return SampleManifest(entries=tuple(sorted(entries, key=lambda e: e.id)))
