"""Classical "threshold and cluster" vegetation segmenter.

Pixels are first color-thresholded in RGB (green dominance plus an
excess-green margin on 2G - R - B), then connected components smaller than a
minimum area are cleared to drop misidentified green specks. Component
labeling is a deterministic two-pass union-find over row runs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .imaging import RasterImage, VegetationMask


@dataclass(frozen=True)
class BaselineConfig:
    """Tuning knobs for the threshold-and-cluster segmenter.

    green_dominance_margin of 0 means strict G > R and G > B. The
    excess-green threshold applies to 2G - R - B and may be negative for a
    permissive mode.
    """

    green_dominance_margin: int = 0
    excess_green_threshold: int = 10
    min_cluster_area: int = 100
    connectivity: int = 4

    def __post_init__(self):
        if not 0 <= self.green_dominance_margin <= 255:
            raise ValueError("green_dominance_margin must be an 8-bit value")
        if self.min_cluster_area < 0:
            raise ValueError("min_cluster_area must be >= 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")


def threshold_green(img: RasterImage, cfg: BaselineConfig = BaselineConfig()) -> VegetationMask:
    """Mark pixels where G > R + margin, G > B + margin, and 2G - R - B > threshold."""
    px = img.pixels.astype(np.int32)
    r, g, b = px[:, :, 0], px[:, :, 1], px[:, :, 2]
    m = cfg.green_dominance_margin
    bits = (g > r + m) & (g > b + m) & (2 * g - r - b > cfg.excess_green_threshold)
    return VegetationMask(bits=bits)


class _UnionFind:
    __slots__ = ("parent", "size")

    def __init__(self, n: int):
        self.parent = list(range(n))
        self.size = [1] * n

    def find(self, x: int) -> int:
        parent = self.parent
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    def union(self, a: int, b: int) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return
        if self.size[ra] < self.size[rb]:
            ra, rb = rb, ra
        self.parent[rb] = ra
        self.size[ra] += self.size[rb]


def _row_runs(row: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start (inclusive) and end (exclusive) columns of True runs in one row."""
    d = np.diff(row.astype(np.int8), prepend=np.int8(0), append=np.int8(0))
    return np.flatnonzero(d == 1), np.flatnonzero(d == -1)


def filter_clusters(mask: VegetationMask, cfg: BaselineConfig = BaselineConfig()) -> VegetationMask:
    """Clear connected components with area < cfg.min_cluster_area.

    4- or 8-connectivity per cfg; all surviving bits are left untouched, so
    the output vegetation count never exceeds the input count.
    """
    if cfg.min_cluster_area <= 1:
        return mask
    bits = mask.bits
    height = bits.shape[0]
    # reach = 0 joins only column-overlapping runs (4-conn); 1 also joins
    # diagonal touches (8-conn)
    reach = 0 if cfg.connectivity == 4 else 1

    starts_all: list[np.ndarray] = []
    ends_all: list[np.ndarray] = []
    first_id = [0] * (height + 1)
    n_runs = 0
    for r in range(height):
        s, e = _row_runs(bits[r])
        starts_all.append(s)
        ends_all.append(e)
        first_id[r] = n_runs
        n_runs += len(s)
    first_id[height] = n_runs

    uf = _UnionFind(n_runs)
    for r in range(1, height):
        ps, pe = starts_all[r - 1], ends_all[r - 1]
        cs, ce = starts_all[r], ends_all[r]
        i = j = 0
        pid, cid = first_id[r - 1], first_id[r]
        while i < len(ps) and j < len(cs):
            if ps[i] < ce[j] + reach and cs[j] < pe[i] + reach:
                uf.union(pid + i, cid + j)
            if pe[i] <= ce[j]:
                i += 1
            else:
                j += 1

    area = [0] * n_runs
    for r in range(height):
        s, e, base = starts_all[r], ends_all[r], first_id[r]
        for k in range(len(s)):
            area[uf.find(base + k)] += int(e[k] - s[k])

    out = np.zeros_like(bits)
    for r in range(height):
        s, e, base = starts_all[r], ends_all[r], first_id[r]
        row = out[r]
        for k in range(len(s)):
            if area[uf.find(base + k)] >= cfg.min_cluster_area:
                row[s[k]:e[k]] = True
    return VegetationMask(bits=out)


def segment(img: RasterImage, cfg: BaselineConfig = BaselineConfig()) -> VegetationMask:
    """threshold_green followed by filter_clusters; fully deterministic."""
    return filter_clusters(threshold_green(img, cfg), cfg)
