"""Independent brute-force reference implementations.

Everything here favors obviousness over speed and deliberately avoids the
package's own code paths: flood fill instead of union-find, per-pixel loops
instead of vectorized counts, textbook formulas instead of stable-summation
variants.
"""

from __future__ import annotations

import math
from collections import deque

import numpy as np


def flood_fill_components(bits: np.ndarray, connectivity: int) -> list[list[tuple[int, int]]]:
    """All connected components of True pixels, by BFS flood fill."""
    h, w = bits.shape
    if connectivity == 4:
        offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        offsets = [(dr, dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1) if (dr, dc) != (0, 0)]
    seen = np.zeros_like(bits, dtype=bool)
    components = []
    for r in range(h):
        for c in range(w):
            if bits[r, c] and not seen[r, c]:
                queue = deque([(r, c)])
                seen[r, c] = True
                comp = []
                while queue:
                    cr, cc = queue.popleft()
                    comp.append((cr, cc))
                    for dr, dc in offsets:
                        nr, nc = cr + dr, cc + dc
                        if 0 <= nr < h and 0 <= nc < w and bits[nr, nc] and not seen[nr, nc]:
                            seen[nr, nc] = True
                            queue.append((nr, nc))
                components.append(comp)
    return components


def remove_small_components(bits: np.ndarray, min_area: int, connectivity: int) -> np.ndarray:
    out = np.zeros_like(bits)
    for comp in flood_fill_components(bits, connectivity):
        if len(comp) >= min_area:
            for r, c in comp:
                out[r, c] = True
    return out


def iou_pixels(pred: np.ndarray, truth: np.ndarray) -> float:
    inter = union = 0
    h, w = pred.shape
    for r in range(h):
        for c in range(w):
            if pred[r, c] and truth[r, c]:
                inter += 1
            if pred[r, c] or truth[r, c]:
                union += 1
    return 1.0 if union == 0 else inter / union


def mae_direct(pairs: list[tuple[float, float]]) -> float:
    total = 0.0
    for pred, true in pairs:
        total += abs(pred - true)
    return total / len(pairs)


def pearson_direct(xs: list[float], ys: list[float]) -> float:
    n = len(xs)
    mx = sum(xs) / n
    my = sum(ys) / n
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    den = math.sqrt(sum((x - mx) ** 2 for x in xs) * sum((y - my) ** 2 for y in ys))
    return num / den


def quantile_linear(values: list[float], q: float) -> float:
    """numpy's default (type 7) quantile, used as the independent check."""
    return float(np.quantile(np.asarray(values, dtype=np.float64), q))


def haversine_atan2(a: tuple[float, float], b: tuple[float, float], radius: float) -> float:
    """atan2 form of the haversine distance (package uses the asin form)."""
    lat1, lon1 = map(math.radians, a)
    lat2, lon2 = map(math.radians, b)
    s = math.sin((lat2 - lat1) / 2) ** 2 + math.cos(lat1) * math.cos(lat2) * math.sin((lon2 - lon1) / 2) ** 2
    return 2 * radius * math.atan2(math.sqrt(s), math.sqrt(1 - s))
