"""Green View Index computation and aggregation across poses, points, cities.

GVI is the percentage of pixels classified as vertical vegetation, carried in
percent (0-100) everywhere. Point- and city-level values are unweighted means
over the next finer scope; a pooled-pixel alternative is available by passing
explicit weights.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from .errors import EmptyAggregate, EmptyMask, MixedScope
from .imaging import VegetationMask

SCOPES = ("image", "point", "city")
SOURCES = ("baseline", "mask_backend", "direct_estimate", "manual_label")

_FINER = {"point": "image", "city": "point"}


@dataclass(frozen=True)
class GviMeasurement:
    """One GVI value with its aggregation lineage."""

    value: float
    scope: str
    n_images: int
    source: str

    def __post_init__(self):
        if not 0.0 <= self.value <= 100.0:
            raise ValueError(f"GVI must be within [0, 100], got {self.value}")
        if self.scope not in SCOPES:
            raise ValueError(f"unknown scope {self.scope!r}")
        if self.n_images < 1:
            raise ValueError("n_images must be >= 1")
        if self.source not in SOURCES:
            raise ValueError(f"unknown source {self.source!r}")


def gvi_of_mask(mask: VegetationMask, source: str = "manual_label") -> GviMeasurement:
    """Per-image GVI: 100 * vegetation pixels / total pixels."""
    total = mask.width * mask.height
    if total == 0:
        raise EmptyMask("mask has zero pixels")
    value = 100.0 * mask.vegetation_pixel_count / total
    return GviMeasurement(value=value, scope="image", n_images=1, source=source)


def aggregate(
    measurements: Sequence[GviMeasurement],
    scope: str,
    weights: Sequence[float] | None = None,
) -> GviMeasurement:
    """Average measurements of the immediately finer scope into one value.

    Unweighted arithmetic mean by default; pass weights (e.g. pixel totals
    per image) for the pooled variant. Callers needing bit-identical results
    across worker counts must fix the input order (sort by id) themselves.
    """
    if not measurements:
        raise EmptyAggregate("nothing to aggregate")
    finer = _FINER.get(scope)
    if finer is None:
        raise MixedScope(f"aggregation scope must be point or city, got {scope!r}")
    for m in measurements:
        if m.scope != finer:
            raise MixedScope(f"expected {finer!r} inputs for {scope!r} aggregate, got {m.scope!r}")
    sources = {m.source for m in measurements}
    if len(sources) > 1:
        raise ValueError(f"cannot aggregate across sources: {sorted(sources)}")

    if weights is None:
        value = math.fsum(m.value for m in measurements) / len(measurements)
    else:
        if len(weights) != len(measurements):
            raise ValueError("weights length must match measurements")
        wsum = math.fsum(weights)
        if wsum <= 0:
            raise ValueError("weights must sum to a positive value")
        value = math.fsum(w * m.value for w, m in zip(weights, measurements)) / wsum
    return GviMeasurement(
        value=value,
        scope=scope,
        n_images=sum(m.n_images for m in measurements),
        source=next(iter(sources)),
    )
