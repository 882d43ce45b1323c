"""Evaluation metric suite: per-image IoU, mean IoU, MAE, Pearson's r, and
5%-95% signed-error bounds, plus the tabular report they feed.

Conventions pinned here: both-empty IoU is 1.0 (perfect agreement on
absence); mean IoU averages the vegetation-class IoU per image (a
dataset-pooled variant exists for comparison); quantiles use linear
interpolation between closest ranks (type 7). All arithmetic is 64-bit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import (
    DimensionMismatch,
    EmptyInput,
    InvalidQuantile,
    MissingMask,
    ZeroVariance,
)
from .imaging import VegetationMask


@dataclass(frozen=True)
class PairedSample:
    """One evaluation pair: estimated vs manually labeled GVI, optional masks."""

    id: str
    predicted_gvi: float
    true_gvi: float
    predicted_mask: VegetationMask | None = None
    true_mask: VegetationMask | None = None

    def __post_init__(self):
        for name, v in (("predicted_gvi", self.predicted_gvi), ("true_gvi", self.true_gvi)):
            if not 0.0 <= v <= 100.0:
                raise ValueError(f"{name} must be within [0, 100], got {v}")
        if self.predicted_mask is not None and self.true_mask is not None:
            if self.predicted_mask.bits.shape != self.true_mask.bits.shape:
                raise DimensionMismatch(
                    f"sample {self.id}: predicted mask {self.predicted_mask.bits.shape} "
                    f"vs true mask {self.true_mask.bits.shape}"
                )

    @property
    def error(self) -> float:
        """Signed estimation error, predicted minus true."""
        return self.predicted_gvi - self.true_gvi


@dataclass(frozen=True)
class EvaluationReport:
    """One table row of the model-comparison report.

    mean_iou is None when any evaluated sample lacks masks (direct-estimate
    models provide no intermediate segmentation, so their IoU is not
    computed). Bounds are signed percent errors at the configured quantiles.
    """

    mae: float
    pearson_r: float
    err_p5: float
    err_p95: float
    n: int
    mean_iou: float | None = None
    running_time_s_per_10k: float | None = None

    def __post_init__(self):
        if self.err_p5 > self.err_p95:
            raise ValueError("err_p5 must be <= err_p95")
        if not -1.0 - 1e-9 <= self.pearson_r <= 1.0 + 1e-9:
            raise ValueError(f"pearson_r out of [-1, 1]: {self.pearson_r}")
        if self.n < 2:
            raise ValueError("report requires n >= 2 (Pearson's r is undefined below)")

    def to_json(self) -> str:
        return json.dumps(
            {
                "mean_iou": self.mean_iou,
                "mae": self.mae,
                "pearson_r": self.pearson_r,
                "err_p5": self.err_p5,
                "err_p95": self.err_p95,
                "n": self.n,
                "running_time_s_per_10k": self.running_time_s_per_10k,
            },
            indent=2,
            sort_keys=True,
        ) + "\n"


def iou(pred: VegetationMask, truth: VegetationMask) -> float:
    """Intersection over union of two masks; 1.0 when both are entirely false."""
    if pred.bits.shape != truth.bits.shape:
        raise DimensionMismatch(f"{pred.bits.shape} vs {truth.bits.shape}")
    inter = int(np.count_nonzero(pred.bits & truth.bits))
    union = int(np.count_nonzero(pred.bits | truth.bits))
    if union == 0:
        return 1.0
    return inter / union


def mean_iou(samples: Sequence[PairedSample]) -> float:
    """100 x mean of per-image vegetation IoU. Every sample needs both masks."""
    if not samples:
        raise EmptyInput("no samples")
    total = 0.0
    for s in samples:
        if s.predicted_mask is None or s.true_mask is None:
            raise MissingMask(f"sample {s.id} lacks a mask")
        total += iou(s.predicted_mask, s.true_mask)
    return 100.0 * total / len(samples)


def pooled_iou(samples: Sequence[PairedSample]) -> float:
    """Dataset-pooled variant: one IoU over all pixels of all samples."""
    if not samples:
        raise EmptyInput("no samples")
    inter = union = 0
    for s in samples:
        if s.predicted_mask is None or s.true_mask is None:
            raise MissingMask(f"sample {s.id} lacks a mask")
        if s.predicted_mask.bits.shape != s.true_mask.bits.shape:
            raise DimensionMismatch(f"sample {s.id}")
        inter += int(np.count_nonzero(s.predicted_mask.bits & s.true_mask.bits))
        union += int(np.count_nonzero(s.predicted_mask.bits | s.true_mask.bits))
    return 100.0 if union == 0 else 100.0 * inter / union


def mae(samples: Sequence[PairedSample]) -> float:
    """Mean absolute difference between predicted and true GVI, in percent."""
    if not samples:
        raise EmptyInput("no samples")
    return math.fsum(abs(s.error) for s in samples) / len(samples)


def pearson_r(samples: Sequence[PairedSample]) -> float:
    """Pearson correlation between predicted and true GVI series (two-pass)."""
    if not samples:
        raise EmptyInput("no samples")
    n = len(samples)
    xs = [s.predicted_gvi for s in samples]
    ys = [s.true_gvi for s in samples]
    mx = math.fsum(xs) / n
    my = math.fsum(ys) / n
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("a constant series has no defined correlation")
    return sxy / math.sqrt(sxx * syy)


def _quantile_sorted(xs: Sequence[float], q: float) -> float:
    # linear interpolation between closest ranks (type 7)
    h = (len(xs) - 1) * q
    i = math.floor(h)
    frac = h - i
    if i + 1 >= len(xs) or frac == 0.0:
        return xs[i]
    return xs[i] + frac * (xs[i + 1] - xs[i])


def error_bounds(
    samples: Sequence[PairedSample], lo: float = 0.05, hi: float = 0.95
) -> tuple[float, float]:
    """Quantiles (lo, hi) of the signed errors predicted_gvi - true_gvi."""
    if not 0.0 <= lo <= 1.0 or not 0.0 <= hi <= 1.0 or lo > hi:
        raise InvalidQuantile(f"lo={lo}, hi={hi}")
    if not samples:
        raise EmptyInput("no samples")
    errs = sorted(s.error for s in samples)
    return _quantile_sorted(errs, lo), _quantile_sorted(errs, hi)


def evaluate(
    samples: Sequence[PairedSample],
    timing_s_per_10k: float | None = None,
    quantiles: tuple[float, float] = (0.05, 0.95),
) -> EvaluationReport:
    """Assemble the full report; independent of sample order.

    mean_iou is omitted when any sample lacks masks, mirroring estimators
    that produce no intermediate segmentation.
    """
    if not samples:
        raise EmptyInput("no samples")
    ordered = sorted(samples, key=lambda s: s.id)
    has_masks = all(s.predicted_mask is not None and s.true_mask is not None for s in ordered)
    p5, p95 = error_bounds(ordered, *quantiles)
    return EvaluationReport(
        mean_iou=mean_iou(ordered) if has_masks else None,
        mae=mae(ordered),
        pearson_r=pearson_r(ordered),
        err_p5=p5,
        err_p95=p95,
        n=len(ordered),
        running_time_s_per_10k=timing_s_per_10k,
    )


_COLUMNS = (
    "Mean IoU (%)",
    "MAE (%)",
    "Pearson's r",
    "5%-95% Error (%)",
    "Time per 10k (s)",
)


def _report_cells(report: EvaluationReport) -> tuple[str, ...]:
    return (
        "NA" if report.mean_iou is None else f"{report.mean_iou:g}",
        f"{report.mae:g}",
        f"{report.pearson_r:.3f}",
        f"{report.err_p5!r}, {report.err_p95!r}",
        "NA" if report.running_time_s_per_10k is None else f"{report.running_time_s_per_10k:g}",
    )


def render_table(rows: Sequence[tuple[str, EvaluationReport]]) -> str:
    """Aligned plain-text comparison table, one row per (label, report)."""
    header = ("Model",) + _COLUMNS
    body = [(label,) + _report_cells(rep) for label, rep in rows]
    widths = [max(len(header[c]), *(len(row[c]) for row in body)) if body else len(header[c])
              for c in range(len(header))]
    lines = []
    for row in [header] + body:
        cells = [row[0].ljust(widths[0])] + [row[c].rjust(widths[c]) for c in range(1, len(row))]
        lines.append("  ".join(cells).rstrip())
    return "\n".join(lines) + "\n"
