"""Batch toolkit for Green View Index estimation and evaluation."""

from .baseline import BaselineConfig, filter_clusters, segment, threshold_green
from .gvi import GviMeasurement, aggregate, gvi_of_mask
from .imaging import (
    RasterImage,
    VegetationMask,
    decode_image,
    decode_label_image,
    mask_from_label_image,
    mask_from_png,
    mask_to_png,
)
from .metrics import (
    EvaluationReport,
    PairedSample,
    error_bounds,
    evaluate,
    iou,
    mae,
    mean_iou,
    pearson_r,
    render_table,
)

__version__ = "0.1.0"
