"""Toy-scale trainers producing ONNX models for the GVI toolkit."""

from .export import export_model
from .gradcam import grad_cam
from .models import GviRegressorNet, SegmenterNet
from .spec import TrainSpec
from .train import (
    TrainResult,
    collapse_and_train_stageA,
    finetune_stageB,
    train_regressor,
)

__version__ = "0.1.0"
