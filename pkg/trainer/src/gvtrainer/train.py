"""Training procedures: binary-label pretraining, fine-tuning, regression.

All loops are CPU-friendly, single-process, and reproducible: a fixed seed
yields identical loss curves run to run.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import torch
import torch.nn.functional as F
from torch import nn
from torch.utils.data import DataLoader

from .data import RegressionDataset, Sample, SegmentationDataset, read_manifest
from .models import GviRegressorNet, SegmenterNet
from .spec import TrainSpec

log = logging.getLogger(__name__)


@dataclass
class TrainResult:
    model: nn.Module
    epoch_losses: list[float] = field(default_factory=list)
    val_mae: float | None = None


class UnsupportedWeights(RuntimeError):
    """Requested base weights are not available in this environment."""


def _resolve_samples(manifest) -> list[Sample]:
    if isinstance(manifest, (list, tuple)):
        return list(manifest)
    return read_manifest(manifest)


def _loader(dataset, spec: TrainSpec, seed: int) -> DataLoader:
    gen = torch.Generator()
    gen.manual_seed(seed)
    return DataLoader(dataset, batch_size=spec.batch_size, shuffle=True, generator=gen)


def _init_model(spec: TrainSpec, init_state=None) -> nn.Module:
    cls = SegmenterNet if spec.task == "segmentation" else GviRegressorNet
    model = cls(spec.input_resolution)
    if spec.base_weights == "imagenet":
        raise UnsupportedWeights(
            "imagenet initialization needs downloadable weights; use 'none' or "
            "'cityscapes_binary' with a checkpoint"
        )
    if spec.base_weights == "cityscapes_binary":
        if init_state is None:
            raise ValueError("base_weights='cityscapes_binary' requires init_state")
        state = init_state if isinstance(init_state, dict) else torch.load(init_state, weights_only=True)
        model.load_state_dict(state)
    return model


def _train_segmentation_epochs(model, samples, spec: TrainSpec, seed: int, stage: str) -> list[float]:
    torch.manual_seed(seed)
    dataset = SegmentationDataset(samples, spec.input_resolution)
    loader = _loader(dataset, spec, seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    losses = []
    model.train()
    for epoch in range(spec.epochs):
        total = 0.0
        count = 0
        for images, targets in loader:
            optimizer.zero_grad()
            logits = model(images)
            loss = F.cross_entropy(logits, targets)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(images)
            count += len(images)
        losses.append(total / count)
        log.info("%s epoch %d/%d: loss %.6f", stage, epoch + 1, spec.epochs, losses[-1])
    return losses


def collapse_and_train_stageA(
    cityscapes_manifest, spec: TrainSpec, seed: int = 0, init_state=None
) -> TrainResult:
    """Pretrain the segmenter on binary vegetation labels."""
    if spec.task != "segmentation":
        raise ValueError("stage A trains the segmentation task")
    samples = _resolve_samples(cityscapes_manifest)
    model = _init_model(spec, init_state)
    losses = _train_segmentation_epochs(model, samples, spec, seed, "stageA")
    return TrainResult(model=model, epoch_losses=losses)


def finetune_stageB(gsv_manifest, model: SegmenterNet, spec: TrainSpec, seed: int = 0) -> TrainResult:
    """Continue training an existing segmenter on the target imagery."""
    samples = _resolve_samples(gsv_manifest)
    losses = _train_segmentation_epochs(model, samples, spec, seed, "stageB")
    if losses[-1] >= losses[0] and len(losses) > 1:
        log.warning("stageB loss did not improve: first %.6f last %.6f", losses[0], losses[-1])
    return TrainResult(model=model, epoch_losses=losses)


def train_regressor(
    manifest, spec: TrainSpec, seed: int = 0, holdout_fraction: float = 0.2, init_state=None
) -> TrainResult:
    """Fit the direct-GVI regressor; reports MAE on a held-out slice."""
    if spec.task != "regression":
        raise ValueError("train_regressor needs a regression TrainSpec")
    samples = [s for s in _resolve_samples(manifest) if s.true_gvi is not None]
    holdout = [s for s in samples if s.split in ("val", "test")]
    trainset = [s for s in samples if s.split not in ("val", "test")]
    if not holdout and holdout_fraction > 0:
        ordered = sorted(samples, key=lambda s: s.id)
        k = max(1, int(len(ordered) * holdout_fraction))
        holdout, trainset = ordered[-k:], ordered[:-k]
    if not trainset:
        raise ValueError("no training samples")

    torch.manual_seed(seed)
    model = _init_model(spec, init_state)
    loader = _loader(RegressionDataset(trainset, spec.input_resolution), spec, seed)
    optimizer = torch.optim.Adam(model.parameters(), lr=spec.learning_rate)
    losses = []
    model.train()
    for epoch in range(spec.epochs):
        total = 0.0
        count = 0
        for images, targets in loader:
            optimizer.zero_grad()
            pred = model(images)
            loss = F.mse_loss(pred / 100.0, targets / 100.0)
            loss.backward()
            optimizer.step()
            total += float(loss.detach()) * len(images)
            count += len(images)
        losses.append(total / count)
        log.info("regressor epoch %d/%d: loss %.6f", epoch + 1, spec.epochs, losses[-1])

    val_mae = None
    if holdout:
        model.eval()
        with torch.no_grad():
            errors = []
            for s in holdout:
                from .data import load_image

                pred = float(model(load_image(s.image_path, spec.input_resolution)[None]).reshape(()))
                errors.append(abs(min(100.0, max(0.0, pred)) - s.true_gvi))
            val_mae = sum(errors) / len(errors)
        log.info("regressor holdout MAE: %.4f%% over %d samples", val_mae, len(holdout))
    return TrainResult(model=model, epoch_losses=losses, val_mae=val_mae)


def train_iou(model: SegmenterNet, samples, resolution: int) -> float:
    """Mean vegetation IoU of the model over the given samples."""
    dataset = SegmentationDataset(samples, resolution)
    model.eval()
    total = 0.0
    with torch.no_grad():
        for i in range(len(dataset)):
            image, target = dataset[i]
            pred = model.predict_mask(image[None])[0]
            truth = target.bool()
            union = (pred | truth).sum()
            total += float((pred & truth).sum() / union) if union > 0 else 1.0
    return total / len(dataset)


def save_checkpoint(model: nn.Module, path) -> None:
    torch.save(model.state_dict(), path)
