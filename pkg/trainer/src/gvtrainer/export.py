"""ONNX export with BN folding, sidecar emission, and a round-trip smoke test.

The exported file plus ``<model>.json`` normalization sidecar follow the GVI
toolkit's model contract: input 1x3xRxR float in 0-1 range, segmentation
output 1x2xRxR logits, regression output a single scalar in percent.
"""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numpy as np
import torch
from torch import nn

from .data import NORM_MEAN, NORM_STD, synthetic_scene
from .models import GviRegressorNet, ResidualBlock, SegmenterNet
from .onnx_writer import GraphBuilder

log = logging.getLogger(__name__)

SMOKE_TOLERANCE_GVI = 1e-3


class ExportMismatch(RuntimeError):
    """Exported model disagrees with the in-framework model."""


def fold_conv_bn(conv: nn.Conv2d, bn: nn.BatchNorm2d) -> tuple[np.ndarray, np.ndarray]:
    """Merge a BatchNorm into the preceding conv's weight and bias."""
    scale = bn.weight.detach() / torch.sqrt(bn.running_var.detach() + bn.eps)
    weight = conv.weight.detach() * scale.reshape(-1, 1, 1, 1)
    bias = conv.bias.detach() if conv.bias is not None else torch.zeros(conv.out_channels)
    bias = (bias - bn.running_mean.detach()) * scale + bn.bias.detach()
    return weight.numpy(), bias.numpy()


def _emit_conv_bn_relu(b: GraphBuilder, x: str, block: nn.Sequential, stride: int) -> str:
    w, bias = fold_conv_bn(block[0], block[1])
    return b.relu(b.conv(x, w, bias, stride=stride, pad=1))


def _emit_residual(b: GraphBuilder, x: str, block: ResidualBlock) -> str:
    w1, b1 = fold_conv_bn(block.conv1, block.bn1)
    w2, b2 = fold_conv_bn(block.conv2, block.bn2)
    y = b.relu(b.conv(x, w1, b1, pad=1))
    y = b.conv(y, w2, b2, pad=1)
    return b.relu(b.add(x, y))


def _emit_segmenter(model: SegmenterNet) -> bytes:
    r = model.input_resolution
    feature_size = r // 4
    b = GraphBuilder(input_shape=(1, 3, r, r))
    t = _emit_conv_bn_relu(b, b.input_name, model.stem, stride=1)
    t = _emit_conv_bn_relu(b, t, model.down1, stride=2)
    t = _emit_residual(b, t, model.res1)
    t = _emit_conv_bn_relu(b, t, model.down2, stride=2)
    feat = _emit_residual(b, t, model.res2)

    branches = [feat]
    for branch in model.pyramid:
        kernel = feature_size // branch.grid
        pooled = b.avg_pool(feat, kernel)
        w, bias = fold_conv_bn(branch.conv, branch.bn)
        y = b.relu(b.conv(pooled, w, bias))
        scale = feature_size / branch.grid
        upsample = b.resize_nearest if branch.grid == 1 else b.resize_bilinear
        branches.append(upsample(y, scale))
    fused = _emit_conv_bn_relu(b, b.concat(branches), model.fuse, stride=1)
    logits = b.conv(
        fused,
        model.classify.weight.detach().numpy(),
        model.classify.bias.detach().numpy(),
    )
    out = b.resize_bilinear(logits, 4.0)
    return b.build(out, (1, 2, r, r), graph_name="vegetation_segmenter")


def _emit_regressor(model: GviRegressorNet) -> bytes:
    r = model.input_resolution
    b = GraphBuilder(input_shape=(1, 3, r, r))
    t = _emit_conv_bn_relu(b, b.input_name, model.stem, stride=2)
    t = _emit_conv_bn_relu(b, t, model.down1, stride=2)
    t = _emit_residual(b, t, model.res1)
    t = _emit_conv_bn_relu(b, t, model.down2, stride=2)
    feat = _emit_residual(b, t, model.res2)
    flat = b.flatten(b.global_avg_pool(feat))
    # forward() scales the head output to percent; fold the x100 into Gemm
    out = b.gemm(
        flat,
        model.head.weight.detach().numpy() * 100.0,
        model.head.bias.detach().numpy() * 100.0,
    )
    return b.build(out, (1, 1), graph_name="gvi_regressor")


def _normalize(rgb: np.ndarray) -> torch.Tensor:
    x = rgb.astype(np.float32) / 255.0
    x = (x - np.asarray(NORM_MEAN, np.float32)) / np.asarray(NORM_STD, np.float32)
    return torch.from_numpy(x.transpose(2, 0, 1)[None].copy())


def _gvi_from_onnx(path: Path, rgb: np.ndarray, task: str) -> float:
    import cv2

    net = cv2.dnn.readNetFromONNX(str(path))
    net.setInput(_normalize(rgb).numpy())
    out = net.forward()
    if task == "regression":
        return min(100.0, max(0.0, float(out.reshape(()))))
    mask = out[0, 1] > out[0, 0]
    return 100.0 * float(mask.sum()) / mask.size


def _gvi_in_framework(model: nn.Module, rgb: np.ndarray) -> float:
    model.eval()
    with torch.no_grad():
        if isinstance(model, SegmenterNet):
            mask = model.predict_mask(_normalize(rgb))[0]
            return 100.0 * float(mask.sum()) / mask.numel()
        value = float(model(_normalize(rgb)).reshape(()))
        return min(100.0, max(0.0, value))


def export_model(model: nn.Module, path, smoke_image: np.ndarray | None = None) -> Path:
    """Write ONNX + normalization sidecar; verify GVI round-trips within 1e-3."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    model.eval()
    if isinstance(model, SegmenterNet):
        blob, task = _emit_segmenter(model), "segmentation"
    elif isinstance(model, GviRegressorNet):
        blob, task = _emit_regressor(model), "regression"
    else:
        raise TypeError(f"cannot export {type(model).__name__}")
    path.write_bytes(blob)
    path.with_suffix(".json").write_text(
        json.dumps({"mean": list(NORM_MEAN), "std": list(NORM_STD)}) + "\n"
    )

    if smoke_image is None:
        smoke_image, _ = synthetic_scene(np.random.default_rng(0), model.input_resolution)
    ours = _gvi_in_framework(model, smoke_image)
    theirs = _gvi_from_onnx(path, smoke_image, task)
    if abs(ours - theirs) > SMOKE_TOLERANCE_GVI:
        raise ExportMismatch(
            f"{path}: in-framework GVI {ours:.6f} vs exported {theirs:.6f}"
        )
    log.info("exported %s (%s), smoke delta %.2e", path, task, abs(ours - theirs))
    return path
