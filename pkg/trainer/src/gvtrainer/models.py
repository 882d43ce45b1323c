"""Toy-scale network architectures.

SegmenterNet is a reduced pyramid-pooling segmenter: a small strided
backbone with residual blocks, multi-grid average pooling fused back at 1/4
resolution, and bilinear upsampling to full resolution with 2-class logits.
GviRegressorNet is a truncated residual regressor ending in global average
pooling and a linear head producing one GVI scalar in percent.

Both are built from Conv/BN/ReLU/pool/resize primitives that survive ONNX
export unchanged.
"""

from __future__ import annotations

import torch
import torch.nn.functional as F
from torch import nn


def conv_bn(in_ch: int, out_ch: int, stride: int = 1) -> nn.Sequential:
    return nn.Sequential(
        nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1, bias=False),
        nn.BatchNorm2d(out_ch),
        nn.ReLU(inplace=True),
    )


class ResidualBlock(nn.Module):
    def __init__(self, channels: int):
        super().__init__()
        self.conv1 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn1 = nn.BatchNorm2d(channels)
        self.conv2 = nn.Conv2d(channels, channels, 3, padding=1, bias=False)
        self.bn2 = nn.BatchNorm2d(channels)

    def forward(self, x):
        y = F.relu(self.bn1(self.conv1(x)))
        y = self.bn2(self.conv2(y))
        return F.relu(x + y)


class PyramidBranch(nn.Module):
    """Average-pool to a fixed grid, 1x1 conv, upsample back."""

    def __init__(self, channels: int, out_ch: int, grid: int):
        super().__init__()
        self.grid = grid
        self.conv = nn.Conv2d(channels, out_ch, 1, bias=False)
        self.bn = nn.BatchNorm2d(out_ch)

    def forward(self, x):
        size = x.shape[-1]
        kernel = size // self.grid
        pooled = F.avg_pool2d(x, kernel_size=kernel, stride=kernel)
        y = F.relu(self.bn(self.conv(pooled)))
        if self.grid == 1:
            # constant upsample from a 1x1 map; nearest is identical to
            # bilinear here and exports more portably
            return F.interpolate(y, size=(size, size), mode="nearest")
        return F.interpolate(y, size=(size, size), mode="bilinear", align_corners=False)


class SegmenterNet(nn.Module):
    """Binary vegetation segmenter; logits (N, 2, R, R) at input resolution."""

    pyramid_grids = (1, 2, 4)

    def __init__(self, input_resolution: int = 64):
        super().__init__()
        if input_resolution % 16:
            raise ValueError("input_resolution must be a multiple of 16")
        self.input_resolution = input_resolution
        self.stem = conv_bn(3, 16)
        self.down1 = conv_bn(16, 32, stride=2)
        self.res1 = ResidualBlock(32)
        self.down2 = conv_bn(32, 64, stride=2)
        self.res2 = ResidualBlock(64)
        self.pyramid = nn.ModuleList(
            PyramidBranch(64, 16, g) for g in self.pyramid_grids
        )
        self.fuse = conv_bn(64 + 16 * len(self.pyramid_grids), 32)
        self.classify = nn.Conv2d(32, 2, 1)

    def forward(self, x):
        x = self.stem(x)
        x = self.res1(self.down1(x))
        x = self.res2(self.down2(x))
        branches = [x] + [branch(x) for branch in self.pyramid]
        fused = self.fuse(torch.cat(branches, dim=1))
        logits = self.classify(fused)
        return F.interpolate(
            logits, size=(self.input_resolution, self.input_resolution),
            mode="bilinear", align_corners=False,
        )

    @torch.no_grad()
    def predict_mask(self, x: torch.Tensor) -> torch.Tensor:
        """(N, 3, R, R) -> bool (N, R, R)."""
        was_training = self.training
        self.eval()
        out = self.forward(x)
        if was_training:
            self.train()
        return out[:, 1] > out[:, 0]


class GviRegressorNet(nn.Module):
    """Direct GVI estimator; output (N, 1) in percent units."""

    def __init__(self, input_resolution: int = 64):
        super().__init__()
        if input_resolution % 8:
            raise ValueError("input_resolution must be a multiple of 8")
        self.input_resolution = input_resolution
        self.stem = conv_bn(3, 16, stride=2)
        self.down1 = conv_bn(16, 32, stride=2)
        self.res1 = ResidualBlock(32)
        self.down2 = conv_bn(32, 64, stride=2)
        self.res2 = ResidualBlock(64)
        self.head = nn.Linear(64, 1)
        self._gradcam_activations: torch.Tensor | None = None

    def features(self, x):
        x = self.stem(x)
        x = self.res1(self.down1(x))
        return self.res2(self.down2(x))

    def forward(self, x):
        feats = self.features(x)
        self._gradcam_activations = feats
        pooled = feats.mean(dim=(2, 3))
        return self.head(pooled)
