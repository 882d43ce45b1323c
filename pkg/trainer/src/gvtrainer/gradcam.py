"""Grad-CAM for the direct-GVI regressor.

Gradients of the scalar output with respect to the last convolutional
feature map weight each channel; the ReLU-rectified weighted sum is
upsampled to image size and normalized to [0, 1]. Zero gradients (a
constant-output model) normalize to an all-zero map.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .data import NORM_MEAN, NORM_STD
from .models import GviRegressorNet


def _normalize(rgb: np.ndarray, resolution: int) -> torch.Tensor:
    img = Image.fromarray(rgb)
    if img.size != (resolution, resolution):
        img = img.resize((resolution, resolution), Image.BILINEAR)
    x = np.asarray(img, dtype=np.float32) / 255.0
    x = (x - np.asarray(NORM_MEAN, np.float32)) / np.asarray(NORM_STD, np.float32)
    return torch.from_numpy(x.transpose(2, 0, 1)[None].copy())


def grad_cam(model: GviRegressorNet, rgb: np.ndarray, overlay_path=None) -> np.ndarray:
    """Heatmap in [0, 1] with the spatial shape of the input image."""
    model.eval()
    x = _normalize(rgb, model.input_resolution)
    feats = model.features(x)
    output = model.head(feats.mean(dim=(2, 3))) * 100.0
    grads = torch.autograd.grad(output.reshape(()), feats)[0]
    weights = grads.mean(dim=(2, 3), keepdim=True)
    cam = F.relu((weights * feats).sum(dim=1, keepdim=True))
    cam = F.interpolate(
        cam, size=(rgb.shape[0], rgb.shape[1]), mode="bilinear", align_corners=False
    )[0, 0]
    peak = float(cam.max())
    heat = (cam / peak if peak > 0 else torch.zeros_like(cam)).detach().numpy()
    if overlay_path is not None:
        save_overlay(rgb, heat, overlay_path)
    return heat


def save_overlay(rgb: np.ndarray, heat: np.ndarray, path) -> None:
    """Blend a red (positive) / blue (negative contribution) map over the image."""
    colormap = np.zeros_like(rgb)
    colormap[:, :, 0] = (heat * 255).astype(np.uint8)
    colormap[:, :, 2] = ((1.0 - heat) * 255).astype(np.uint8)
    blended = (0.55 * rgb.astype(np.float32) + 0.45 * colormap.astype(np.float32)).astype(np.uint8)
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(blended).save(path, format="PNG")
