"""Pluggable GVI estimation backends behind one interface.

Three backend families: the in-process threshold-and-cluster baseline, stored
vegetation masks looked up per sample id, and ONNX neural models (either a
binary segmentation head or a direct scalar-GVI regression head). Neural
models are fed at their declared input resolution via bilinear resize; output
masks are resized back to the source resolution by nearest-neighbor before
GVI computation, so GVI is always reported at source resolution.
"""

from __future__ import annotations

import json
import threading
import time
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence, TypeVar

import numpy as np

from .baseline import BaselineConfig, segment
from .errors import BackendFailure, IncompatibleModel, MissingMaskFile, ShapeMismatch
from .gvi import GviMeasurement, gvi_of_mask
from .imaging import RasterImage, VegetationMask, mask_from_png

KINDS = ("baseline", "mask_backend", "direct_estimate")


@dataclass(frozen=True, eq=False)
class EstimateResult:
    """Outcome of one estimator invocation on one image.

    latency is wall-clock seconds around the backend invocation only
    (decode excluded). When a mask is present the GVI is derived from it.
    """

    id: str
    gvi: GviMeasurement
    mask: VegetationMask | None
    latency: float

    def __post_init__(self):
        if self.mask is not None and self.gvi != gvi_of_mask(self.mask, source=self.gvi.source):
            raise ValueError(f"{self.id}: gvi inconsistent with mask")


class Estimator:
    """Base estimator: subclasses set kind and implement _run."""

    kind: str = "direct_estimate"

    @property
    def produces_mask(self) -> bool:
        return self.kind != "direct_estimate"

    def estimate(self, img: RasterImage) -> EstimateResult:
        start = time.perf_counter()
        gvi, mask = self._run(img)
        latency = time.perf_counter() - start
        return EstimateResult(id=img.id, gvi=gvi, mask=mask, latency=latency)

    def _run(self, img: RasterImage) -> tuple[GviMeasurement, VegetationMask | None]:
        raise NotImplementedError


def estimate(estimator: Estimator, img: RasterImage) -> EstimateResult:
    return estimator.estimate(img)


class BaselineEstimator(Estimator):
    kind = "baseline"

    def __init__(self, cfg: BaselineConfig = BaselineConfig()):
        self.cfg = cfg

    def _run(self, img):
        mask = segment(img, self.cfg)
        return gvi_of_mask(mask, source="baseline"), mask


class MaskDirEstimator(Estimator):
    """Looks up a precomputed mask ``<dir>/<id>.png`` per sample."""

    kind = "mask_backend"

    def __init__(self, mask_dir):
        self.mask_dir = Path(mask_dir)

    def _run(self, img):
        path = self.mask_dir / f"{img.id}.png"
        if not path.is_file():
            raise MissingMaskFile(str(path))
        mask = mask_from_png(path)
        return gvi_of_mask(mask, source="mask_backend"), mask


class ConstantEstimator(Estimator):
    """Direct-estimate stub returning a fixed GVI; useful in tests and dry runs."""

    kind = "direct_estimate"

    def __init__(self, value: float):
        self.value = float(value)

    def _run(self, img):
        return GviMeasurement(self.value, "image", 1, "direct_estimate"), None


def open_mask_backend(mask_dir) -> Estimator:
    return MaskDirEstimator(mask_dir)


def open_model_backend(model_path, kind: str) -> Estimator:
    return OnnxEstimator(model_path, kind)


# --- minimal ONNX metadata reader (protobuf wire format) ---

def _scan_fields(buf: bytes) -> Iterable[tuple[int, int, int | bytes]]:
    pos, end = 0, len(buf)
    while pos < end:
        key = 0
        shift = 0
        while True:
            b = buf[pos]
            pos += 1
            key |= (b & 0x7F) << shift
            if not b & 0x80:
                break
            shift += 7
        field, wire = key >> 3, key & 7
        if wire == 0:
            val = 0
            shift = 0
            while True:
                b = buf[pos]
                pos += 1
                val |= (b & 0x7F) << shift
                if not b & 0x80:
                    break
                shift += 7
            yield field, wire, val
        elif wire == 2:
            ln = 0
            shift = 0
            while True:
                b = buf[pos]
                pos += 1
                ln |= (b & 0x7F) << shift
                if not b & 0x80:
                    break
                shift += 7
            yield field, wire, buf[pos:pos + ln]
            pos += ln
        elif wire == 5:
            yield field, wire, buf[pos:pos + 4]
            pos += 4
        elif wire == 1:
            yield field, wire, buf[pos:pos + 8]
            pos += 8
        else:
            raise ValueError(f"unsupported wire type {wire}")


def _first(buf: bytes, field: int) -> bytes | int | None:
    for f, _, v in _scan_fields(buf):
        if f == field:
            return v
    return None


def read_onnx_input_shape(path) -> tuple[int | None, ...]:
    """Dims of the first non-initializer graph input; None for symbolic dims."""
    data = Path(path).read_bytes()
    try:
        graph = _first(data, 7)
    except (ValueError, IndexError) as exc:
        raise BackendFailure(f"{path}: not a parseable ONNX model: {exc}") from exc
    if not isinstance(graph, bytes):
        raise BackendFailure(f"{path}: no graph found (not an ONNX model?)")
    try:
        initializer_names = set()
        inputs = []
        for f, _, v in _scan_fields(graph):
            if f == 5 and isinstance(v, bytes):  # initializer: TensorProto
                name = _first(v, 8)
                if isinstance(name, bytes):
                    initializer_names.add(name.decode())
            elif f == 11 and isinstance(v, bytes):  # input: ValueInfoProto
                inputs.append(v)
        for vi in inputs:
            name = _first(vi, 1)
            if isinstance(name, bytes) and name.decode() in initializer_names:
                continue
            ttype = _first(vi, 2)
            if not isinstance(ttype, bytes):
                continue
            tensor_type = _first(ttype, 1)
            if not isinstance(tensor_type, bytes):
                continue
            shape = _first(tensor_type, 2)
            if not isinstance(shape, bytes):
                return ()
            dims: list[int | None] = []
            for f, _, d in _scan_fields(shape):
                if f == 1 and isinstance(d, bytes):
                    dv = _first(d, 1)
                    dims.append(dv if isinstance(dv, int) else None)
            return tuple(dims)
    except (ValueError, IndexError, UnicodeDecodeError) as exc:
        raise BackendFailure(f"{path}: not a parseable ONNX model: {exc}") from exc
    raise BackendFailure(f"{path}: model has no tensor input")


def _load_sidecar(model_path: Path) -> tuple[np.ndarray, np.ndarray]:
    sidecar = model_path.with_suffix(".json")
    mean, std = [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]
    if sidecar.is_file():
        try:
            meta = json.loads(sidecar.read_text())
            mean = [float(v) for v in meta["mean"]]
            std = [float(v) for v in meta["std"]]
        except (ValueError, KeyError, TypeError) as exc:
            raise BackendFailure(f"{sidecar}: malformed normalization sidecar: {exc}") from exc
        if len(mean) != 3 or len(std) != 3 or any(s == 0 for s in std):
            raise BackendFailure(f"{sidecar}: mean/std must be 3-channel, std nonzero")
    return (
        np.asarray(mean, dtype=np.float32).reshape(3, 1, 1),
        np.asarray(std, dtype=np.float32).reshape(3, 1, 1),
    )


class OnnxEstimator(Estimator):
    """ONNX model backend via OpenCV's dnn module.

    model_kind "segmentation" expects Nx2xHxW logits or Nx1xHxW sigmoid
    output (binarized by class argmax / prob >= 0.5); "regression" expects a
    single scalar, clamped to [0, 100]. Nets are cloned per worker thread
    since a dnn Net is not safe for concurrent forward passes.
    """

    def __init__(self, model_path, model_kind: str):
        if model_kind not in ("segmentation", "regression"):
            raise ValueError(f"model kind must be segmentation or regression, got {model_kind!r}")
        self.model_path = Path(model_path)
        self.model_kind = model_kind
        self.kind = "mask_backend" if model_kind == "segmentation" else "direct_estimate"
        self.mean, self.std = _load_sidecar(self.model_path)
        shape = read_onnx_input_shape(self.model_path)
        if len(shape) != 4 or shape[1] != 3:
            raise IncompatibleModel(
                f"{model_path}: expected a single Nx3xHxW image input, got dims {shape}"
            )
        self.input_hw = (shape[2], shape[3])  # may contain None for dynamic dims
        self._local = threading.local()
        self._net()  # fail early on unreadable/unparseable models

    def _net(self):
        net = getattr(self._local, "net", None)
        if net is None:
            import cv2

            try:
                net = cv2.dnn.readNetFromONNX(str(self.model_path))
            except cv2.error as exc:
                raise BackendFailure(f"{self.model_path}: {exc}") from exc
            self._local.net = net
        return net

    def _forward(self, x: np.ndarray) -> np.ndarray:
        import cv2

        net = self._net()
        try:
            net.setInput(x)
            return np.asarray(net.forward())
        except cv2.error as exc:
            raise BackendFailure(f"{self.model_path}: inference failed: {exc}") from exc

    def _run(self, img):
        import cv2

        in_h = self.input_hw[0] or img.height
        in_w = self.input_hw[1] or img.width
        rgb = img.pixels
        if (img.height, img.width) != (in_h, in_w):
            rgb = cv2.resize(rgb, (in_w, in_h), interpolation=cv2.INTER_LINEAR)
        x = rgb.astype(np.float32).transpose(2, 0, 1) / 255.0
        x = (x - self.mean) / self.std
        out = self._forward(x[None])

        if self.model_kind == "regression":
            if out.size != 1:
                raise IncompatibleModel(
                    f"{self.model_path}: regression output must be a scalar, got shape {out.shape}"
                )
            value = min(100.0, max(0.0, float(out.reshape(()))))
            return GviMeasurement(value, "image", 1, "direct_estimate"), None

        if out.ndim != 4 or out.shape[0] != 1 or out.shape[1] not in (1, 2):
            raise IncompatibleModel(
                f"{self.model_path}: segmentation output must be Nx2xHxW logits or "
                f"Nx1xHxW sigmoid, got shape {out.shape}"
            )
        if out.shape[2] != in_h or out.shape[3] != in_w:
            raise ShapeMismatch(
                f"{self.model_path}: output {out.shape[2]}x{out.shape[3]} does not match "
                f"model input {in_h}x{in_w}"
            )
        if out.shape[1] == 2:
            bits = out[0, 1] > out[0, 0]
        else:
            bits = out[0, 0] >= 0.5
        if bits.shape != (img.height, img.width):
            bits = cv2.resize(
                bits.astype(np.uint8), (img.width, img.height), interpolation=cv2.INTER_NEAREST
            ).astype(bool)
        mask = VegetationMask(bits=bits)
        return gvi_of_mask(mask, source="mask_backend"), mask


T = TypeVar("T")
R = TypeVar("R")


def run_pool(tasks: Sequence[T], fn: Callable[[T], R], workers: int) -> list[R]:
    """Map fn over tasks on `workers` lanes with a bounded in-flight window.

    Results come back in task order, so output is identical for any worker
    count; the first task exception propagates as-is.
    """
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return [fn(t) for t in tasks]
    results: list[R] = []
    window = workers * 4
    with ThreadPoolExecutor(max_workers=workers) as ex:
        pending: deque = deque()
        for t in tasks:
            pending.append(ex.submit(fn, t))
            if len(pending) >= window:
                results.append(pending.popleft().result())
        while pending:
            results.append(pending.popleft().result())
    return results


def estimate_many(
    estimator: Estimator,
    images: Sequence[tuple[str, Callable[[], RasterImage]]],
    workers: int = 1,
) -> list[EstimateResult]:
    """Estimate a batch given (id, loader) pairs; results sorted by id."""
    ordered = sorted(images, key=lambda pair: pair[0])
    return run_pool(ordered, lambda pair: estimator.estimate(pair[1]()), workers)
