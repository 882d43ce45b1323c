"""Minimal ONNX serializer (protobuf wire format, opset 13).

Covers exactly the ops the exported architectures need: Conv, Relu, Add,
Concat, AveragePool, MaxPool, GlobalAveragePool, Resize (linear/nearest),
Flatten, Gemm, Sigmoid. No onnx package required; the files load in any
ONNX runtime (exercised against OpenCV's dnn module in tests).
"""

from __future__ import annotations

import numpy as np


def _varint(n: int) -> bytes:
    out = bytearray()
    while True:
        b = n & 0x7F
        n >>= 7
        if n:
            out.append(b | 0x80)
        else:
            out.append(b)
            return bytes(out)


def _tag(field: int, wire: int) -> bytes:
    return _varint((field << 3) | wire)


def _ld(field: int, payload: bytes) -> bytes:
    return _tag(field, 2) + _varint(len(payload)) + payload


def _vint(field: int, value: int) -> bytes:
    return _tag(field, 0) + _varint(value)


def _s(field: int, text: str) -> bytes:
    return _ld(field, text.encode())


def _tensor(name: str, arr: np.ndarray) -> bytes:
    arr = np.asarray(arr)
    if arr.dtype == np.int64:
        dtype_code, payload = 7, arr.astype("<i8").tobytes()
    else:
        dtype_code, payload = 1, np.ascontiguousarray(arr, dtype="<f4").tobytes()
    m = b"".join(_vint(1, d) for d in arr.shape)
    m += _vint(2, dtype_code)
    m += _s(8, name)
    m += _ld(9, payload)
    return m


def _attr_int(name: str, v: int) -> bytes:
    return _ld(5, _s(1, name) + _vint(3, v) + _vint(20, 2))


def _attr_ints(name: str, vals) -> bytes:
    return _ld(5, _s(1, name) + _ld(8, b"".join(_varint(v) for v in vals)) + _vint(20, 7))


def _attr_str(name: str, v: str) -> bytes:
    return _ld(5, _s(1, name) + _ld(4, v.encode()) + _vint(20, 3))


def _value_info(name: str, shape) -> bytes:
    dims = b"".join(_ld(1, _vint(1, d)) for d in shape)
    return _s(1, name) + _ld(2, _ld(1, _vint(1, 1) + _ld(2, dims)))


class GraphBuilder:
    """Accumulates nodes/initializers; tensor names are handles."""

    def __init__(self, input_shape: tuple[int, int, int, int], input_name: str = "image"):
        self.input_name = input_name
        self.input_shape = input_shape
        self._nodes: list[bytes] = []
        self._inits: list[bytes] = []
        self._n = 0

    def _fresh(self, op: str) -> str:
        self._n += 1
        return f"{op.lower()}_{self._n}"

    def _init_tensor(self, base: str, arr: np.ndarray) -> str:
        name = f"{base}_{self._n}"
        self._n += 1
        self._inits.append(_tensor(name, arr))
        return name

    def _emit(self, op: str, inputs: list[str], attrs: bytes = b"") -> str:
        out = self._fresh(op)
        m = b"".join(_s(1, i) for i in inputs)
        m += _s(2, out)
        m += _s(4, op)
        m += attrs
        self._nodes.append(m)
        return out

    def conv(self, x: str, weight: np.ndarray, bias: np.ndarray, stride: int = 1, pad: int = 0) -> str:
        w = self._init_tensor("w", weight)
        b = self._init_tensor("b", bias)
        kh, kw = weight.shape[2], weight.shape[3]
        attrs = (
            _attr_ints("kernel_shape", [kh, kw])
            + _attr_ints("pads", [pad, pad, pad, pad])
            + _attr_ints("strides", [stride, stride])
        )
        return self._emit("Conv", [x, w, b], attrs)

    def relu(self, x: str) -> str:
        return self._emit("Relu", [x])

    def sigmoid(self, x: str) -> str:
        return self._emit("Sigmoid", [x])

    def add(self, a: str, b: str) -> str:
        return self._emit("Add", [a, b])

    def concat(self, xs: list[str]) -> str:
        return self._emit("Concat", xs, _attr_int("axis", 1))

    def avg_pool(self, x: str, kernel: int, stride: int | None = None) -> str:
        stride = kernel if stride is None else stride
        attrs = _attr_ints("kernel_shape", [kernel, kernel]) + _attr_ints("strides", [stride, stride])
        return self._emit("AveragePool", [x], attrs)

    def max_pool(self, x: str, kernel: int, stride: int | None = None) -> str:
        stride = kernel if stride is None else stride
        attrs = _attr_ints("kernel_shape", [kernel, kernel]) + _attr_ints("strides", [stride, stride])
        return self._emit("MaxPool", [x], attrs)

    def global_avg_pool(self, x: str) -> str:
        return self._emit("GlobalAveragePool", [x])

    def resize_bilinear(self, x: str, scale: float) -> str:
        scales = self._init_tensor("scales", np.array([1.0, 1.0, scale, scale], dtype=np.float32))
        attrs = _attr_str("mode", "linear") + _attr_str(
            "coordinate_transformation_mode", "pytorch_half_pixel"
        )
        return self._emit("Resize", [x, "", scales], attrs)

    def resize_nearest(self, x: str, scale: float) -> str:
        scales = self._init_tensor("scales", np.array([1.0, 1.0, scale, scale], dtype=np.float32))
        attrs = (
            _attr_str("mode", "nearest")
            + _attr_str("coordinate_transformation_mode", "asymmetric")
            + _attr_str("nearest_mode", "floor")
        )
        return self._emit("Resize", [x, "", scales], attrs)

    def flatten(self, x: str) -> str:
        return self._emit("Flatten", [x], _attr_int("axis", 1))

    def gemm(self, x: str, weight: np.ndarray, bias: np.ndarray) -> str:
        w = self._init_tensor("w", weight)
        b = self._init_tensor("b", bias)
        return self._emit("Gemm", [x, w, b], _attr_int("transB", 1))

    def build(self, output: str, output_shape, graph_name: str = "net") -> bytes:
        graph = b"".join(_ld(1, n) for n in self._nodes)
        graph += _s(2, graph_name)
        graph += b"".join(_ld(5, t) for t in self._inits)
        graph += _ld(11, _value_info(self.input_name, self.input_shape))
        graph += _ld(12, _value_info(output, output_shape))
        model = _vint(1, 8)
        model += _s(2, "gvtrainer")
        model += _ld(8, _s(1, "") + _vint(2, 13))
        model += _ld(7, graph)
        return model
