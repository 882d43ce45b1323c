"""Tiny ONNX model fabricator for backend tests.

Emits the protobuf wire format directly: enough of ModelProto to express a
1x1-conv network (optionally + Sigmoid, or + GlobalAveragePool for scalar
regression heads). Kept independent of the package under test.
"""

from __future__ import annotations

import json
from pathlib import Path

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
    m = b"".join(_vint(1, d) for d in arr.shape)
    m += _vint(2, 1)  # float32
    m += _s(8, name)
    m += _ld(9, np.ascontiguousarray(arr, dtype="<f4").tobytes())
    return m


def _attr_ints(name: str, vals: list[int]) -> bytes:
    return _ld(5, _s(1, name) + _ld(8, b"".join(_varint(v) for v in vals)) + _vint(20, 7))


def _node(op: str, inputs: list[str], outputs: list[str], attrs: bytes = b"") -> bytes:
    m = b"".join(_s(1, i) for i in inputs)
    m += b"".join(_s(2, o) for o in outputs)
    m += _s(4, op)
    m += attrs
    return m


def _value_info(name: str, shape: tuple[int, ...]) -> bytes:
    dims = b"".join(_ld(1, _vint(1, d)) for d in shape)
    ttype = _vint(1, 1) + _ld(2, dims)
    return _s(1, name) + _ld(2, _ld(1, ttype))


def _model(graph: bytes) -> bytes:
    return _vint(1, 8) + _s(2, "onnxfab") + _ld(8, _s(1, "") + _vint(2, 13)) + _ld(7, graph)


def write_conv_model(
    path,
    weights: np.ndarray,
    bias: np.ndarray,
    height: int,
    width: int,
    sigmoid: bool = False,
    global_pool: bool = False,
    in_channels: int = 3,
) -> Path:
    """input (1,in_channels,H,W) -> Conv 1x1 -> [Sigmoid] -> [GlobalAveragePool]."""
    out_channels = weights.shape[0]
    w = np.asarray(weights, dtype=np.float32).reshape(out_channels, in_channels, 1, 1)
    b = np.asarray(bias, dtype=np.float32).reshape(out_channels)

    conv_attrs = _attr_ints("kernel_shape", [1, 1]) + _attr_ints("strides", [1, 1])
    nodes = [_node("Conv", ["image", "w", "b"], ["conv_out"], conv_attrs)]
    tail = "conv_out"
    if sigmoid:
        nodes.append(_node("Sigmoid", [tail], ["sig_out"]))
        tail = "sig_out"
    if global_pool:
        nodes.append(_node("GlobalAveragePool", [tail], ["pooled"]))
        tail = "pooled"
        out_shape = (1, out_channels, 1, 1)
    else:
        out_shape = (1, out_channels, height, width)

    graph = b"".join(_ld(1, n) for n in nodes)
    graph += _s(2, "fab")
    graph += _ld(5, _tensor("w", w)) + _ld(5, _tensor("b", b))
    graph += _ld(11, _value_info("image", (1, in_channels, height, width)))
    graph += _ld(12, _value_info(tail, out_shape))
    path = Path(path)
    path.write_bytes(_model(graph))
    return path


def write_sidecar(model_path, mean, std) -> Path:
    sidecar = Path(model_path).with_suffix(".json")
    sidecar.write_text(json.dumps({"mean": list(mean), "std": list(std)}))
    return sidecar


def segmentation_exg_model(path, height: int, width: int, two_channel: bool = True) -> Path:
    """Green detector equivalent to excess-green > 10 on 8-bit inputs.

    Channel weights (-1, 2, -1) on x = rgb/255 give (2G - R - B)/255; the
    vegetation bias of -10.5/255 puts the decision at integer ExG >= 11,
    safely away from float ties.
    """
    if two_channel:
        w = np.array([[0.0, 0.0, 0.0], [-1.0, 2.0, -1.0]])
        b = np.array([0.0, -10.5 / 255.0])
        return write_conv_model(path, w, b, height, width)
    w = np.array([[-1.0, 2.0, -1.0]])
    b = np.array([-10.5 / 255.0])
    return write_conv_model(path, w, b, height, width, sigmoid=True)


def regression_mean_green_model(path, height: int, width: int, scale: float = 100.0) -> Path:
    """Scalar head: scale * mean(G/255), i.e. exact GVI of a {0,255} green mask."""
    w = np.array([[0.0, scale, 0.0]])
    b = np.array([0.0])
    return write_conv_model(path, w, b, height, width, global_pool=True)
