"""SEPN weight container.

Layout: magic ``SEPN``, u32 version, u32 input channels, u32 input height,
u32 input width, u32 layer count; then per layer a u8 kind tag, the layer's
shape parameters as u32s, and any weights as little-endian float32. All
integers little-endian. Float payloads round-trip bit-exactly.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .layers import Conv, MultiscaleConv
from .network import LayerSpec, Network, NetworkSpec

__all__ = ["save_network", "load_network"]

_MAGIC = b"SEPN"
_VERSION = 1

_TAGS = {"conv": 1, "relu": 2, "down2": 3, "up2": 4, "skip_add": 5, "multiscale_conv": 6}
_KINDS = {v: k for k, v in _TAGS.items()}


def _pack_f32(arr: np.ndarray) -> bytes:
    return np.ascontiguousarray(arr, dtype="<f4").tobytes()


def save_network(path, net: Network) -> None:
    spec = net.spec
    out = bytearray()
    out += _MAGIC
    out += struct.pack("<IIIII", _VERSION, spec.input_channels,
                       spec.input_height, spec.input_width, len(spec.layers))
    for ls, layer in zip(spec.layers, net.layers):
        out.append(_TAGS[ls.kind])
        if ls.kind == "conv":
            out += struct.pack("<IIIII", ls.k, ls.out_channels, ls.stride,
                               layer.pad, layer.in_channels)
            out += _pack_f32(layer.w)
            out += _pack_f32(layer.b)
        elif ls.kind == "skip_add":
            out += struct.pack("<I", ls.from_layer)
        elif ls.kind == "multiscale_conv":
            out += struct.pack("<IIII", ls.k, ls.k_wide, ls.out_channels,
                               layer.in_channels)
            out += _pack_f32(layer.narrow.w)
            out += _pack_f32(layer.narrow.b)
            out += _pack_f32(layer.wide.w)
    Path(path).write_bytes(bytes(out))


def load_network(path) -> Network:
    data = Path(path).read_bytes()
    if data[:4] != _MAGIC:
        raise ValueError(f"{path}: not a SEPN weight file")
    version, in_ch, in_h, in_w, n_layers = struct.unpack_from("<IIIII", data, 4)
    if version != _VERSION:
        raise ValueError(f"{path}: unsupported version {version}")
    pos = 24
    specs: list[LayerSpec] = []
    payloads = []
    for _ in range(n_layers):
        tag = data[pos]
        pos += 1
        kind = _KINDS.get(tag)
        if kind is None:
            raise ValueError(f"{path}: unknown layer tag {tag}")
        if kind == "conv":
            k, out_c, stride, pad, lin_c = struct.unpack_from("<IIIII", data, pos)
            pos += 20
            w, pos = _take_f32(data, pos, (out_c, lin_c, k, k))
            b, pos = _take_f32(data, pos, (out_c,))
            specs.append(LayerSpec("conv", k=k, out_channels=out_c, stride=stride, pad=pad))
            payloads.append((w, b))
        elif kind == "skip_add":
            (src,) = struct.unpack_from("<I", data, pos)
            pos += 4
            specs.append(LayerSpec("skip_add", from_layer=src))
            payloads.append(None)
        elif kind == "multiscale_conv":
            k_n, k_w, out_c, lin_c = struct.unpack_from("<IIII", data, pos)
            pos += 16
            wn, pos = _take_f32(data, pos, (out_c, lin_c, k_n, k_n))
            bn, pos = _take_f32(data, pos, (out_c,))
            ww, pos = _take_f32(data, pos, (out_c, lin_c, k_w, k_w))
            specs.append(LayerSpec("multiscale_conv", k=k_n, k_wide=k_w, out_channels=out_c))
            payloads.append((wn, bn, ww))
        else:
            specs.append(LayerSpec(kind))
            payloads.append(None)
    if pos != len(data):
        raise ValueError(f"{path}: {len(data) - pos} trailing bytes")

    net = Network(NetworkSpec(in_ch, in_h, in_w, tuple(specs)), rng_seed=None)
    for layer, payload in zip(net.layers, payloads):
        if payload is None:
            continue
        if isinstance(layer, Conv):
            layer.w, layer.b = payload
        elif isinstance(layer, MultiscaleConv):
            layer.narrow.w, layer.narrow.b, layer.wide.w = payload
    return net


def _take_f32(data: bytes, pos: int, shape) -> tuple[np.ndarray, int]:
    count = int(np.prod(shape))
    arr = np.frombuffer(data, dtype="<f4", offset=pos, count=count).reshape(shape).copy()
    return arr, pos + 4 * count
