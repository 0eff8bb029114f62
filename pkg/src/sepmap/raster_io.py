"""File formats for rasters.

Images travel as 8-bit NetPBM (PGM/P5 for single channel, PPM/P6 for RGB);
float-valued likelihood maps use the LKM1 container: magic ``LKM1``, then
little-endian u32 width, u32 height, then width*height little-endian float32
values in row-major order.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .raster import MultiChannelRaster, as_plane

__all__ = [
    "write_lkm", "read_lkm",
    "write_pgm", "read_pgm",
    "write_ppm", "read_ppm",
    "to_u8", "from_u8",
]

_LKM_MAGIC = b"LKM1"


def write_lkm(path, raster) -> None:
    plane = as_plane(raster)
    h, w = plane.shape
    payload = np.ascontiguousarray(plane, dtype="<f4").tobytes()
    with open(path, "wb") as fh:
        fh.write(_LKM_MAGIC)
        fh.write(struct.pack("<II", w, h))
        fh.write(payload)


def read_lkm(path) -> MultiChannelRaster:
    data = Path(path).read_bytes()
    if data[:4] != _LKM_MAGIC:
        raise ValueError(f"{path}: not an LKM1 file")
    w, h = struct.unpack_from("<II", data, 4)
    expected = 12 + 4 * w * h
    if len(data) != expected:
        raise ValueError(f"{path}: expected {expected} bytes, got {len(data)}")
    plane = np.frombuffer(data, dtype="<f4", offset=12).reshape(h, w)
    return MultiChannelRaster(plane.copy())


def to_u8(values: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] floats to u8; round-trips exactly with from_u8."""
    return np.round(np.clip(values, 0.0, 1.0) * 255.0).astype(np.uint8)


def from_u8(values: np.ndarray) -> np.ndarray:
    return values.astype(np.float32) / np.float32(255.0)


def _read_netpbm(path, magic: bytes) -> np.ndarray:
    data = Path(path).read_bytes()
    # Header tokens: magic, width, height, maxval; comments start with '#'.
    tokens = []
    i = 0
    while len(tokens) < 4:
        if i >= len(data):
            raise ValueError(f"{path}: truncated header")
        c = data[i:i + 1]
        if c == b"#":
            while i < len(data) and data[i:i + 1] != b"\n":
                i += 1
        elif c.isspace():
            i += 1
        else:
            j = i
            while j < len(data) and not data[j:j + 1].isspace():
                j += 1
            tokens.append(data[i:j])
            i = j
    if tokens[0] != magic:
        raise ValueError(f"{path}: expected {magic.decode()} file, got {tokens[0]!r}")
    w, h, maxval = int(tokens[1]), int(tokens[2]), int(tokens[3])
    if maxval != 255:
        raise ValueError(f"{path}: only maxval 255 supported, got {maxval}")
    i += 1  # single whitespace after maxval
    channels = 3 if magic == b"P6" else 1
    raw = np.frombuffer(data, dtype=np.uint8, offset=i, count=w * h * channels)
    return raw.reshape(h, w, channels) if channels == 3 else raw.reshape(h, w)


def write_pgm(path, raster) -> None:
    plane = as_plane(raster)
    h, w = plane.shape
    with open(path, "wb") as fh:
        fh.write(b"P5\n%d %d\n255\n" % (w, h))
        fh.write(to_u8(plane).tobytes())


def read_pgm(path) -> MultiChannelRaster:
    return MultiChannelRaster(from_u8(_read_netpbm(path, b"P5")))


def write_ppm(path, rgb: np.ndarray) -> None:
    """Write an (H, W, 3) float raster in [0, 1] as binary PPM."""
    rgb = np.asarray(rgb)
    if rgb.ndim != 3 or rgb.shape[2] != 3:
        raise ValueError(f"PPM needs an (H, W, 3) array, got shape {rgb.shape}")
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(b"P6\n%d %d\n255\n" % (w, h))
        fh.write(to_u8(rgb).tobytes())


def read_ppm(path) -> MultiChannelRaster:
    return MultiChannelRaster(from_u8(_read_netpbm(path, b"P6")))
