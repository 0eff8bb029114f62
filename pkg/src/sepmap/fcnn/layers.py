"""Network layers with forward and analytic backward passes.

All layers operate on batched tensors of shape (N, C, H, W). Weights live in
float32; a layer instantiated with float64 weights (see Network.astype) runs
its whole pass in float64, which is what the finite-difference checks use.
Gradient accumulation happens in float64 regardless of weight dtype.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Conv", "Relu", "Down2", "Up2", "SkipAdd", "MultiscaleConv"]


def _im2col(x: np.ndarray, k: int, stride: int, pad: int):
    """(N, C, H, W) -> column matrix (N, C*k*k, Ho*Wo) plus output size."""
    n, c, h, w = x.shape
    if pad:
        x = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    hp, wp = x.shape[2], x.shape[3]
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    win = np.lib.stride_tricks.sliding_window_view(x, (k, k), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]                    # (N, C, Ho, Wo, k, k)
    cols = win.transpose(0, 1, 4, 5, 2, 3).reshape(n, c * k * k, ho * wo)
    return np.ascontiguousarray(cols), ho, wo


def _col2im(dcols: np.ndarray, xshape, k: int, stride: int, pad: int) -> np.ndarray:
    """Scatter-add column gradients back to input shape (inverse of _im2col)."""
    n, c, h, w = xshape
    hp, wp = h + 2 * pad, w + 2 * pad
    ho = (hp - k) // stride + 1
    wo = (wp - k) // stride + 1
    dx = np.zeros((n, c, hp, wp), dtype=dcols.dtype)
    d6 = dcols.reshape(n, c, k, k, ho, wo)
    for i in range(k):
        for j in range(k):
            dx[:, :, i:i + stride * ho:stride, j:j + stride * wo:stride] += d6[:, :, i, j]
    if pad:
        dx = dx[:, :, pad:hp - pad, pad:wp - pad]
    return dx


class Conv:
    """2-D convolution with zero padding (default 'same' for stride 1)."""

    def __init__(self, in_channels: int, out_channels: int, k: int,
                 stride: int = 1, pad: int | None = None, bias: bool = True):
        if k % 2 == 0:
            raise ValueError(f"conv kernels must be odd-sized, got {k}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.k = k
        self.stride = stride
        self.pad = k // 2 if pad is None else pad
        self.w = np.zeros((out_channels, in_channels, k, k), dtype=np.float32)
        self.b = np.zeros(out_channels, dtype=np.float32) if bias else None
        self.dw = None
        self.db = None
        self._cols = None
        self._xshape = None

    def init_weights(self, rng: np.random.Generator) -> None:
        fan_in = self.in_channels * self.k * self.k
        bound = np.sqrt(6.0 / fan_in)
        self.w = rng.uniform(-bound, bound, size=self.w.shape).astype(np.float32)
        if self.b is not None:
            self.b = np.zeros(self.out_channels, dtype=np.float32)

    def out_shape(self, c: int, h: int, w: int):
        if c != self.in_channels:
            raise ValueError(f"conv expects {self.in_channels} channels, got {c}")
        ho = (h + 2 * self.pad - self.k) // self.stride + 1
        wo = (w + 2 * self.pad - self.k) // self.stride + 1
        return self.out_channels, ho, wo

    def forward(self, x: np.ndarray) -> np.ndarray:
        cols, ho, wo = _im2col(x.astype(self.w.dtype, copy=False), self.k, self.stride, self.pad)
        self._cols = cols
        self._xshape = x.shape
        w2 = self.w.reshape(self.out_channels, -1)
        y = w2 @ cols                                      # (N, out, Ho*Wo)
        if self.b is not None:
            y = y + self.b[:, None]
        return y.reshape(x.shape[0], self.out_channels, ho, wo)

    def backward(self, dy: np.ndarray) -> np.ndarray:
        n = dy.shape[0]
        ckk = self.in_channels * self.k * self.k
        dyf = dy.reshape(n, self.out_channels, -1)
        # Weight gradient as one float64 GEMM over the batch-flattened columns.
        dy2 = dyf.transpose(1, 0, 2).reshape(self.out_channels, -1).astype(np.float64)
        cols2 = self._cols.transpose(1, 0, 2).reshape(ckk, -1).astype(np.float64)
        self.dw = (dy2 @ cols2.T).reshape(self.w.shape)
        if self.b is not None:
            self.db = dy2.sum(axis=1)
        w2 = self.w.reshape(self.out_channels, -1)
        dcols = np.matmul(w2.T.astype(dy.dtype, copy=False), dyf)
        dx = _col2im(dcols, self._xshape, self.k, self.stride, self.pad)
        self._cols = None
        return dx

    def params(self):
        return [self.w] if self.b is None else [self.w, self.b]

    def grads(self):
        return [self.dw] if self.b is None else [self.dw, self.db]


class Relu:
    def __init__(self):
        self._mask = None

    def out_shape(self, c, h, w):
        return c, h, w

    def forward(self, x):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dy):
        return dy * self._mask

    def params(self):
        return []

    def grads(self):
        return []


class Down2:
    """2x2 max pooling with stride 2; ties route to the first maximum."""

    def __init__(self):
        self._idx = None
        self._inshape = None

    def out_shape(self, c, h, w):
        if h % 2 or w % 2:
            raise ValueError(f"down2 needs even spatial size, got {h}x{w}")
        return c, h // 2, w // 2

    def forward(self, x):
        n, c, h, w = x.shape
        self._inshape = x.shape
        xr = x.reshape(n, c, h // 2, 2, w // 2, 2).transpose(0, 1, 2, 4, 3, 5)
        blocks = xr.reshape(n, c, h // 2, w // 2, 4)
        self._idx = blocks.argmax(axis=-1)
        return np.take_along_axis(blocks, self._idx[..., None], axis=-1)[..., 0]

    def backward(self, dy):
        n, c, h, w = self._inshape
        dblocks = np.zeros((n, c, h // 2, w // 2, 4), dtype=dy.dtype)
        np.put_along_axis(dblocks, self._idx[..., None], dy[..., None], axis=-1)
        dx = dblocks.reshape(n, c, h // 2, w // 2, 2, 2).transpose(0, 1, 2, 4, 3, 5)
        return dx.reshape(n, c, h, w)

    def params(self):
        return []

    def grads(self):
        return []


class Up2:
    """Nearest-neighbor 2x upsampling."""

    def out_shape(self, c, h, w):
        return c, 2 * h, 2 * w

    def forward(self, x):
        return x.repeat(2, axis=2).repeat(2, axis=3)

    def backward(self, dy):
        n, c, h, w = dy.shape
        return dy.reshape(n, c, h // 2, 2, w // 2, 2).sum(axis=(3, 5))

    def params(self):
        return []

    def grads(self):
        return []


class SkipAdd:
    """Adds the stored output of an earlier layer; gradient fans out to both."""

    def __init__(self, from_layer: int):
        self.from_layer = from_layer

    def out_shape(self, c, h, w):
        return c, h, w

    def forward(self, x, skip_value):
        if x.shape != skip_value.shape:
            raise ValueError(
                f"skip_add shape mismatch: {x.shape} vs {skip_value.shape} from layer {self.from_layer}")
        return x + skip_value

    def backward(self, dy):
        return dy  # identical gradient flows to the skip source

    def params(self):
        return []

    def grads(self):
        return []


class MultiscaleConv:
    """Two parallel same-resolution convolutions, one with a wider kernel.

    Output is the sum of both branches; the bias lives on the narrow branch so
    zeroing the wide kernel reduces exactly to a plain convolution.
    """

    def __init__(self, in_channels: int, out_channels: int, k_narrow: int, k_wide: int):
        self.narrow = Conv(in_channels, out_channels, k_narrow, bias=True)
        self.wide = Conv(in_channels, out_channels, k_wide, bias=False)
        self.in_channels = in_channels
        self.out_channels = out_channels

    def init_weights(self, rng: np.random.Generator) -> None:
        self.narrow.init_weights(rng)
        self.wide.init_weights(rng)

    def out_shape(self, c, h, w):
        return self.narrow.out_shape(c, h, w)

    def forward(self, x):
        return self.narrow.forward(x) + self.wide.forward(x)

    def backward(self, dy):
        return self.narrow.backward(dy) + self.wide.backward(dy)

    def params(self):
        return self.narrow.params() + self.wide.params()

    def grads(self):
        return self.narrow.grads() + self.wide.grads()
