"""Network assembly: layer specs, shape validation, forward/backward, loss.

A network is an ordered list of layers; skip_add layers reference the output
of an earlier layer by index (0-based). The public single-sample API works on
(C, H, W) tensors; training uses the batched (N, C, H, W) path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .layers import Conv, Down2, MultiscaleConv, Relu, SkipAdd, Up2

__all__ = ["LayerSpec", "NetworkSpec", "Network", "forward", "backward", "loss",
           "default_toy_spec"]

LAYER_KINDS = ("conv", "relu", "down2", "up2", "skip_add", "multiscale_conv")


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    k: int = 0
    k_wide: int = 0
    out_channels: int = 0
    stride: int = 1
    pad: int = -1  # -1 means k // 2
    from_layer: int = -1

    def __post_init__(self):
        if self.kind not in LAYER_KINDS:
            raise ValueError(f"unknown layer kind {self.kind!r}")


def conv(k: int, out_channels: int, stride: int = 1, pad: int = -1) -> LayerSpec:
    return LayerSpec("conv", k=k, out_channels=out_channels, stride=stride, pad=pad)


def relu() -> LayerSpec:
    return LayerSpec("relu")


def down2() -> LayerSpec:
    return LayerSpec("down2")


def up2() -> LayerSpec:
    return LayerSpec("up2")


def skip_add(from_layer: int) -> LayerSpec:
    return LayerSpec("skip_add", from_layer=from_layer)


def multiscale_conv(k_narrow: int, k_wide: int, out_channels: int) -> LayerSpec:
    return LayerSpec("multiscale_conv", k=k_narrow, k_wide=k_wide, out_channels=out_channels)


@dataclass(frozen=True)
class NetworkSpec:
    input_channels: int
    input_height: int
    input_width: int
    layers: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))


def default_toy_spec(input_channels: int = 4, height: int = 64, width: int = 64) -> NetworkSpec:
    """Small encoder-decoder: contracting path, parallel wide-kernel block,
    expanding path with a skip reuse of the early high-resolution features."""
    return NetworkSpec(input_channels, height, width, (
        conv(3, 16),            # 0
        relu(),                 # 1
        down2(),                # 2
        multiscale_conv(3, 7, 32),  # 3
        relu(),                 # 4
        down2(),                # 5
        conv(3, 32),            # 6
        relu(),                 # 7
        up2(),                  # 8
        conv(3, 16),            # 9
        relu(),                 # 10
        skip_add(2),            # 11 <- early 16ch half-resolution features
        up2(),                  # 12
        conv(3, 1),             # 13
    ))


class Network:
    """Instantiated network: spec plus weights.

    Mutable only while training; forward/backward on a fixed weight set are
    pure. `rng_seed` drives He-style uniform weight initialization.
    """

    def __init__(self, spec: NetworkSpec, rng_seed: int | None = 0):
        self.spec = spec
        self.layers = []
        self._outputs = None
        c, h, w = spec.input_channels, spec.input_height, spec.input_width
        shapes = []
        for idx, ls in enumerate(spec.layers):
            try:
                layer = self._build_layer(ls, c)
                if ls.kind == "skip_add":
                    if not (0 <= ls.from_layer < idx):
                        raise ValueError(f"skip source {ls.from_layer} not an earlier layer")
                    if shapes[ls.from_layer] != (c, h, w):
                        raise ValueError(
                            f"skip source shape {shapes[ls.from_layer]} != join shape {(c, h, w)}")
                c, h, w = layer.out_shape(c, h, w)
                if h <= 0 or w <= 0:
                    raise ValueError(f"spatial size collapsed to {h}x{w}")
            except ValueError as exc:
                raise ValueError(f"layer {idx}: {exc}") from None
            shapes.append((c, h, w))
            self.layers.append(layer)
        if c != 1 or (h, w) != (spec.input_height, spec.input_width):
            raise ValueError(
                f"network must map to 1x{spec.input_height}x{spec.input_width}, got {c}x{h}x{w}")
        if rng_seed is not None:
            rng = np.random.default_rng(rng_seed)
            for layer in self.layers:
                if hasattr(layer, "init_weights"):
                    layer.init_weights(rng)

    @staticmethod
    def _build_layer(ls: LayerSpec, in_channels: int):
        if ls.kind == "conv":
            pad = None if ls.pad < 0 else ls.pad
            return Conv(in_channels, ls.out_channels, ls.k, stride=ls.stride, pad=pad)
        if ls.kind == "relu":
            return Relu()
        if ls.kind == "down2":
            return Down2()
        if ls.kind == "up2":
            return Up2()
        if ls.kind == "skip_add":
            return SkipAdd(ls.from_layer)
        if ls.kind == "multiscale_conv":
            return MultiscaleConv(in_channels, ls.out_channels, ls.k, ls.k_wide)
        raise ValueError(f"unknown layer kind {ls.kind!r}")

    # -- shape helpers ------------------------------------------------------

    def _check_input(self, x: np.ndarray) -> None:
        want = (self.spec.input_channels, self.spec.input_height, self.spec.input_width)
        if x.shape[-3:] != want:
            raise ValueError(f"layer 0: input shape {x.shape[-3:]} does not match spec {want}")

    # -- batched passes -----------------------------------------------------

    def forward_batch(self, xb: np.ndarray, keep: bool = False) -> np.ndarray:
        """Run (N, C, H, W) through the network; `keep` retains activations
        for a following backward_batch call."""
        self._check_input(xb)
        outputs = []
        cur = xb
        for idx, layer in enumerate(self.layers):
            try:
                if isinstance(layer, SkipAdd):
                    cur = layer.forward(cur, outputs[layer.from_layer])
                else:
                    cur = layer.forward(cur)
            except ValueError as exc:
                raise ValueError(f"layer {idx}: {exc}") from None
            outputs.append(cur)
        self._outputs = outputs if keep else None
        return cur

    def backward_batch(self, dy: np.ndarray) -> list[np.ndarray]:
        """Backpropagate an output gradient; returns per-parameter gradients
        (float64) in params() order. Requires a forward_batch(keep=True)."""
        if self._outputs is None:
            raise RuntimeError("backward_batch requires forward_batch(keep=True)")
        n_layers = len(self.layers)
        pending = [None] * n_layers  # gradient w.r.t. each layer's output
        pending[n_layers - 1] = dy
        for idx in range(n_layers - 1, -1, -1):
            grad = pending[idx]
            if grad is None:
                continue
            layer = self.layers[idx]
            dx = layer.backward(grad)
            if isinstance(layer, SkipAdd):
                src = layer.from_layer
                pending[src] = dx if pending[src] is None else pending[src] + dx
            if idx > 0:
                pending[idx - 1] = dx if pending[idx - 1] is None else pending[idx - 1] + dx
        self._outputs = None
        return self.grads()

    # -- parameters ---------------------------------------------------------

    def params(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.params())
        return out

    def grads(self) -> list[np.ndarray]:
        out = []
        for layer in self.layers:
            out.extend(layer.grads())
        return out

    def set_params(self, values) -> None:
        for p, v in zip(self.params(), values, strict=True):
            np.copyto(p, v)

    def astype(self, dtype) -> "Network":
        """Copy of the network with weights cast to `dtype` (for FD checks)."""
        other = Network(self.spec, rng_seed=None)
        for mine, theirs in zip(self._weight_layers(), other._weight_layers()):
            theirs.w = mine.w.astype(dtype)
            if theirs.b is not None:
                theirs.b = mine.b.astype(dtype)
        return other

    def _weight_layers(self):
        for layer in self.layers:
            if isinstance(layer, Conv):
                yield layer
            elif isinstance(layer, MultiscaleConv):
                yield layer.narrow
                yield layer.wide


# ---------------------------------------------------------------------------
# Functional surface
# ---------------------------------------------------------------------------


def forward(net: Network, x: np.ndarray) -> np.ndarray:
    """Map a (C, H, W) input to the (1, H, W) likelihood prediction."""
    x = np.asarray(x)
    if x.ndim != 3:
        raise ValueError(f"expected (C, H, W) input, got shape {x.shape}")
    return net.forward_batch(x[None])[0]


def loss(p: np.ndarray, r: np.ndarray) -> float:
    """Sum of squared per-pixel differences, accumulated in float64."""
    p, r = np.asarray(p), np.asarray(r)
    if p.shape != r.shape:
        raise ValueError(f"loss shape mismatch: {p.shape} vs {r.shape}")
    d = p.astype(np.float64) - r.astype(np.float64)
    return float(np.sum(d * d))


def backward(net: Network, x: np.ndarray, target: np.ndarray) -> list[np.ndarray]:
    """Gradient of the squared-error loss w.r.t. every weight."""
    x = np.asarray(x)
    p = net.forward_batch(x[None], keep=True)
    t = np.asarray(target).reshape(p.shape)
    dy = 2.0 * (p.astype(np.float64) - t.astype(np.float64))
    return net.backward_batch(dy.astype(p.dtype))
