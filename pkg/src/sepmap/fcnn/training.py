"""SGD-with-momentum training over shuffled mini-batches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .network import Network

__all__ = ["TrainConfig", "train"]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-5
    batch_size: int = 4
    iterations: int = 1000
    momentum: float = 0.9
    rng_seed: int = 0

    def __post_init__(self):
        # learning_rate 0 is allowed: a zero-rate run must leave weights untouched.
        if self.learning_rate < 0:
            raise ValueError(f"learning_rate must be >= 0, got {self.learning_rate}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.iterations < 0:
            raise ValueError(f"iterations must be >= 0, got {self.iterations}")


def train(net: Network, dataset, config: TrainConfig):
    """Run `config.iterations` SGD steps; returns (net, per-iteration losses).

    Each step draws the next `batch_size` samples from an epoch-wise shuffled
    order, accumulates per-sample gradients in float64, and applies a momentum
    update to the float32 weights. The recorded loss is the mean per-sample
    squared-error sum of the mini-batch. Deterministic for a given seed.
    """
    if not dataset:
        raise ValueError("empty dataset")
    xs = [np.ascontiguousarray(img, dtype=np.float32) for img, _ in dataset]
    ts = [np.ascontiguousarray(t, dtype=np.float32).reshape(1, *np.asarray(t).shape[-2:])
          for _, t in dataset]
    shape0 = xs[0].shape
    for i, x in enumerate(xs):
        if x.shape != shape0:
            raise ValueError(f"sample {i} shape {x.shape} != {shape0}")

    rng = np.random.default_rng(config.rng_seed)
    params = net.params()
    velocity = [np.zeros_like(p) for p in params]
    history: list[float] = []

    order: list[int] = []
    n = len(xs)
    for it in range(config.iterations):
        while len(order) < config.batch_size:
            order.extend(rng.permutation(n).tolist())
        batch, order = order[:config.batch_size], order[config.batch_size:]

        xb = np.stack([xs[i] for i in batch])
        tb = np.stack([ts[i] for i in batch])
        p = net.forward_batch(xb, keep=True)
        diff = p.astype(np.float64) - tb.astype(np.float64)
        batch_loss = float(np.sum(diff * diff) / len(batch))
        if not np.isfinite(batch_loss):
            raise ValueError(f"training diverged at iteration {it}: loss {batch_loss}")
        history.append(batch_loss)

        # d(mean sample loss)/dp = 2 * (p - t) / batch_size
        dy = (2.0 / len(batch)) * diff
        grads = net.backward_batch(dy.astype(np.float32))
        for parr, v, g in zip(params, velocity, grads):
            step = config.momentum * v.astype(np.float64) - config.learning_rate * g
            np.copyto(v, step.astype(v.dtype))
            parr += v
    return net, history
