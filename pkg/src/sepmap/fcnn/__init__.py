"""Small fully convolutional encoder-decoder with analytic backpropagation."""

from .network import (LayerSpec, Network, NetworkSpec, backward, conv, default_toy_spec,
                      down2, forward, loss, multiscale_conv, relu, skip_add, up2)
from .training import TrainConfig, train
from .weights_io import load_network, save_network

__all__ = [
    "LayerSpec", "Network", "NetworkSpec", "TrainConfig",
    "forward", "backward", "loss", "train",
    "conv", "relu", "down2", "up2", "skip_add", "multiscale_conv",
    "default_toy_spec", "save_network", "load_network",
]
