"""Minimal 3D tensor engine and the two-stream ranking network."""

from .layers import (
    BatchNorm3D,
    Conv3D,
    Dense,
    Dropout,
    Flatten,
    Layer,
    MaxPool3D,
    ReLU,
    ResidualBlock3D,
)
from .losses import sigmoid, sigmoid_ce_loss, softmax, softmax_ce_loss
from .network import (
    NetConfig,
    Network,
    extract_features,
    grad_check,
    net_preset,
    stack_regions,
    train,
)
from .optim import TrainConfig, lr_at, sgd_momentum_step

__all__ = [
    "Layer",
    "Conv3D",
    "BatchNorm3D",
    "ReLU",
    "MaxPool3D",
    "Dropout",
    "Flatten",
    "Dense",
    "ResidualBlock3D",
    "sigmoid",
    "sigmoid_ce_loss",
    "softmax",
    "softmax_ce_loss",
    "TrainConfig",
    "lr_at",
    "sgd_momentum_step",
    "NetConfig",
    "Network",
    "net_preset",
    "stack_regions",
    "train",
    "grad_check",
    "extract_features",
]
