"""SGD with momentum and a stepwise learning-rate schedule.

Update convention (declared, matching the historical trainer the
hyperparameters come from): v <- momentum*v - lr*g; w <- w + v.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import ConfigInvalid, ShapeMismatch

__all__ = ["TrainConfig", "lr_at", "sgd_momentum_step"]


@dataclass(frozen=True)
class TrainConfig:
    base_lr: float = 5e-5
    momentum: float = 0.9
    lr_step: int = 40000
    lr_gamma: float = 0.1
    max_iter: int = 120000
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.base_lr <= 0:
            raise ConfigInvalid(f"base_lr must be > 0, got {self.base_lr}")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigInvalid(f"momentum must be in [0,1), got {self.momentum}")
        if not 0.0 < self.lr_gamma <= 1.0:
            raise ConfigInvalid(f"lr_gamma must be in (0,1], got {self.lr_gamma}")
        if self.lr_step < 1:
            raise ConfigInvalid(f"lr_step must be >= 1, got {self.lr_step}")
        if self.batch_size < 1:
            raise ConfigInvalid(f"batch_size must be >= 1, got {self.batch_size}")
        if self.max_iter < 1:
            raise ConfigInvalid(f"max_iter must be >= 1, got {self.max_iter}")


def lr_at(iteration: int, config: TrainConfig) -> float:
    """base_lr * gamma^floor(iteration / step)."""
    if iteration < 0:
        raise ConfigInvalid(f"iteration must be >= 0, got {iteration}")
    return config.base_lr * config.lr_gamma ** (iteration // config.lr_step)


def sgd_momentum_step(params, grads, velocity, lr: float, momentum: float) -> None:
    """In-place momentum update over aligned parameter/gradient lists."""
    if not (len(params) == len(grads) == len(velocity)):
        raise ShapeMismatch("params, grads, velocity must align")
    for w, g, v in zip(params, grads, velocity):
        if not (w.shape == g.shape == v.shape):
            raise ShapeMismatch(f"shapes differ: {w.shape} / {g.shape} / {v.shape}")
        v *= momentum
        v -= lr * g
        w += v
