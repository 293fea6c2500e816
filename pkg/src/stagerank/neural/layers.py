"""Layers of a minimal 3D tensor engine.

Tensors are float64 numpy arrays in (N, C, nx, ny, nz) layout. Each
layer owns its parameters and gradient buffers, caches what its
backward pass needs during forward, and returns the input gradient from
``backward``. Mode is "train", "eval", or "check" (train-time math with
frozen batch-norm running statistics, for finite-difference audits).
"""

from __future__ import annotations

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import ConfigInvalid, DegenerateBatch, ShapeMismatch

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
]


class Layer:
    """Common parameter bookkeeping; subclasses fill params/grads."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def zero_grads(self):
        for name, p in self.params.items():
            self.grads[name] = np.zeros_like(p)

    def named_children(self) -> list[tuple[str, "Layer"]]:
        return []

    def forward(self, x: np.ndarray, mode: str = "train", rng=None) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError


def he_uniform(shape, fan_in: int, rng: np.random.Generator) -> np.ndarray:
    """Centered uniform with the fan-in-scaled bound sqrt(6 / fan_in)."""
    bound = np.sqrt(6.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


class Conv3D(Layer):
    """3D cross-correlation, stride 1, zero 'same' padding, odd kernel.

    ``bias=False`` drops the bias term — used wherever batch norm
    follows, since the normalization subtracts any bias exactly and
    would leave it an untrainable (zero-gradient) parameter.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 rng: np.random.Generator | None = None, bias: bool = True):
        super().__init__()
        if kernel_size % 2 != 1:
            raise ConfigInvalid(f"kernel size must be odd, got {kernel_size}")
        self.in_channels = in_channels
        self.out_channels = out_channels
        self.kernel_size = kernel_size
        rng = rng or np.random.default_rng(0)
        fan_in = in_channels * kernel_size**3
        k = kernel_size
        self.params["w"] = he_uniform((out_channels, in_channels, k, k, k), fan_in, rng)
        if bias:
            self.params["b"] = np.zeros(out_channels)
        self.zero_grads()
        self._windows = None

    def forward(self, x, mode="train", rng=None):
        if x.ndim != 5 or x.shape[1] != self.in_channels:
            raise ShapeMismatch(
                f"expected (N,{self.in_channels},*,*,*), got {x.shape}"
            )
        k = self.kernel_size
        p = k // 2
        xp = np.pad(x, [(0, 0), (0, 0), (p, p), (p, p), (p, p)])
        win = sliding_window_view(xp, (k, k, k), axis=(2, 3, 4))
        out = np.einsum("ncxyzijk,fcijk->nfxyz", win, self.params["w"], optimize=True)
        if "b" in self.params:
            out += self.params["b"][None, :, None, None, None]
        self._windows = win
        return out

    def backward(self, dout):
        w = self.params["w"]
        k = self.kernel_size
        p = k // 2
        if "b" in self.params:
            self.grads["b"] += dout.sum(axis=(0, 2, 3, 4))
        self.grads["w"] += np.einsum(
            "ncxyzijk,nfxyz->fcijk", self._windows, dout, optimize=True
        )
        dp = np.pad(dout, [(0, 0), (0, 0), (p, p), (p, p), (p, p)])
        dwin = sliding_window_view(dp, (k, k, k), axis=(2, 3, 4))
        flipped = w[:, :, ::-1, ::-1, ::-1]
        return np.einsum("nfxyzijk,fcijk->ncxyz", dwin, flipped, optimize=True)


class BatchNorm3D(Layer):
    """Per-channel normalization over batch and spatial axes.

    Train mode uses the biased batch variance and updates running
    statistics by running <- bn_momentum*running + (1-bn_momentum)*batch;
    eval mode is a pure function of the running statistics. "check"
    mode runs the train-mode math without touching running stats.
    """

    def __init__(self, channels: int, eps: float = 1e-5, bn_momentum: float = 0.9):
        super().__init__()
        self.channels = channels
        self.eps = eps
        self.bn_momentum = bn_momentum
        self.params["gamma"] = np.ones(channels)
        self.params["beta"] = np.zeros(channels)
        self.running_mean = np.zeros(channels)
        self.running_var = np.ones(channels)
        self.zero_grads()
        self._cache = None

    _AXES = (0, 2, 3, 4)

    def forward(self, x, mode="train", rng=None):
        if x.ndim != 5 or x.shape[1] != self.channels:
            raise ShapeMismatch(f"expected (N,{self.channels},*,*,*), got {x.shape}")
        gamma = self.params["gamma"][None, :, None, None, None]
        beta = self.params["beta"][None, :, None, None, None]
        if mode == "eval":
            xhat = (x - self.running_mean[None, :, None, None, None]) / np.sqrt(
                self.running_var[None, :, None, None, None] + self.eps
            )
            return gamma * xhat + beta
        count = x.shape[0] * x.shape[2] * x.shape[3] * x.shape[4]
        if count < 2:
            raise DegenerateBatch(
                f"batch-norm needs >= 2 values per channel, got {count}"
            )
        mean = x.mean(axis=self._AXES)
        var = x.var(axis=self._AXES)
        if mode == "train":
            m = self.bn_momentum
            self.running_mean = m * self.running_mean + (1 - m) * mean
            self.running_var = m * self.running_var + (1 - m) * var
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean[None, :, None, None, None]) * inv_std[None, :, None, None, None]
        self._cache = (xhat, inv_std, count)
        return gamma * xhat + beta

    def backward(self, dout):
        xhat, inv_std, count = self._cache
        gamma = self.params["gamma"][None, :, None, None, None]
        self.grads["beta"] += dout.sum(axis=self._AXES)
        self.grads["gamma"] += (dout * xhat).sum(axis=self._AXES)
        dxhat = dout * gamma
        sum_dxhat = dxhat.sum(axis=self._AXES)[None, :, None, None, None]
        sum_dxhat_xhat = (dxhat * xhat).sum(axis=self._AXES)[None, :, None, None, None]
        return (inv_std[None, :, None, None, None] / count) * (
            count * dxhat - sum_dxhat - xhat * sum_dxhat_xhat
        )


class ReLU(Layer):
    def forward(self, x, mode="train", rng=None):
        self._mask = x > 0
        return np.where(self._mask, x, 0.0)

    def backward(self, dout):
        return np.where(self._mask, dout, 0.0)


class MaxPool3D(Layer):
    """Window max with truncated odd remainders; gradient flows to the
    first occurrence of each window maximum."""

    def __init__(self, size: int = 2, stride: int = 2):
        super().__init__()
        if size != stride:
            raise ConfigInvalid("only size == stride pooling is supported")
        self.size = size

    def forward(self, x, mode="train", rng=None):
        s = self.size
        n, c, dx, dy, dz = x.shape
        ox, oy, oz = dx // s, dy // s, dz // s
        if min(ox, oy, oz) < 1:
            raise ShapeMismatch(f"spatial dims {x.shape[2:]} smaller than pool {s}")
        cropped = x[:, :, : ox * s, : oy * s, : oz * s]
        windows = (
            cropped.reshape(n, c, ox, s, oy, s, oz, s)
            .transpose(0, 1, 2, 4, 6, 3, 5, 7)
            .reshape(n, c, ox, oy, oz, s**3)
        )
        self._argmax = np.argmax(windows, axis=-1)
        self._in_shape = x.shape
        return np.take_along_axis(windows, self._argmax[..., None], axis=-1)[..., 0]

    def backward(self, dout):
        s = self.size
        n, c, dx, dy, dz = self._in_shape
        ox, oy, oz = dx // s, dy // s, dz // s
        scattered = np.zeros((n, c, ox, oy, oz, s**3))
        np.put_along_axis(scattered, self._argmax[..., None], dout[..., None], axis=-1)
        dx_crop = (
            scattered.reshape(n, c, ox, oy, oz, s, s, s)
            .transpose(0, 1, 2, 5, 3, 6, 4, 7)
            .reshape(n, c, ox * s, oy * s, oz * s)
        )
        full = np.zeros(self._in_shape)
        full[:, :, : ox * s, : oy * s, : oz * s] = dx_crop
        return full


class Dropout(Layer):
    """Inverted dropout: train-time survivors scaled by 1/(1-rate)."""

    def __init__(self, rate: float = 0.5):
        super().__init__()
        if not 0.0 <= rate < 1.0:
            raise ConfigInvalid(f"dropout rate must be in [0,1), got {rate}")
        self.rate = rate

    def forward(self, x, mode="train", rng=None):
        if mode != "train" or self.rate == 0.0:
            self._mask = None
            return x
        keep = 1.0 - self.rate
        self._mask = (rng.random(x.shape) < keep) / keep
        return x * self._mask

    def backward(self, dout):
        if self._mask is None:
            return dout
        return dout * self._mask


class Flatten(Layer):
    def forward(self, x, mode="train", rng=None):
        self._shape = x.shape
        return x.reshape(x.shape[0], -1)

    def backward(self, dout):
        return dout.reshape(self._shape)


class Dense(Layer):
    def __init__(self, in_width: int, out_width: int, rng: np.random.Generator | None = None):
        super().__init__()
        self.in_width = in_width
        self.out_width = out_width
        rng = rng or np.random.default_rng(0)
        self.params["w"] = he_uniform((in_width, out_width), in_width, rng)
        self.params["b"] = np.zeros(out_width)
        self.zero_grads()

    def forward(self, x, mode="train", rng=None):
        if x.ndim != 2 or x.shape[1] != self.in_width:
            raise ShapeMismatch(f"expected (N,{self.in_width}), got {x.shape}")
        self._x = x
        return x @ self.params["w"] + self.params["b"]

    def backward(self, dout):
        self.grads["w"] += self._x.T @ dout
        self.grads["b"] += dout.sum(axis=0)
        return dout @ self.params["w"].T


class ResidualBlock3D(Layer):
    """out = ReLU(x + F(x)), F = Conv-BN-ReLU-Conv-BN.

    When the width changes, the identity path becomes a 1x1x1
    projection convolution followed by its own batch norm.
    """

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int = 3,
                 rng: np.random.Generator | None = None):
        super().__init__()
        rng = rng or np.random.default_rng(0)
        self.conv1 = Conv3D(in_channels, out_channels, kernel_size, rng, bias=False)
        self.bn1 = BatchNorm3D(out_channels)
        self.relu1 = ReLU()
        self.conv2 = Conv3D(out_channels, out_channels, kernel_size, rng, bias=False)
        self.bn2 = BatchNorm3D(out_channels)
        if in_channels != out_channels:
            self.proj = Conv3D(in_channels, out_channels, 1, rng, bias=False)
            self.proj_bn = BatchNorm3D(out_channels)
        else:
            self.proj = None
            self.proj_bn = None

    def named_children(self) -> list[tuple[str, Layer]]:
        kids = [
            ("conv1", self.conv1),
            ("bn1", self.bn1),
            ("conv2", self.conv2),
            ("bn2", self.bn2),
        ]
        if self.proj is not None:
            kids += [("proj", self.proj), ("proj_bn", self.proj_bn)]
        return kids

    def zero_grads(self):
        for _, child in self.named_children():
            child.zero_grads()

    def forward(self, x, mode="train", rng=None):
        branch = self.conv1.forward(x, mode, rng)
        branch = self.bn1.forward(branch, mode, rng)
        branch = self.relu1.forward(branch, mode, rng)
        branch = self.conv2.forward(branch, mode, rng)
        branch = self.bn2.forward(branch, mode, rng)
        if self.proj is not None:
            shortcut = self.proj_bn.forward(self.proj.forward(x, mode, rng), mode, rng)
        else:
            shortcut = x
        pre = shortcut + branch
        self._mask = pre > 0
        return np.where(self._mask, pre, 0.0)

    def backward(self, dout):
        dpre = np.where(self._mask, dout, 0.0)
        dbranch = self.bn2.backward(dpre)
        dbranch = self.conv2.backward(dbranch)
        dbranch = self.relu1.backward(dbranch)
        dbranch = self.bn1.backward(dbranch)
        dx = self.conv1.backward(dbranch)
        if self.proj is not None:
            dx += self.proj.backward(self.proj_bn.backward(dpre))
        else:
            dx += dpre
        return dx
