"""Two-stream 3D CNN for staged ranking.

Each hemisphere block runs through its own stream —
Conv-BN-ReLU, three residual blocks, max pools at configured stages,
then Flatten-FC-ReLU — and the two stream vectors are concatenated,
passed through dropout, and mapped by one fully connected head to
either K-1 ordinal logits (sigmoid cross entropy, decoded by count) or
K class logits (softmax cross entropy, argmax).

Input intensities are z-scored with per-stream statistics measured on
the training set; the statistics live on the network so inference
applies the identical transform.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from ..errors import ConfigInvalid, ShapeMismatch
from ..features.vectors import FeatureVector
from ..ordinal import decode_matrix, encode_matrix
from ..volume import Region
from .layers import (
    BatchNorm3D,
    Conv3D,
    Dense,
    Dropout,
    Flatten,
    MaxPool3D,
    ReLU,
    ResidualBlock3D,
)
from .losses import sigmoid_ce_loss, softmax_ce_loss
from .optim import TrainConfig, lr_at, sgd_momentum_step

__all__ = [
    "NetConfig",
    "net_preset",
    "Network",
    "stack_regions",
    "train",
    "grad_check",
    "extract_features",
]

_STAGES = ("conv1", "rb1", "rb2", "rb3")


@dataclass(frozen=True)
class NetConfig:
    input_dims: tuple[int, int, int] = (12, 10, 16)
    conv1_kernels: int = 8
    resblock_kernels: tuple[int, int, int] = (8, 16, 16)
    kernel_size: int = 3
    pool_size: int = 2
    pool_stride: int = 2
    fc1_width: int = 32
    head: str = "ordinal"
    k_classes: int = 4
    dropout_rate: float = 0.5
    pool_after: tuple[str, ...] = ("conv1", "rb1", "rb2")
    seed: int = 0

    def __post_init__(self):
        if self.kernel_size % 2 != 1:
            raise ConfigInvalid(f"kernel size must be odd, got {self.kernel_size}")
        if self.head not in ("ordinal", "multiclass"):
            raise ConfigInvalid(f"head must be ordinal|multiclass, got {self.head!r}")
        if self.k_classes < 2:
            raise ConfigInvalid(f"k_classes must be >= 2, got {self.k_classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigInvalid(f"dropout rate in [0,1) required, got {self.dropout_rate}")
        if len(self.resblock_kernels) != 3:
            raise ConfigInvalid("resblock_kernels must list 3 stages")
        unknown = set(self.pool_after) - set(_STAGES)
        if unknown:
            raise ConfigInvalid(f"unknown pool stages {sorted(unknown)}")
        if min(self.conv1_kernels, *self.resblock_kernels, self.fc1_width) < 1:
            raise ConfigInvalid("all widths must be >= 1")
        dims = self.spatial_dims_after()
        if min(dims) < 1:
            raise ConfigInvalid(
                f"pool placement {self.pool_after} collapses {self.input_dims} to {dims}"
            )

    @property
    def head_width(self) -> int:
        return self.k_classes - 1 if self.head == "ordinal" else self.k_classes

    def spatial_dims_after(self) -> tuple[int, int, int]:
        dims = self.input_dims
        for stage in _STAGES:
            if stage in self.pool_after:
                dims = tuple(d // self.pool_size for d in dims)
        return dims

    @property
    def flat_width(self) -> int:
        return self.resblock_kernels[-1] * int(np.prod(self.spatial_dims_after()))


#: Named configurations: the published-scale geometry (kept for shape
#: audits) and a desk-scale preset sized so every spatial dim survives
#: its pools.
_NET_PRESETS = {
    "adni-paper": dict(
        input_dims=(29, 21, 55),
        conv1_kernels=64,
        resblock_kernels=(64, 128, 128),
        fc1_width=256,
        pool_after=("conv1", "rb1", "rb2", "rb3"),
    ),
    "toy": dict(
        input_dims=(12, 10, 16),
        conv1_kernels=8,
        resblock_kernels=(8, 16, 16),
        fc1_width=32,
        pool_after=("conv1", "rb1", "rb2"),
    ),
}

_TRAIN_PRESETS = {
    "adni-paper": TrainConfig(
        base_lr=5e-5, momentum=0.9, lr_step=40000, lr_gamma=0.1,
        max_iter=120000, batch_size=32,
    ),
    "toy": TrainConfig(
        base_lr=2e-3, momentum=0.9, lr_step=150, lr_gamma=0.1,
        max_iter=200, batch_size=8,
    ),
}


def net_preset(name: str, head: str = "ordinal", k_classes: int = 4,
               seed: int = 0) -> tuple[NetConfig, TrainConfig]:
    if name not in _NET_PRESETS:
        raise ConfigInvalid(f"unknown preset {name!r}; have {sorted(_NET_PRESETS)}")
    net = NetConfig(head=head, k_classes=k_classes, seed=seed, **_NET_PRESETS[name])
    return net, replace(_TRAIN_PRESETS[name], seed=seed)


class _Stream:
    """One hemisphere's path from block to feature vector."""

    def __init__(self, config: NetConfig, rng: np.random.Generator):
        k = config.kernel_size
        widths = [config.conv1_kernels, *config.resblock_kernels]
        self.layers: list[tuple[str, object]] = []
        self.layers.append(("conv1", Conv3D(1, widths[0], k, rng, bias=False)))
        self.layers.append(("bn1", BatchNorm3D(widths[0])))
        self.layers.append(("relu1", ReLU()))
        if "conv1" in config.pool_after:
            self.layers.append(("pool1", MaxPool3D(config.pool_size, config.pool_stride)))
        for i in range(3):
            name = f"rb{i + 1}"
            self.layers.append((name, ResidualBlock3D(widths[i], widths[i + 1], k, rng)))
            if name in config.pool_after:
                self.layers.append((f"pool{i + 2}", MaxPool3D(config.pool_size, config.pool_stride)))
        self.layers.append(("flatten", Flatten()))
        self.layers.append(("fc1", Dense(config.flat_width, config.fc1_width, rng)))
        self.layers.append(("relu_fc1", ReLU()))

    def forward(self, x, mode, rng):
        for _, layer in self.layers:
            x = layer.forward(x, mode, rng)
        return x

    def backward(self, dout):
        for _, layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout


def _walk_params(prefix: str, layer) -> list[tuple[str, object, str]]:
    entries = [(f"{prefix}.{key}", layer, key) for key in layer.params]
    for child_name, child in layer.named_children():
        entries.extend(_walk_params(f"{prefix}.{child_name}", child))
    return entries


def _walk_batchnorms(prefix: str, layer) -> list[tuple[str, BatchNorm3D]]:
    found = [(prefix, layer)] if isinstance(layer, BatchNorm3D) else []
    for child_name, child in layer.named_children():
        found.extend(_walk_batchnorms(f"{prefix}.{child_name}", child))
    return found


@dataclass
class NormStats:
    mean: float = 0.0
    std: float = 1.0

    def apply(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std


class Network:
    """Two independent streams, concat fusion, dropout, one-layer head."""

    def __init__(self, config: NetConfig):
        self.config = config
        root = np.random.SeedSequence(config.seed)
        left_rng, right_rng, head_rng = (np.random.default_rng(s) for s in root.spawn(3))
        self.left = _Stream(config, left_rng)
        self.right = _Stream(config, right_rng)
        self.dropout = Dropout(config.dropout_rate)
        self.head = Dense(2 * config.fc1_width, config.head_width, head_rng)
        self.norm_left = NormStats()
        self.norm_right = NormStats()

    # -- parameter access ------------------------------------------------
    def param_entries(self) -> list[tuple[str, object, str]]:
        entries = []
        for side_name, stream in (("left", self.left), ("right", self.right)):
            for layer_name, layer in stream.layers:
                entries.extend(_walk_params(f"{side_name}.{layer_name}", layer))
        entries.extend(_walk_params("head", self.head))
        return entries

    def parameters(self) -> list[np.ndarray]:
        return [layer.params[key] for _, layer, key in self.param_entries()]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[key] for _, layer, key in self.param_entries()]

    def batchnorm_entries(self) -> list[tuple[str, BatchNorm3D]]:
        entries = []
        for side_name, stream in (("left", self.left), ("right", self.right)):
            for layer_name, layer in stream.layers:
                entries.extend(_walk_batchnorms(f"{side_name}.{layer_name}", layer))
        return entries

    def zero_grads(self):
        for stream in (self.left, self.right):
            for _, layer in stream.layers:
                layer.zero_grads()
        self.head.zero_grads()

    # -- forward / backward ---------------------------------------------
    def forward(self, xl: np.ndarray, xr: np.ndarray, mode: str = "train",
                rng: np.random.Generator | None = None) -> np.ndarray:
        if xl.shape != xr.shape:
            raise ShapeMismatch(f"stream batches differ: {xl.shape} vs {xr.shape}")
        if xl.shape[2:] != self.config.input_dims:
            raise ShapeMismatch(
                f"input dims {xl.shape[2:]} != configured {self.config.input_dims}"
            )
        fl = self.left.forward(xl, mode, rng)
        fr = self.right.forward(xr, mode, rng)
        fused = np.concatenate([fl, fr], axis=1)
        dropped = self.dropout.forward(fused, mode, rng)
        return self.head.forward(dropped, mode, rng)

    def backward(self, dlogits: np.ndarray) -> None:
        dfused = self.dropout.backward(self.head.backward(dlogits))
        w = self.config.fc1_width
        self.left.backward(dfused[:, :w])
        self.right.backward(dfused[:, w:])

    def loss_and_grad(self, xl, xr, ranks, mode="train", rng=None) -> float:
        """Forward + loss + full backward; gradients accumulate into
        the layers (call zero_grads first)."""
        logits = self.forward(xl, xr, mode, rng)
        if self.config.head == "ordinal":
            targets = encode_matrix(ranks, self.config.k_classes)
            loss, dlogits = sigmoid_ce_loss(logits, targets)
        else:
            loss, dlogits = softmax_ce_loss(logits, ranks)
        self.backward(dlogits)
        return loss

    # -- inference -------------------------------------------------------
    def predict_scores(self, xl, xr) -> np.ndarray:
        return self.forward(self.norm_left.apply(xl), self.norm_right.apply(xr), mode="eval")

    def predict_ranks(self, xl, xr) -> np.ndarray:
        scores = self.predict_scores(xl, xr)
        if self.config.head == "ordinal":
            return decode_matrix(scores, np.zeros(self.config.k_classes - 1))
        return 1 + np.argmax(scores, axis=1)


def stack_regions(regions) -> tuple[np.ndarray, np.ndarray]:
    """Stack region blocks into (N,1,nx,ny,nz) stream batches."""
    xl = np.stack([r.left[0].values for r in regions])[:, None]
    xr = np.stack([r.right[0].values for r in regions])[:, None]
    return xl, xr


def train(net: Network, regions, ranks, config: TrainConfig,
          augment=None) -> np.ndarray:
    """Mini-batch SGD with momentum; returns the per-iteration loss curve.

    Epochs reshuffle with a generator seeded from config; normalization
    statistics are measured here and stored on the network. ``augment``,
    when given, maps (xl_batch, xr_batch, rng) to a replacement pair
    before each step.
    """
    if (isinstance(regions, tuple) and len(regions) == 2
            and all(isinstance(part, np.ndarray) for part in regions)):
        xl, xr = regions
    else:
        xl, xr = stack_regions(regions)
    y = np.asarray(ranks, dtype=np.int64)
    if y.shape != (xl.shape[0],):
        raise ShapeMismatch(f"{xl.shape[0]} samples but label shape {y.shape}")
    net.norm_left = NormStats(float(xl.mean()), float(xl.std()) or 1.0)
    net.norm_right = NormStats(float(xr.mean()), float(xr.std()) or 1.0)
    xl = net.norm_left.apply(xl)
    xr = net.norm_right.apply(xr)
    n = xl.shape[0]
    rng = np.random.default_rng(np.random.SeedSequence(config.seed))
    params = net.parameters()
    velocity = [np.zeros_like(p) for p in params]
    curve = np.empty(config.max_iter)
    order = np.array([], dtype=np.int64)
    cursor = 0
    for iteration in range(config.max_iter):
        if cursor + config.batch_size > order.size:
            order = rng.permutation(n)
            cursor = 0
            while order.size < config.batch_size:
                order = np.concatenate([order, rng.permutation(n)])
        batch = order[cursor : cursor + config.batch_size]
        cursor += config.batch_size
        bl, br = xl[batch], xr[batch]
        if augment is not None:
            bl, br = augment(bl, br, rng)
        net.zero_grads()
        loss = net.loss_and_grad(bl, br, y[batch], mode="train", rng=rng)
        sgd_momentum_step(params, net.gradients(), velocity,
                          lr_at(iteration, config), config.momentum)
        curve[iteration] = loss
    return curve


def grad_check(net: Network, xl, xr, ranks, eps: float = 1e-5,
               samples_per_array: int = 3, seed: int = 0) -> float:
    """Max relative error between analytic and central-difference grads.

    Runs in "check" mode: train-time batch statistics, dropout off,
    running stats frozen, so the loss is a deterministic function of the
    parameters. Large arrays are subsampled with a seeded generator;
    relative-error denominators are floored at 1e-8.
    """
    xl = np.asarray(xl, dtype=np.float64)
    xr = np.asarray(xr, dtype=np.float64)
    net.zero_grads()
    net.loss_and_grad(xl, xr, ranks, mode="check")
    analytic = [g.copy() for g in net.gradients()]
    rng = np.random.default_rng(seed)
    worst = 0.0
    for (name, layer, key), grad in zip(net.param_entries(), analytic):
        w = layer.params[key]
        flat = w.reshape(-1)
        count = min(samples_per_array, flat.size)
        picks = rng.choice(flat.size, size=count, replace=False)
        for i in picks:
            original = flat[i]
            flat[i] = original + eps
            lp = _loss_only(net, xl, xr, ranks)
            flat[i] = original - eps
            lm = _loss_only(net, xl, xr, ranks)
            flat[i] = original
            numeric = (lp - lm) / (2 * eps)
            a = grad.reshape(-1)[i]
            rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, float(rel))
    return worst


def _loss_only(net: Network, xl, xr, ranks) -> float:
    logits = net.forward(xl, xr, mode="check")
    if net.config.head == "ordinal":
        targets = encode_matrix(ranks, net.config.k_classes)
        loss, _ = sigmoid_ce_loss(logits, targets)
    else:
        loss, _ = softmax_ce_loss(logits, ranks)
    return loss


def extract_features(net: Network, region: Region) -> FeatureVector:
    """Concatenated eval-mode stream vectors (left block first)."""
    xl = net.norm_left.apply(region.left[0].values[None, None])
    xr = net.norm_right.apply(region.right[0].values[None, None])
    fl = net.left.forward(xl, "eval", None)[0]
    fr = net.right.forward(xr, "eval", None)[0]
    width = net.config.fc1_width
    names = tuple(
        f"{side}.net.fc1.{i:04d}" for side in ("left", "right") for i in range(width)
    )
    return FeatureVector(names=names, values=np.concatenate([fl, fr]))
