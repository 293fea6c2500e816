"""Numerically stabilized losses with analytic batch-mean gradients."""

from __future__ import annotations

import numpy as np

from ..errors import LabelOutOfRange, ShapeMismatch

__all__ = ["sigmoid", "sigmoid_ce_loss", "softmax", "softmax_ce_loss"]


def sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid_ce_loss(logits: np.ndarray, targets: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean element-wise sigmoid cross entropy and its logit gradient.

    Uses the stable form max(z,0) - z*t + log(1 + exp(-|z|)); the
    gradient per logit is (sigmoid(z) - t) / element count.
    """
    z = np.asarray(logits, dtype=np.float64)
    t = np.asarray(targets, dtype=np.float64)
    if z.shape != t.shape:
        raise ShapeMismatch(f"logits {z.shape} vs targets {t.shape}")
    if not np.isin(t, (0.0, 1.0)).all():
        raise LabelOutOfRange("targets must be 0/1")
    per_element = np.maximum(z, 0.0) - z * t + np.log1p(np.exp(-np.abs(z)))
    count = z.size
    loss = float(per_element.sum() / count)
    grad = (sigmoid(z) - t) / count
    return loss, grad


def softmax(z: np.ndarray) -> np.ndarray:
    shifted = z - z.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


def softmax_ce_loss(logits: np.ndarray, target_classes) -> tuple[float, np.ndarray]:
    """Mean cross entropy for 1-based target classes over K columns.

    Log-sum-exp stabilized; gradient is (softmax - one_hot) / batch.
    """
    z = np.asarray(logits, dtype=np.float64)
    y = np.asarray(target_classes, dtype=np.int64)
    if z.ndim != 2 or y.shape != (z.shape[0],):
        raise ShapeMismatch(f"logits {z.shape} vs targets {y.shape}")
    k = z.shape[1]
    if y.size and not ((y >= 1) & (y <= k)).all():
        raise LabelOutOfRange(f"target classes outside 1..{k}")
    idx = y - 1
    shifted = z - z.max(axis=1, keepdims=True)
    log_norm = np.log(np.exp(shifted).sum(axis=1))
    n = z.shape[0]
    loss = float(np.mean(log_norm - shifted[np.arange(n), idx]))
    grad = softmax(z)
    grad[np.arange(n), idx] -= 1.0
    return loss, grad / n
