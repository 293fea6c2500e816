"""Evaluation metrics for staged predictions.

The confusion matrix is row-normalized over true classes; adjusted
accuracy is the mean per-class sensitivity (the diagonal of the
normalized matrix), which is insensitive to class imbalance. ROC/AUC
uses a descending threshold sweep whose tie handling makes the
trapezoidal area exactly equal to concordant-pair counting with ties
worth one half. Rank-error metrics (mean absolute rank error, adjacency
fraction of errors) quantify how far wrong predictions land on the
ordinal scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyClass, LabelOutOfRange, ShapeMismatch, SingleClass

__all__ = [
    "ConfusionMatrix",
    "confusion",
    "adjusted_accuracy",
    "RocResult",
    "roc_auc",
    "mean_absolute_rank_error",
    "adjacency_fraction",
]


@dataclass(frozen=True)
class ConfusionMatrix:
    """counts[i][j] = samples with true class i+1 predicted as j+1."""

    counts: np.ndarray
    normalized: np.ndarray
    empty_classes: tuple[int, ...]

    @property
    def k_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def n_samples(self) -> int:
        return int(self.counts.sum())


def _check_pair(true_labels, predicted_labels):
    t = np.asarray(true_labels, dtype=np.int64)
    p = np.asarray(predicted_labels, dtype=np.int64)
    if t.shape != p.shape or t.ndim != 1:
        raise ShapeMismatch(f"label shapes differ: {t.shape} vs {p.shape}")
    return t, p


def confusion(true_labels, predicted_labels, k_classes: int) -> ConfusionMatrix:
    """Count matrix plus its row-stochastic normalization.

    A true class with no samples yields an all-zero normalized row and
    is flagged in ``empty_classes`` (1-based)."""
    t, p = _check_pair(true_labels, predicted_labels)
    for arr, what in ((t, "true"), (p, "predicted")):
        if arr.size and not ((arr >= 1) & (arr <= k_classes)).all():
            raise LabelOutOfRange(f"{what} labels outside 1..{k_classes}")
    counts = np.zeros((k_classes, k_classes), dtype=np.int64)
    np.add.at(counts, (t - 1, p - 1), 1)
    row_sums = counts.sum(axis=1)
    normalized = np.zeros((k_classes, k_classes), dtype=np.float64)
    nonempty = row_sums > 0
    normalized[nonempty] = counts[nonempty] / row_sums[nonempty, None]
    empty = tuple(int(i + 1) for i in np.flatnonzero(~nonempty))
    return ConfusionMatrix(counts=counts, normalized=normalized, empty_classes=empty)


def adjusted_accuracy(cm: ConfusionMatrix) -> float:
    """Mean per-class sensitivity; undefined when a true class is empty."""
    if cm.empty_classes:
        raise EmptyClass(f"true classes with no samples: {cm.empty_classes}")
    return float(np.mean(np.diag(cm.normalized)))


@dataclass(frozen=True)
class RocResult:
    """(FPR, TPR) points from (0,0) to (1,1) and the area under them."""

    points: np.ndarray
    auc: float


def roc_auc(scores, binary_labels) -> RocResult:
    """Threshold-sweep ROC; trapezoidal AUC with pair-exact tie handling.

    Each distinct score is one threshold crossing, so tied scores move
    the curve diagonally and the trapezoid over that segment contributes
    exactly half per discordant-tied pair.
    """
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(binary_labels, dtype=np.int64)
    if s.shape != y.shape or s.ndim != 1:
        raise ShapeMismatch(f"score/label shapes differ: {s.shape} vs {y.shape}")
    if not np.isin(y, (0, 1)).all():
        raise LabelOutOfRange("labels must be 0/1")
    n_pos = int((y == 1).sum())
    n_neg = int((y == 0).sum())
    if n_pos == 0 or n_neg == 0:
        raise SingleClass(f"need both classes, got {n_pos} positives / {n_neg} negatives")
    order = np.argsort(-s, kind="stable")
    sorted_scores = s[order]
    sorted_pos = (y[order] == 1).astype(np.int64)
    boundary = np.flatnonzero(np.diff(sorted_scores)) + 1
    group_ends = np.append(boundary, s.size)
    tp = np.cumsum(sorted_pos)[group_ends - 1]
    fp = group_ends - tp
    tpr = np.concatenate([[0.0], tp / n_pos])
    fpr = np.concatenate([[0.0], fp / n_neg])
    auc = float(np.trapezoid(tpr, fpr))
    return RocResult(points=np.column_stack([fpr, tpr]), auc=auc)


def mean_absolute_rank_error(true_labels, predicted_labels) -> float:
    """Mean |true - predicted| over samples."""
    t, p = _check_pair(true_labels, predicted_labels)
    if t.size == 0:
        raise ShapeMismatch("need at least one sample")
    if (t < 1).any() or (p < 1).any():
        raise LabelOutOfRange("ranks must be >= 1")
    return float(np.mean(np.abs(t - p)))


def adjacency_fraction(true_labels, predicted_labels) -> float:
    """Among misclassified samples, the fraction off by exactly one
    rank; 1.0 by convention when nothing is misclassified."""
    t, p = _check_pair(true_labels, predicted_labels)
    if t.size == 0:
        raise ShapeMismatch("need at least one sample")
    wrong = np.abs(t - p)
    wrong = wrong[wrong > 0]
    if wrong.size == 0:
        return 1.0
    return float(np.mean(wrong == 1))
