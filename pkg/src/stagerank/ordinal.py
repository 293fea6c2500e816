"""Ordinal ranking by "larger than" decomposition.

A K-category ordinal problem becomes K-1 binary questions: task k asks
"is the rank greater than k?". Any binary learner family can answer
them; a rank is recovered by counting affirmative answers:

    rank = 1 + #{k : score_k > threshold_k}

Inconsistent answer patterns (e.g. yes/no/yes) are resolved by that
count alone — they are never re-projected onto a monotone pattern.
Thresholds default to 0 for signed scores and 0.5 for probabilities.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol, Sequence, runtime_checkable

import numpy as np

from .errors import ConfigInvalid, DegenerateTask, LabelOutOfRange

__all__ = [
    "encode",
    "encode_matrix",
    "decode",
    "decode_matrix",
    "default_thresholds",
    "BinaryTaskDataset",
    "build_binary_task",
    "BinaryLearner",
    "OrdinalModel",
    "fit_ordinal",
    "predict_ordinal",
    "score_matrix",
]


def _check_rank(y: int, k_classes: int) -> int:
    y = int(y)
    if k_classes < 2:
        raise ConfigInvalid(f"need at least 2 categories, got {k_classes}")
    if not 1 <= y <= k_classes:
        raise LabelOutOfRange(f"rank {y} outside 1..{k_classes}")
    return y


def encode(y: int, k_classes: int) -> np.ndarray:
    """Binary code of rank y: bit k (1-based) is 1 iff y > k."""
    y = _check_rank(y, k_classes)
    return (y > np.arange(1, k_classes)).astype(np.int8)


def encode_matrix(ranks: Sequence[int], k_classes: int) -> np.ndarray:
    """Row i is encode(ranks[i]); shape (n, k_classes - 1)."""
    arr = np.asarray(ranks, dtype=np.int64)
    if arr.size:
        _check_rank(arr.min(), k_classes)
        _check_rank(arr.max(), k_classes)
    return (arr[:, None] > np.arange(1, k_classes)[None, :]).astype(np.int8)


def default_thresholds(k_classes: int, score_kind: str = "signed") -> np.ndarray:
    if score_kind == "signed":
        return np.zeros(k_classes - 1)
    if score_kind == "probability":
        return np.full(k_classes - 1, 0.5)
    raise ConfigInvalid(f"unknown score kind {score_kind!r}")


def decode(scores: Sequence[float], thresholds=None) -> int:
    """Rank from K-1 decision values: 1 + count of scores above threshold."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1 or s.size < 1:
        raise ConfigInvalid(f"scores must be a nonempty 1-D array, got shape {s.shape}")
    t = np.zeros_like(s) if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    if t.shape != s.shape:
        raise ConfigInvalid(f"threshold shape {t.shape} != score shape {s.shape}")
    return 1 + int(np.count_nonzero(s > t))


def decode_matrix(scores: np.ndarray, thresholds=None) -> np.ndarray:
    """Vectorized decode over rows of an (n, K-1) score matrix."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 2:
        raise ConfigInvalid(f"score matrix must be 2-D, got shape {s.shape}")
    t = np.zeros(s.shape[1]) if thresholds is None else np.asarray(thresholds, dtype=np.float64)
    return 1 + np.count_nonzero(s > t[None, :], axis=1)


@dataclass(frozen=True)
class BinaryTaskDataset:
    """Task k's relabeling of the source sample order.

    ``labels01[i]`` is 1 iff source rank i exceeds k; positives /
    negatives are the index sets of each side. Together they partition
    the source.
    """

    k: int
    labels01: np.ndarray
    positives: np.ndarray
    negatives: np.ndarray


def build_binary_task(ranks, k: int, k_classes: int | None = None) -> BinaryTaskDataset:
    """Relabel ranks for task k: y=1 iff rank > k.

    ``ranks`` may be a plain sequence or anything exposing ``.labels``.
    Raises DegenerateTask when either side would be empty — a constant
    learner would silently bias every decoded rank.
    """
    if hasattr(ranks, "labels"):
        if k_classes is None and hasattr(ranks, "classes"):
            k_classes = int(ranks.classes)
        ranks = ranks.labels
    arr = np.asarray(ranks, dtype=np.int64)
    if k_classes is None:
        k_classes = int(arr.max()) if arr.size else 2
    if not 1 <= k <= k_classes - 1:
        raise ConfigInvalid(f"task index {k} outside 1..{k_classes - 1}")
    labels01 = (arr > k).astype(np.int8)
    positives = np.flatnonzero(labels01 == 1)
    negatives = np.flatnonzero(labels01 == 0)
    if positives.size == 0 or negatives.size == 0:
        raise DegenerateTask(
            f"task {k}: {positives.size} positives / {negatives.size} negatives"
        )
    return BinaryTaskDataset(k=k, labels01=labels01, positives=positives, negatives=negatives)


@runtime_checkable
class BinaryLearner(Protocol):
    """Anything that can answer one "larger than" question.

    ``decision_threshold`` states the score convention: 0.0 for signed
    margins, 0.5 for probabilities.
    """

    decision_threshold: float

    def fit(self, features: np.ndarray, labels01: np.ndarray, weights=None) -> None: ...

    def decision_scores(self, features: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class OrdinalModel:
    """K-1 fitted binary scorers plus their decode thresholds."""

    learners: tuple
    thresholds: np.ndarray
    k_classes: int

    def __post_init__(self):
        t = np.asarray(self.thresholds, dtype=np.float64)
        if len(self.learners) != self.k_classes - 1 or t.size != self.k_classes - 1:
            raise ConfigInvalid(
                f"{len(self.learners)} learners / {t.size} thresholds for K={self.k_classes}"
            )
        t.setflags(write=False)
        object.__setattr__(self, "thresholds", t)
        object.__setattr__(self, "learners", tuple(self.learners))


def fit_ordinal(
    features: np.ndarray,
    ranks,
    k_classes: int,
    learner_factory: Callable[[int, int], BinaryLearner],
    seed: int = 0,
    weights=None,
) -> OrdinalModel:
    """Train one binary learner per "larger than" task.

    ``learner_factory(k, task_seed)`` builds a fresh learner for task k;
    per-task seeds are derived from ``seed`` so tasks are independent
    and the whole fit is reproducible. ``weights`` (per-sample, aligned
    with ranks) pass through to every task unchanged.
    """
    X = np.asarray(features, dtype=np.float64)
    tasks = [build_binary_task(ranks, k, k_classes) for k in range(1, k_classes)]
    task_seeds = np.random.SeedSequence(seed).generate_state(k_classes - 1)
    learners = []
    thresholds = []
    for task, task_seed in zip(tasks, task_seeds):
        learner = learner_factory(task.k, int(task_seed))
        learner.fit(X, task.labels01, weights)
        learners.append(learner)
        thresholds.append(float(getattr(learner, "decision_threshold", 0.0)))
    return OrdinalModel(learners=tuple(learners), thresholds=np.array(thresholds), k_classes=k_classes)


def score_matrix(model: OrdinalModel, features: np.ndarray) -> np.ndarray:
    """(n, K-1) matrix of per-task decision scores."""
    X = np.asarray(features, dtype=np.float64)
    return np.column_stack([lrn.decision_scores(X) for lrn in model.learners])


def predict_ordinal(model: OrdinalModel, features: np.ndarray) -> np.ndarray:
    """Decoded ranks for each row of ``features``."""
    return decode_matrix(score_matrix(model, features), model.thresholds)
