"""Random forest of CART trees with weighted bootstrap sampling.

Each tree sees n draws with replacement, drawn with probability
proportional to per-sample weight; splits minimize Gini impurity over a
fresh random feature subset per node, with candidate thresholds at
midpoints between consecutive distinct sorted values. Leaves form when
a node is pure or smaller than 2*min_leaf, and a split must leave at
least min_leaf samples on each side. Everything is deterministic in the
config seed; prediction ties go to the lower class index.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigInvalid, ShapeMismatch, SingleClass

__all__ = [
    "ForestConfig",
    "DecisionTree",
    "Forest",
    "balanced_weights",
    "fit",
    "predict_proba",
    "predict",
    "ForestBinaryLearner",
    "forest_learner_factory",
]


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    min_leaf: int = 5
    max_features: int | str = "sqrt"
    seed: int = 0

    def __post_init__(self):
        if self.n_trees < 1:
            raise ConfigInvalid(f"n_trees must be >= 1, got {self.n_trees}")
        if self.min_leaf < 1:
            raise ConfigInvalid(f"min_leaf must be >= 1, got {self.min_leaf}")
        if not (self.max_features == "sqrt" or (
            isinstance(self.max_features, int) and self.max_features >= 1
        )):
            raise ConfigInvalid(f"max_features must be 'sqrt' or a positive int")

    def resolve_max_features(self, n_features: int) -> int:
        if self.max_features == "sqrt":
            return max(1, int(np.sqrt(n_features)))
        return min(int(self.max_features), n_features)


@dataclass(frozen=True)
class DecisionTree:
    """Flat node arrays: feature < 0 marks a leaf; counts holds the
    bootstrap class counts at every leaf row."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    counts: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.size


@dataclass(frozen=True)
class Forest:
    trees: tuple[DecisionTree, ...]
    classes: np.ndarray
    config: ForestConfig
    n_features: int


def balanced_weights(labels) -> np.ndarray:
    """Per-sample weight n / (count of that sample's class)."""
    arr = np.asarray(labels)
    _, inverse, counts = np.unique(arr, return_inverse=True, return_counts=True)
    return arr.size / counts[inverse].astype(np.float64)


def _gini_best_split(values, class_ids, n_classes, min_leaf):
    """Best (threshold, score) for one feature, or None.

    Score is the split's total weighted Gini impurity (lower is better),
    computed from cumulative class counts over the sorted values.
    """
    order = np.argsort(values, kind="stable")
    sv = values[order]
    sy = class_ids[order]
    m = sv.size
    onehot = np.zeros((m, n_classes), dtype=np.float64)
    onehot[np.arange(m), sy] = 1.0
    left_counts = np.cumsum(onehot, axis=0)[:-1]
    total = left_counts[-1] + onehot[-1]
    n_left = np.arange(1, m, dtype=np.float64)
    n_right = m - n_left
    ok = (sv[1:] != sv[:-1]) & (n_left >= min_leaf) & (n_right >= min_leaf)
    if not ok.any():
        return None
    right_counts = total[None, :] - left_counts
    # impurity * m == m - sum(cL^2)/nL - sum(cR^2)/nR
    score = m - (left_counts**2).sum(axis=1) / n_left - (right_counts**2).sum(axis=1) / n_right
    score[~ok] = np.inf
    pos = int(np.argmin(score))
    return 0.5 * (sv[pos] + sv[pos + 1]), float(score[pos])


def _grow(X, class_ids, idx, n_classes, min_leaf, mtry, rng, nodes):
    """Append the subtree over bootstrap rows ``idx``; return its node id."""
    node_id = len(nodes["feature"])
    for key in nodes:
        nodes[key].append(None)
    labels_here = class_ids[idx]
    counts = np.bincount(labels_here, minlength=n_classes).astype(np.float64)
    pure = np.count_nonzero(counts) <= 1
    best = None
    if not pure and idx.size >= 2 * min_leaf:
        features = rng.choice(X.shape[1], size=mtry, replace=False)
        for f in features:
            found = _gini_best_split(X[idx, f], labels_here, n_classes, min_leaf)
            if found is not None and (best is None or found[1] < best[2]):
                best = (int(f), found[0], found[1])
    if best is None:
        nodes["feature"][node_id] = -1
        nodes["threshold"][node_id] = 0.0
        nodes["left"][node_id] = -1
        nodes["right"][node_id] = -1
        nodes["counts"][node_id] = counts
        return node_id
    f, thr, _ = best
    goes_left = X[idx, f] <= thr
    left_id = _grow(X, class_ids, idx[goes_left], n_classes, min_leaf, mtry, rng, nodes)
    right_id = _grow(X, class_ids, idx[~goes_left], n_classes, min_leaf, mtry, rng, nodes)
    nodes["feature"][node_id] = f
    nodes["threshold"][node_id] = thr
    nodes["left"][node_id] = left_id
    nodes["right"][node_id] = right_id
    nodes["counts"][node_id] = np.zeros(n_classes)
    return node_id


def _fit_tree(X, class_ids, weights, n_classes, config, rng) -> DecisionTree:
    n = X.shape[0]
    p = weights / weights.sum()
    bootstrap = rng.choice(n, size=n, replace=True, p=p)
    nodes = {"feature": [], "threshold": [], "left": [], "right": [], "counts": []}
    mtry = config.resolve_max_features(X.shape[1])
    _grow(X, class_ids, bootstrap, n_classes, config.min_leaf, mtry, rng, nodes)
    return DecisionTree(
        feature=np.array(nodes["feature"], dtype=np.int32),
        threshold=np.array(nodes["threshold"], dtype=np.float64),
        left=np.array(nodes["left"], dtype=np.int32),
        right=np.array(nodes["right"], dtype=np.int32),
        counts=np.array(nodes["counts"], dtype=np.float64),
    )


def fit(features, labels, weights=None, config: ForestConfig | None = None) -> Forest:
    """Train ``config.n_trees`` trees on weighted bootstrap resamples."""
    config = config or ForestConfig()
    X = np.asarray(features, dtype=np.float64)
    y = np.asarray(labels)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ShapeMismatch(f"features {X.shape} do not align with labels {y.shape}")
    classes, class_ids = np.unique(y, return_inverse=True)
    if classes.size < 2:
        raise SingleClass(f"need >= 2 distinct labels, got {classes.size}")
    if weights is None:
        w = np.ones(X.shape[0], dtype=np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.shape != (X.shape[0],):
            raise ShapeMismatch(f"weights {w.shape} do not align with {X.shape[0]} samples")
        if not (w > 0).all():
            raise ConfigInvalid("weights must be strictly positive")
    seeds = np.random.SeedSequence(config.seed).spawn(config.n_trees)
    trees = tuple(
        _fit_tree(X, class_ids, w, classes.size, config, np.random.default_rng(s))
        for s in seeds
    )
    return Forest(trees=trees, classes=classes, config=config, n_features=X.shape[1])


def _tree_proba(tree: DecisionTree, X: np.ndarray) -> np.ndarray:
    node = np.zeros(X.shape[0], dtype=np.int64)
    while True:
        pending = np.flatnonzero(tree.feature[node] >= 0)
        if pending.size == 0:
            break
        f = tree.feature[node[pending]]
        thr = tree.threshold[node[pending]]
        goes_left = X[pending, f] <= thr
        node[pending[goes_left]] = tree.left[node[pending[goes_left]]]
        node[pending[~goes_left]] = tree.right[node[pending[~goes_left]]]
    counts = tree.counts[node]
    return counts / counts.sum(axis=1, keepdims=True)


def predict_proba(forest: Forest, features) -> np.ndarray:
    """Per-row class probabilities: mean of leaf frequencies over trees."""
    X = np.atleast_2d(np.asarray(features, dtype=np.float64))
    if X.shape[1] != forest.n_features:
        raise ShapeMismatch(
            f"row length {X.shape[1]} != training feature count {forest.n_features}"
        )
    acc = np.zeros((X.shape[0], forest.classes.size))
    for tree in forest.trees:
        acc += _tree_proba(tree, X)
    return acc / len(forest.trees)


def predict(forest: Forest, features) -> np.ndarray:
    """Most probable class per row; ties go to the lower class index."""
    proba = predict_proba(forest, features)
    return forest.classes[np.argmax(proba, axis=1)]


class ForestBinaryLearner:
    """Forest answering one "larger than" question with P(rank > k)."""

    decision_threshold = 0.5

    def __init__(self, config: ForestConfig):
        self.config = config
        self.forest: Forest | None = None

    def fit(self, features, labels01, weights=None) -> None:
        self.forest = fit(features, labels01, weights, self.config)

    def decision_scores(self, features) -> np.ndarray:
        proba = predict_proba(self.forest, features)
        positive_col = int(np.flatnonzero(self.forest.classes == 1)[0])
        return proba[:, positive_col]


def forest_learner_factory(config: ForestConfig):
    """fit_ordinal factory: task seeds replace the config seed."""

    def make(task_index: int, task_seed: int) -> ForestBinaryLearner:
        return ForestBinaryLearner(replace(config, seed=task_seed))

    return make
