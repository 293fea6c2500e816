"""End-to-end glue: augmentation expansion, feature matrices, the six
model variants, and prediction.

Model naming follows the benchmark grid: learner in {rf-shape,
rf-radiomics, net} crossed with strategy in {multiclass, ordinal}. The
two rf learners share one code path over different feature matrices;
the net learner differs only in its head (K softmax outputs vs K-1
sigmoid "larger than" outputs decoded by count).
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import forest as forest_mod
from .config import AugmentConfig, RunConfig
from .errors import ConfigInvalid
from .features.vectors import extract_vector
from .forest import Forest, balanced_weights, forest_learner_factory
from .neural.network import Network, extract_features, stack_regions, train as train_net
from .ordinal import OrdinalModel, fit_ordinal, predict_ordinal, score_matrix
from .synthgen import LabeledDataset
from .volume import Region, elastic_deform, enumerate_translations

__all__ = [
    "LEARNERS",
    "STRATEGIES",
    "augment_dataset",
    "extract_matrix",
    "TrainedModel",
    "train_model",
    "predict_model",
]

LEARNERS = ("rf-shape", "rf-radiomics", "net")
STRATEGIES = ("multiclass", "ordinal")


def augment_dataset(dataset: LabeledDataset, config: AugmentConfig,
                    seed: int = 0) -> LabeledDataset:
    """Offline expansion: originals, grid translations, elastic copies.

    Elastic seeds derive from (seed, region index, copy index) so the
    expansion is reproducible and no two copies share a field.
    """
    out: list[Region] = []
    for index, region in enumerate(dataset.regions):
        if config.include_original:
            out.append(region)
        for t, shifted in enumerate(
            enumerate_translations(region, config.magnitude)[: config.translations]
        ):
            out.append(replace(shifted, region_id=f"{region.region_id}_t{t:02d}"))
        for copy in range(config.elastic_copies):
            copy_seed = int(
                np.random.SeedSequence(entropy=seed, spawn_key=(index, copy)).generate_state(1)[0]
            )
            warped = elastic_deform(region, config.amplitude, config.smoothness, copy_seed)
            out.append(replace(warped, region_id=f"{region.region_id}_e{copy:02d}"))
    return LabeledDataset(
        regions=tuple(out),
        classes=dataset.classes,
        provenance=f"{dataset.provenance} | augmented x{len(out) // max(len(dataset), 1)} seed={seed}",
    )


def extract_matrix(regions, kind: str, ng: int = 32,
                   net: Network | None = None) -> tuple[np.ndarray, tuple[str, ...]]:
    """Per-region feature rows: kind in {shape, radiomics, all, deep}."""
    if kind == "deep":
        if net is None:
            raise ConfigInvalid("deep extraction needs a trained network")
        vectors = [extract_features(net, r) for r in regions]
    else:
        vectors = [extract_vector(r, kind=kind, ng=ng) for r in regions]
    names = vectors[0].names
    return np.stack([v.values for v in vectors]), names


_LEARNER_FEATURE = {"rf-shape": "shape", "rf-radiomics": "radiomics"}


@dataclass
class TrainedModel:
    """A fitted model plus everything prediction needs to replay it."""

    learner: str
    strategy: str
    k_classes: int
    model: object
    ng: int = 32
    loss_curve: np.ndarray | None = None

    @property
    def feature_kind(self) -> str | None:
        return _LEARNER_FEATURE.get(self.learner)


def train_model(dataset: LabeledDataset, learner: str, strategy: str,
                run: RunConfig) -> TrainedModel:
    """Fit one of the six benchmark models on a labeled dataset."""
    if learner not in LEARNERS:
        raise ConfigInvalid(f"learner must be one of {LEARNERS}, got {learner!r}")
    if strategy not in STRATEGIES:
        raise ConfigInvalid(f"strategy must be one of {STRATEGIES}, got {strategy!r}")
    k = dataset.classes
    ranks = dataset.labels
    if learner == "net":
        config = replace(run.net, head=strategy, k_classes=k, seed=run.seed)
        net = Network(config)
        curve = train_net(net, dataset.regions, ranks, replace(run.train, seed=run.seed))
        return TrainedModel(learner, strategy, k, net, ng=run.ng, loss_curve=curve)
    X, _ = extract_matrix(dataset.regions, _LEARNER_FEATURE[learner], ng=run.ng)
    weights = balanced_weights(ranks)
    if strategy == "multiclass":
        model = forest_mod.fit(X, ranks, weights, replace(run.forest, seed=run.seed))
    else:
        model = fit_ordinal(X, ranks, k, forest_learner_factory(run.forest),
                            seed=run.seed, weights=weights)
    return TrainedModel(learner, strategy, k, model, ng=run.ng)


def predict_model(tm: TrainedModel, regions) -> tuple[np.ndarray, np.ndarray]:
    """(ranks, scores) for a region list.

    Scores are per-task probabilities (ordinal forest), per-task logits
    (ordinal net), or class probabilities (multiclass either way) — in
    every case a higher column value argues for the higher rank(s).
    """
    if tm.learner == "net":
        net: Network = tm.model
        xl, xr = stack_regions(regions)
        scores = net.predict_scores(xl, xr)
        ranks = net.predict_ranks(xl, xr)
        if tm.strategy == "multiclass":
            from .neural.losses import softmax

            scores = softmax(scores)
        return ranks, scores
    X, _ = extract_matrix(regions, tm.feature_kind, ng=tm.ng)
    if tm.strategy == "multiclass":
        model: Forest = tm.model
        proba = forest_mod.predict_proba(model, X)
        return forest_mod.predict(model, X).astype(np.int64), proba
    model: OrdinalModel = tm.model
    return predict_ordinal(model, X), score_matrix(model, X)
