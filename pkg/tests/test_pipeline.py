"""Augmentation expansion, feature matrices, and the six model variants."""

import numpy as np
import pytest

from stagerank.config import AugmentConfig, build_run_config
from stagerank.errors import ConfigInvalid
from stagerank.neural.network import NetConfig, Network
from stagerank.pipeline import (
    LEARNERS,
    STRATEGIES,
    augment_dataset,
    extract_matrix,
    predict_model,
    train_model,
)
from stagerank.synthgen import SynthConfig, generate_dataset


@pytest.fixture(scope="module")
def dataset():
    return generate_dataset(SynthConfig(classes=4, per_class=2, seed=31))


@pytest.fixture(scope="module")
def fast_run():
    return build_run_config("toy", seed=1, kv={
        "forest.n_trees": "10",
        "forest.min_leaf": "1",
        "net.conv1_kernels": "4",
        "net.resblock_kernels": "4,4,4",
        "net.fc1_width": "8",
        "train.max_iter": "12",
        "train.batch_size": "4",
    })


class TestAugment:
    def test_expansion_count(self, dataset):
        out = augment_dataset(dataset, AugmentConfig(), seed=0)
        # original + 26 translations per region
        assert len(out) == len(dataset) * 27

    def test_translation_cap(self, dataset):
        out = augment_dataset(dataset, AugmentConfig(translations=5), seed=0)
        assert len(out) == len(dataset) * 6

    def test_without_originals(self, dataset):
        out = augment_dataset(
            dataset, AugmentConfig(translations=3, include_original=False), seed=0
        )
        assert len(out) == len(dataset) * 3

    def test_elastic_copies_counted_and_distinct(self, dataset):
        out = augment_dataset(
            dataset,
            AugmentConfig(translations=0, elastic_copies=2, include_original=False),
            seed=0,
        )
        assert len(out) == len(dataset) * 2
        a, b = out.regions[0], out.regions[1]
        assert a.region_id.endswith("_e00") and b.region_id.endswith("_e01")
        assert not np.array_equal(a.left[0].values, b.left[0].values)

    def test_ids_unique_and_labels_preserved(self, dataset):
        out = augment_dataset(dataset, AugmentConfig(translations=4, elastic_copies=1))
        ids = [r.region_id for r in out.regions]
        assert len(set(ids)) == len(ids)
        per_original = 6  # 1 + 4 + 1
        for i, region in enumerate(out.regions):
            assert region.label == dataset.regions[i // per_original].label

    def test_expansion_is_deterministic(self, dataset):
        cfg = AugmentConfig(translations=2, elastic_copies=1)
        a = augment_dataset(dataset, cfg, seed=5)
        b = augment_dataset(dataset, cfg, seed=5)
        for ra, rb in zip(a.regions, b.regions):
            np.testing.assert_array_equal(ra.left[0].values, rb.left[0].values)
        c = augment_dataset(dataset, cfg, seed=6)
        elastic_a = [r for r in a.regions if "_e" in r.region_id]
        elastic_c = [r for r in c.regions if "_e" in r.region_id]
        assert not np.array_equal(elastic_a[0].left[0].values, elastic_c[0].left[0].values)


class TestExtractMatrix:
    def test_kinds_and_widths(self, dataset):
        for kind, width in (("shape", 22), ("all", 22 + 594)):
            X, names = extract_matrix(dataset.regions, kind, ng=8)
            assert X.shape == (len(dataset), width)
            assert len(names) == width

    def test_radiomics_width(self, dataset):
        X, names = extract_matrix(dataset.regions[:2], "radiomics", ng=8)
        assert X.shape == (2, 594)
        assert np.isfinite(X).all()

    def test_deep_requires_network(self, dataset):
        with pytest.raises(ConfigInvalid, match="network"):
            extract_matrix(dataset.regions, "deep")

    def test_deep_width_follows_fc1(self, dataset):
        net = Network(NetConfig(conv1_kernels=2, resblock_kernels=(2, 2, 2),
                                fc1_width=4, seed=0))
        X, names = extract_matrix(dataset.regions[:3], "deep", net=net)
        assert X.shape == (3, 8)
        assert names[0].startswith("left.net.fc1")


class TestTrainPredict:
    @pytest.mark.parametrize("learner", ["rf-shape", "rf-radiomics"])
    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_forest_variants_fit_and_predict(self, dataset, fast_run, learner, strategy):
        tm = train_model(dataset, learner, strategy, fast_run)
        assert tm.learner == learner and tm.strategy == strategy
        assert tm.k_classes == 4
        assert tm.loss_curve is None
        ranks, scores = predict_model(tm, dataset.regions)
        assert ranks.shape == (len(dataset),)
        assert ((ranks >= 1) & (ranks <= 4)).all()
        expected_cols = 4 if strategy == "multiclass" else 3
        assert scores.shape == (len(dataset), expected_cols)

    @pytest.mark.parametrize("strategy", STRATEGIES)
    def test_net_variants_fit_and_predict(self, dataset, fast_run, strategy):
        tm = train_model(dataset, "net", strategy, fast_run)
        assert tm.loss_curve is not None and tm.loss_curve.shape == (12,)
        ranks, scores = predict_model(tm, dataset.regions)
        assert ((ranks >= 1) & (ranks <= 4)).all()
        if strategy == "multiclass":
            assert scores.shape == (len(dataset), 4)
            np.testing.assert_allclose(scores.sum(axis=1), 1.0, atol=1e-9)
        else:
            assert scores.shape == (len(dataset), 3)

    def test_unknown_learner_and_strategy_rejected(self, dataset, fast_run):
        with pytest.raises(ConfigInvalid, match="learner"):
            train_model(dataset, "svm", "ordinal", fast_run)
        with pytest.raises(ConfigInvalid, match="strategy"):
            train_model(dataset, "rf-shape", "regression", fast_run)

    def test_training_is_deterministic(self, dataset, fast_run):
        a = train_model(dataset, "rf-shape", "ordinal", fast_run)
        b = train_model(dataset, "rf-shape", "ordinal", fast_run)
        ranks_a, scores_a = predict_model(a, dataset.regions)
        ranks_b, scores_b = predict_model(b, dataset.regions)
        np.testing.assert_array_equal(ranks_a, ranks_b)
        np.testing.assert_array_equal(scores_a, scores_b)

    def test_learner_names_exported(self):
        assert LEARNERS == ("rf-shape", "rf-radiomics", "net")
        assert STRATEGIES == ("multiclass", "ordinal")
