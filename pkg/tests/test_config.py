"""Preset contents, key=value parsing, override precedence, echo round trip."""

import pytest

from stagerank.config import (
    AugmentConfig,
    PRESET_NAMES,
    build_run_config,
    config_echo,
    format_kv,
    parse_kv_text,
    read_kv_file,
)
from stagerank.errors import ConfigInvalid
from stagerank.volume import BoundingBox


class TestPresets:
    def test_preset_names(self):
        assert PRESET_NAMES == ("toy", "adni-paper")

    def test_toy_defaults(self):
        run = build_run_config("toy", seed=0)
        assert run.preset == "toy"
        assert run.ng == 16
        assert run.net.input_dims == (12, 10, 16)
        assert run.net.fc1_width == 32
        assert run.train.max_iter == 200
        assert run.synth.box.dims == (12, 10, 16)
        assert run.augment.translations == 26
        assert run.augment.magnitude == 2

    def test_published_scale_defaults(self):
        run = build_run_config("adni-paper", seed=0)
        assert run.ng == 32
        assert run.synth.box.dims == (29, 21, 55)
        assert run.forest.n_trees == 1000
        assert run.forest.min_leaf == 5
        assert run.net.conv1_kernels == 64
        assert run.net.resblock_kernels == (64, 128, 128)
        assert run.net.fc1_width == 256
        assert run.net.kernel_size == 3
        assert run.net.pool_size == 2
        assert run.net.dropout_rate == 0.5
        assert run.train.base_lr == 5e-5
        assert run.train.momentum == 0.9
        assert run.train.lr_step == 40000
        assert run.train.lr_gamma == 0.1
        assert run.train.max_iter == 120000
        assert run.train.batch_size == 32

    def test_seed_propagates_to_every_section(self):
        run = build_run_config("toy", seed=7)
        assert run.seed == 7
        assert run.synth.seed == 7
        assert run.forest.seed == 7
        assert run.net.seed == 7
        assert run.train.seed == 7

    def test_unknown_preset_rejected(self):
        with pytest.raises(ConfigInvalid, match="preset"):
            build_run_config("desktop")


class TestParsing:
    def test_comments_blanks_and_whitespace(self):
        text = """
        # a comment
        forest.n_trees = 12

        train.base_lr=0.01
        """
        kv = parse_kv_text(text)
        assert kv == {"forest.n_trees": "12", "train.base_lr": "0.01"}

    def test_missing_equals_reports_line(self):
        with pytest.raises(ConfigInvalid, match="line 2"):
            parse_kv_text("a=1\nnonsense\n")

    def test_last_duplicate_wins(self):
        assert parse_kv_text("a=1\na=2\n") == {"a": "2"}

    def test_read_kv_file(self, tmp_path):
        path = tmp_path / "c.txt"
        path.write_text("synth.classes=3\n# note\n")
        assert read_kv_file(path) == {"synth.classes": "3"}

    def test_format_kv_sorted_round_trip(self):
        kv = {"b.two": "2", "a.one": "1"}
        text = format_kv(kv)
        assert text == "a.one=1\nb.two=2\n"
        assert parse_kv_text(text) == kv


class TestOverrides:
    def test_typed_overrides_apply(self):
        run = build_run_config("toy", seed=0, kv={
            "forest.n_trees": "17",
            "forest.max_features": "3",
            "train.base_lr": "0.01",
            "net.head": "multiclass",
            "synth.box": "8,8,8",
            "augment.include_original": "false",
            "run.ng": "5",
        })
        assert run.forest.n_trees == 17
        assert run.forest.max_features == 3
        assert run.train.base_lr == 0.01
        assert run.net.head == "multiclass"
        assert run.synth.box == BoundingBox((8, 8, 8))
        assert run.augment.include_original is False
        assert run.ng == 5

    def test_max_features_keeps_sqrt_keyword(self):
        run = build_run_config("toy", kv={"forest.max_features": "sqrt"})
        assert run.forest.max_features == "sqrt"

    def test_tuple_override(self):
        run = build_run_config("toy", kv={"net.resblock_kernels": "4,6,6",
                                          "net.pool_after": "conv1,rb1"})
        assert run.net.resblock_kernels == (4, 6, 6)
        assert run.net.pool_after == ("conv1", "rb1")

    def test_unknown_section_rejected(self):
        with pytest.raises(ConfigInvalid, match="section"):
            build_run_config("toy", kv={"optimizer.lr": "1"})

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigInvalid, match="unknown config keys"):
            build_run_config("toy", kv={"forest.depth": "3"})
        with pytest.raises(ConfigInvalid, match="unknown config keys"):
            build_run_config("toy", kv={"run.preset": "toy"})

    def test_bad_value_types_rejected(self):
        with pytest.raises(ConfigInvalid, match="train.base_lr"):
            build_run_config("toy", kv={"train.base_lr": "abc"})
        with pytest.raises(ConfigInvalid, match="boolean"):
            build_run_config("toy", kv={"augment.include_original": "maybe"})

    def test_section_invariants_still_enforced(self):
        with pytest.raises(ConfigInvalid):
            build_run_config("toy", kv={"train.momentum": "1.5"})
        with pytest.raises(ConfigInvalid):
            build_run_config("toy", kv={"augment.translations": "27"})


class TestEcho:
    def test_echo_is_sorted_and_complete(self):
        run = build_run_config("toy", seed=3)
        echo = config_echo(run)
        keys = list(echo)
        assert keys == sorted(keys)
        assert echo["run.preset"] == "toy"
        assert echo["run.seed"] == "3"
        assert echo["run.ng"] == "16"
        assert echo["net.input_dims"] == "12,10,16"
        assert echo["synth.box"] == "12,10,16"
        assert echo["train.base_lr"] == repr(2e-3)

    @pytest.mark.parametrize("preset", PRESET_NAMES)
    @pytest.mark.parametrize("seed", [0, 11])
    def test_echo_rebuilds_identical_config(self, preset, seed):
        run = build_run_config(preset, seed=seed)
        kv = dict(config_echo(run))
        kv.pop("run.preset")
        kv.pop("run.seed")
        rebuilt = build_run_config(preset, seed=seed, kv=kv)
        assert rebuilt == run

    def test_echo_survives_overrides(self):
        run = build_run_config("toy", kv={"train.base_lr": "0.125",
                                          "net.head": "multiclass"})
        echo = config_echo(run)
        assert echo["train.base_lr"] == "0.125"
        assert echo["net.head"] == "multiclass"


class TestAugmentConfig:
    def test_defaults(self):
        cfg = AugmentConfig()
        assert cfg.magnitude == 2
        assert cfg.translations == 26
        assert cfg.elastic_copies == 0
        assert cfg.include_original is True

    def test_validation(self):
        with pytest.raises(ConfigInvalid):
            AugmentConfig(translations=-1)
        with pytest.raises(ConfigInvalid):
            AugmentConfig(translations=27)
        with pytest.raises(ConfigInvalid):
            AugmentConfig(elastic_copies=-1)
        with pytest.raises(ConfigInvalid):
            AugmentConfig(magnitude=0)
