"""Subprocess-level checks of the command-line surface: stage chaining,
stdout contracts, error families, and rerun determinism."""

import os
import subprocess
import sys

import pytest

FAST_OVERRIDES = """\
run.ng=8
synth.per_class=3
forest.n_trees=8
forest.min_leaf=1
net.conv1_kernels=4
net.resblock_kernels=4,4,4
net.fc1_width=8
train.max_iter=10
train.batch_size=4
"""

TINY_NET = """\
net.input_dims=8,8,8
net.conv1_kernels=2
net.resblock_kernels=2,2,2
net.fc1_width=4
net.pool_after=conv1,rb1
"""


def run_cli(*argv):
    return subprocess.run(
        [sys.executable, "-m", "stagerank", *argv],
        capture_output=True, text=True, timeout=300,
    )


def stdout_kv(proc):
    out = {}
    for line in proc.stdout.splitlines():
        key, sep, value = line.partition("=")
        if sep:
            out[key] = value
    return out


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """One synth -> train -> predict -> eval chain shared by the tests."""
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "overrides.txt"
    cfg.write_text(FAST_OVERRIDES)
    data = root / "data"
    synth = run_cli("synth", "--out", str(data), "--train-fraction", "0.7",
                    "--config", str(cfg), "--seed", "3")
    assert synth.returncode == 0, synth.stderr
    kv = stdout_kv(synth)
    model = root / "model.txt"
    train = run_cli("train", "--data", kv["train_manifest"], "--out", str(model),
                    "--learner", "rf-shape", "--strategy", "ordinal",
                    "--config", str(cfg), "--seed", "3")
    assert train.returncode == 0, train.stderr
    pred = root / "pred.tsv"
    predict = run_cli("predict", "--model", str(model), "--data",
                      kv["test_manifest"], "--out", str(pred))
    assert predict.returncode == 0, predict.stderr
    report = root / "report"
    ev = run_cli("eval", "--pred", str(pred), "--out", str(report))
    assert ev.returncode == 0, ev.stderr
    return {
        "root": root, "cfg": cfg, "synth": synth, "train": train,
        "predict": predict, "eval": ev, "model": model, "pred": pred,
        "report": report, "train_manifest": kv["train_manifest"],
        "test_manifest": kv["test_manifest"],
    }


class TestSynth:
    def test_split_outputs(self, workspace):
        kv = stdout_kv(workspace["synth"])
        assert int(kv["train_regions"]) + int(kv["test_regions"]) == 12
        assert int(kv["train_regions"]) > 0 and int(kv["test_regions"]) > 0
        assert os.path.exists(kv["train_manifest"])
        assert os.path.exists(kv["test_manifest"])

    def test_config_echo_written(self, workspace):
        text = (workspace["root"] / "data" / "config.txt").read_text()
        assert "run.preset=toy\n" in text
        assert "run.seed=3\n" in text
        assert "synth.per_class=3\n" in text

    def test_unsplit_dataset(self, tmp_path):
        out = tmp_path / "flat"
        proc = run_cli("synth", "--out", str(out), "--seed", "1",
                       "--config", "/dev/null")
        # default per_class applies; just check the contract lines
        assert proc.returncode == 0, proc.stderr
        kv = stdout_kv(proc)
        assert int(kv["regions"]) > 0
        assert os.path.exists(kv["manifest"])


class TestTrainPredictEval:
    def test_model_carries_metadata(self, workspace):
        text = workspace["model"].read_text()
        assert "meta.learner=rf-shape\n" in text
        assert "meta.strategy=ordinal\n" in text
        assert "meta.k_classes=4\n" in text

    def test_predictions_table_contract(self, workspace):
        lines = workspace["pred"].read_text().splitlines()
        headers = [l for l in lines if l.startswith("#")]
        assert "#k_classes=4" in headers
        assert "#learner=rf-shape" in headers
        assert "#strategy=ordinal" in headers
        assert "#score_kind=task-probability" in headers
        table = [l for l in lines if not l.startswith("#")]
        assert table[0].split("\t")[:3] == ["id", "true", "predicted"]
        assert table[0].split("\t")[3:] == ["score1", "score2", "score3"]
        assert len(table) - 1 == int(stdout_kv(workspace["predict"])["rows"])

    def test_eval_metrics_and_artifacts(self, workspace):
        kv = stdout_kv(workspace["eval"])
        for key in ("accuracy", "adjacency_fraction", "adjusted_accuracy",
                    "mean_absolute_rank_error", "n_rows", "n_scored"):
            assert key in kv, key
        assert 0.0 <= float(kv["accuracy"]) <= 1.0
        for name in ("report", "confusion", "confusion_png"):
            assert os.path.exists(kv[f"artifact.{name}"]), name
        assert kv[f"artifact.report"].endswith("report.txt")

    def test_no_figures_flag(self, workspace, tmp_path):
        out = tmp_path / "nofig"
        proc = run_cli("eval", "--pred", str(workspace["pred"]), "--out", str(out),
                       "--no-figures")
        assert proc.returncode == 0
        kv = stdout_kv(proc)
        assert "artifact.confusion_png" not in kv
        assert not (out / "confusion.png").exists()

    def test_predict_is_deterministic(self, workspace, tmp_path):
        out = tmp_path / "again.tsv"
        proc = run_cli("predict", "--model", str(workspace["model"]), "--data",
                       workspace["test_manifest"], "--out", str(out))
        assert proc.returncode == 0
        assert out.read_bytes() == workspace["pred"].read_bytes()

    def test_net_training_writes_loss_curve(self, workspace, tmp_path):
        model = tmp_path / "net.txt"
        proc = run_cli("train", "--data", workspace["train_manifest"],
                       "--out", str(model), "--learner", "net",
                       "--strategy", "multiclass",
                       "--config", str(workspace["cfg"]), "--seed", "1")
        assert proc.returncode == 0, proc.stderr
        kv = stdout_kv(proc)
        assert "loss_final" in kv
        curve = tmp_path / "net.txt.loss.txt"
        assert str(curve) == kv["loss_curve"]
        assert len(curve.read_text().splitlines()) == 10

    def test_binary_subset_enables_auc(self, workspace, tmp_path):
        model = tmp_path / "binary.txt"
        proc = run_cli("train", "--data", workspace["train_manifest"],
                       "--out", str(model), "--learner", "rf-shape",
                       "--strategy", "multiclass", "--classes", "1,4",
                       "--config", str(workspace["cfg"]), "--seed", "3")
        assert proc.returncode == 0, proc.stderr
        pred = tmp_path / "binary.tsv"
        proc = run_cli("predict", "--model", str(model), "--data",
                       workspace["test_manifest"], "--out", str(pred))
        assert proc.returncode == 0, proc.stderr
        text = pred.read_text()
        assert "#classes=1,4" in text
        assert "#k_classes=2" in text
        # classes 2 and 3 fall outside the subset: truth shows as "?"
        unknown = [l for l in text.splitlines()
                   if not l.startswith("#") and l.split("\t")[1] == "?"]
        assert unknown
        out = tmp_path / "binary-report"
        proc = run_cli("eval", "--pred", str(pred), "--out", str(out))
        assert proc.returncode == 0, proc.stderr
        kv = stdout_kv(proc)
        assert int(kv["n_scored"]) < int(kv["n_rows"])
        assert "auc" in kv
        assert 0.0 <= float(kv["auc"]) <= 1.0
        assert os.path.exists(kv["artifact.roc"])


class TestExtract:
    def test_shape_table(self, workspace, tmp_path):
        out = tmp_path / "shape.tsv"
        proc = run_cli("extract", "--data", workspace["test_manifest"],
                       "--out", str(out), "--feature", "shape")
        assert proc.returncode == 0, proc.stderr
        kv = stdout_kv(proc)
        assert kv["columns"] == "22"
        lines = out.read_text().splitlines()
        assert lines[0] == "#feature=shape"
        header = [l for l in lines if not l.startswith("#")][0]
        assert header.split("\t")[:2] == ["id", "label"]
        assert len(header.split("\t")) == 24

    def test_deep_needs_model_flag(self, workspace):
        proc = run_cli("extract", "--data", workspace["test_manifest"],
                       "--out", "/tmp/x.tsv", "--feature", "deep")
        assert proc.returncode == 1
        assert proc.stderr.startswith("error: usage:")

    def test_deep_rejects_forest_model(self, workspace, tmp_path):
        proc = run_cli("extract", "--data", workspace["test_manifest"],
                       "--out", str(tmp_path / "x.tsv"), "--feature", "deep",
                       "--model", str(workspace["model"]))
        assert proc.returncode == 3
        assert proc.stderr.startswith("error: data:")


class TestGradcheck:
    def test_passes_on_tiny_network(self, tmp_path):
        cfg = tmp_path / "tiny.txt"
        cfg.write_text(TINY_NET)
        proc = run_cli("gradcheck", "--config", str(cfg), "--samples", "1")
        assert proc.returncode == 0, proc.stderr
        kv = stdout_kv(proc)
        assert float(kv["max_rel_err"]) < 1e-4
        assert kv["head"] == "ordinal"

    def test_impossible_tolerance_exits_numeric(self, tmp_path):
        cfg = tmp_path / "tiny.txt"
        cfg.write_text(TINY_NET)
        proc = run_cli("gradcheck", "--config", str(cfg), "--samples", "1",
                       "--tol", "1e-18")
        assert proc.returncode == 4
        assert proc.stderr.startswith("error: numeric:")


class TestErrorFamilies:
    def test_missing_required_flag_is_usage(self):
        proc = run_cli("train", "--learner", "rf-shape")
        assert proc.returncode == 1
        assert proc.stderr.startswith("error: usage:")

    def test_unknown_subcommand_is_usage(self):
        proc = run_cli("transmogrify")
        assert proc.returncode == 1
        assert proc.stderr.startswith("error: usage:")

    def test_bad_config_key_is_config(self, tmp_path):
        cfg = tmp_path / "bad.txt"
        cfg.write_text("forest.depth=3\n")
        proc = run_cli("synth", "--out", str(tmp_path / "d"), "--config", str(cfg))
        assert proc.returncode == 2
        assert proc.stderr.startswith("error: config:")

    def test_unknown_preset_is_config(self, tmp_path):
        proc = run_cli("synth", "--out", str(tmp_path / "d"), "--preset", "huge")
        assert proc.returncode == 2

    def test_missing_manifest_is_data(self, tmp_path):
        proc = run_cli("train", "--data", str(tmp_path / "absent" / "manifest.txt"),
                       "--out", str(tmp_path / "m.txt"), "--learner", "rf-shape")
        assert proc.returncode == 3
        assert proc.stderr.startswith("error: data:")

    def test_error_output_is_one_line(self, tmp_path):
        proc = run_cli("synth", "--out", str(tmp_path / "d"), "--preset", "huge")
        assert proc.stderr.count("\n") == 1
        assert proc.stdout == ""
