"""Command-line surface tying the pipeline together.

Subcommands mirror the experiment stages::

    synth → augment → extract → train → predict → eval

plus ``gradcheck`` for auditing the network's analytic gradients.

Every command prints machine-parsable ``key=value`` lines on stdout and,
on failure, exactly one ``error: <kind>: <message>`` line on stderr with
a distinct exit code per error family (1 usage, 2 config, 3 data,
4 numeric).  ``--reference`` pins the numeric libraries to one thread
for bit-reproducible runs; to be effective it must be seen before the
first array import, so everything heavy in this module is imported
lazily inside the command bodies.
"""

from __future__ import annotations

import argparse
import os
import sys

_REFERENCE_ENV = (
    "OPENBLAS_NUM_THREADS",
    "OMP_NUM_THREADS",
    "MKL_NUM_THREADS",
    "NUMEXPR_NUM_THREADS",
)

_LEARNER_CHOICES = ("rf-shape", "rf-radiomics", "net")
_STRATEGY_CHOICES = ("multiclass", "ordinal")
_FEATURE_CHOICES = ("shape", "radiomics", "all", "deep")


class _UsageError(Exception):
    """Bad command line; maps to exit code 1."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    common = _Parser(add_help=False)
    common.add_argument("--preset", default=None,
                        help="configuration preset: toy (default) or adni-paper")
    common.add_argument("--seed", type=int, default=None,
                        help="global seed (default 0; config-file run.seed also accepted)")
    common.add_argument("--config", default=None, metavar="PATH",
                        help="key=value overrides, section.field per line")
    common.add_argument("--reference", action="store_true",
                        help="single-threaded deterministic mode")

    parser = _Parser(prog="stagerank",
                     description="Staged severity ranking on paired 3D blocks.")
    sub = parser.add_subparsers(dest="command", metavar="command", required=True)

    p = sub.add_parser("synth", parents=[common],
                       help="generate a labeled synthetic dataset")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--train-fraction", type=float, default=None, metavar="F",
                   help="also split into train/ and test/ subdirectories")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("augment", parents=[common],
                       help="expand a dataset with translations and elastic copies")
    p.add_argument("--data", required=True, metavar="MANIFEST")
    p.add_argument("--out", required=True, metavar="DIR")
    p.set_defaults(func=cmd_augment)

    p = sub.add_parser("extract", parents=[common],
                       help="write a feature table for a dataset")
    p.add_argument("--data", required=True, metavar="MANIFEST")
    p.add_argument("--out", required=True, metavar="TSV")
    p.add_argument("--feature", required=True, choices=_FEATURE_CHOICES)
    p.add_argument("--model", default=None, metavar="PATH",
                   help="trained net (required for --feature deep)")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("train", parents=[common], help="fit one model")
    p.add_argument("--data", required=True, metavar="MANIFEST")
    p.add_argument("--out", required=True, metavar="MODEL")
    p.add_argument("--learner", required=True, choices=_LEARNER_CHOICES)
    p.add_argument("--strategy", default="ordinal", choices=_STRATEGY_CHOICES)
    p.add_argument("--classes", default=None, metavar="LIST",
                   help="restrict to a class subset, e.g. 1,4 (relabeled 1..m)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", parents=[common],
                       help="apply a trained model to a dataset")
    p.add_argument("--model", required=True, metavar="PATH")
    p.add_argument("--data", required=True, metavar="MANIFEST")
    p.add_argument("--out", required=True, metavar="TSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", parents=[common],
                       help="score a predictions file into a report directory")
    p.add_argument("--pred", required=True, metavar="TSV")
    p.add_argument("--out", required=True, metavar="DIR")
    p.add_argument("--no-figures", action="store_true",
                   help="skip the rendered PNG figures")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("gradcheck", parents=[common],
                       help="compare analytic and finite-difference gradients")
    p.add_argument("--eps", type=float, default=1e-5)
    p.add_argument("--tol", type=float, default=1e-4)
    p.add_argument("--batch", type=int, default=2)
    p.add_argument("--samples", type=int, default=2, metavar="N",
                   help="coordinates probed per parameter array")
    p.add_argument("--head", default=None, choices=_STRATEGY_CHOICES,
                   help="override the preset's output head")
    p.set_defaults(func=cmd_gradcheck)
    return parser


# -- shared helpers ---------------------------------------------------------

def _resolve_run(args):
    """Preset + config file + flags in ascending precedence."""
    from .config import build_run_config, read_kv_file
    from .errors import ConfigInvalid

    kv = dict(read_kv_file(args.config)) if args.config else {}
    file_preset = kv.pop("run.preset", None)
    file_seed = kv.pop("run.seed", None)
    preset = args.preset or file_preset or "toy"
    if args.seed is not None:
        seed = args.seed
    elif file_seed is not None:
        try:
            seed = int(file_seed)
        except ValueError as exc:
            raise ConfigInvalid(f"run.seed: {exc}") from exc
    else:
        seed = 0
    return build_run_config(preset, seed, kv)


def _dataset_from_regions(regions, provenance: str):
    from .errors import DataError
    from .synthgen import LabeledDataset

    labels = [r.label for r in regions]
    if not labels:
        raise DataError("the manifest lists no regions")
    if any(label is None for label in labels):
        raise DataError("every region needs a label for this command")
    return LabeledDataset(regions=tuple(regions), classes=max(labels),
                          provenance=provenance)


def _parse_class_list(text: str):
    from .errors import ConfigInvalid

    try:
        subset = tuple(int(v) for v in text.split(","))
    except ValueError as exc:
        raise ConfigInvalid(f"--classes: {exc}") from exc
    if len(subset) < 2 or len(set(subset)) != len(subset) or list(subset) != sorted(subset):
        raise ConfigInvalid(
            f"--classes must be >= 2 distinct ascending labels, got {text!r}")
    if subset[0] < 1:
        raise ConfigInvalid(f"--classes labels start at 1, got {text!r}")
    return subset


def _restrict_classes(dataset, subset):
    """Keep the subset's regions, relabeled to consecutive ranks 1..m."""
    from dataclasses import replace

    from .errors import DataError
    from .synthgen import LabeledDataset

    rank_of = {label: i + 1 for i, label in enumerate(subset)}
    kept = [replace(r, label=rank_of[r.label]) for r in dataset.regions
            if r.label in rank_of]
    counts = {label: 0 for label in subset}
    for r in dataset.regions:
        if r.label in counts:
            counts[r.label] += 1
    for label, n in counts.items():
        if n == 0:
            raise DataError(f"class {label} has no regions in the dataset")
    return LabeledDataset(
        regions=tuple(kept), classes=len(subset),
        provenance=f"{dataset.provenance} | classes={','.join(map(str, subset))}")


def _write_table(path, header_comments, columns, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in header_comments:
            fh.write(f"#{key}={value}\n")
        fh.write("\t".join(columns) + "\n")
        for row in rows:
            fh.write("\t".join(row) + "\n")


def _score_kind(learner: str, strategy: str) -> str:
    if strategy == "multiclass":
        return "class-probability"
    return "task-probability" if learner.startswith("rf-") else "task-score"


# -- commands ---------------------------------------------------------------

def cmd_synth(args) -> int:
    from .config import config_echo, format_kv
    from .ovol import save_regions
    from .synthgen import generate_dataset, split

    run = _resolve_run(args)
    dataset = generate_dataset(run.synth)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "config.txt"), "w", encoding="utf-8") as fh:
        fh.write(format_kv(config_echo(run)))
    if args.train_fraction is None:
        manifest = save_regions(list(dataset.regions), args.out)
        print(f"regions={len(dataset.regions)}")
        print(f"manifest={manifest}")
    else:
        train_ds, test_ds = split(dataset, args.train_fraction, seed=run.seed)
        train_manifest = save_regions(list(train_ds.regions),
                                      os.path.join(args.out, "train"))
        test_manifest = save_regions(list(test_ds.regions),
                                     os.path.join(args.out, "test"))
        print(f"train_regions={len(train_ds.regions)}")
        print(f"test_regions={len(test_ds.regions)}")
        print(f"train_manifest={train_manifest}")
        print(f"test_manifest={test_manifest}")
    return 0


def cmd_augment(args) -> int:
    from .ovol import load_regions, save_regions
    from .pipeline import augment_dataset

    run = _resolve_run(args)
    regions = load_regions(args.data)
    dataset = _dataset_from_regions(regions, provenance=f"manifest {args.data}")
    expanded = augment_dataset(dataset, run.augment, seed=run.seed)
    manifest = save_regions(list(expanded.regions), args.out)
    print(f"regions_in={len(regions)}")
    print(f"regions_out={len(expanded.regions)}")
    print(f"manifest={manifest}")
    return 0


def cmd_extract(args) -> int:
    from .errors import ModelFormatError
    from .model_io import load_model_with_config
    from .neural.network import Network
    from .ovol import load_regions
    from .pipeline import extract_matrix

    run = _resolve_run(args)
    net = None
    if args.feature == "deep":
        if args.model is None:
            raise _UsageError("--model is required with --feature deep")
        model, _ = load_model_with_config(args.model)
        if not isinstance(model, Network):
            raise ModelFormatError(
                f"deep features need a net model, got {type(model).__name__}")
        net = model
    regions = load_regions(args.data)
    matrix, names = extract_matrix(regions, args.feature, ng=run.ng, net=net)
    rows = []
    for region, row in zip(regions, matrix):
        label = "?" if region.label is None else str(region.label)
        rows.append([region.region_id, label] + [repr(float(v)) for v in row])
    _write_table(args.out, [("feature", args.feature), ("ng", run.ng)],
                 ["id", "label", *names], rows)
    print(f"rows={matrix.shape[0]}")
    print(f"columns={matrix.shape[1]}")
    print(f"table={args.out}")
    return 0


def cmd_train(args) -> int:
    from .model_io import save_model
    from .ovol import load_regions
    from .pipeline import train_model

    run = _resolve_run(args)
    regions = load_regions(args.data)
    dataset = _dataset_from_regions(regions, provenance=f"manifest {args.data}")
    subset = None
    if args.classes is not None:
        subset = _parse_class_list(args.classes)
        dataset = _restrict_classes(dataset, subset)
    fitted = train_model(dataset, args.learner, args.strategy, run)
    extra = {
        "meta.learner": fitted.learner,
        "meta.strategy": fitted.strategy,
        "meta.k_classes": fitted.k_classes,
        "meta.ng": fitted.ng,
        "meta.feature": fitted.feature_kind,
        "meta.classes": ",".join(str(c) for c in subset) if subset else "",
    }
    save_model(args.out, fitted.model, extra=extra)
    print(f"train_regions={len(dataset.regions)}")
    print(f"k_classes={fitted.k_classes}")
    if fitted.loss_curve is not None and fitted.loss_curve.size:
        loss_path = args.out + ".loss.txt"
        with open(loss_path, "w", encoding="utf-8", newline="\n") as fh:
            for i, value in enumerate(fitted.loss_curve):
                fh.write(f"{i}\t{float(value)!r}\n")
        print(f"loss_final={float(fitted.loss_curve[-1])!r}")
        print(f"loss_curve={loss_path}")
    print(f"model={args.out}")
    return 0


def cmd_predict(args) -> int:
    from .errors import ModelFormatError
    from .model_io import load_model_with_config
    from .ovol import load_regions
    from .pipeline import TrainedModel, predict_model

    _resolve_run(args)  # validates --config/--preset early even though unused
    model, kv = load_model_with_config(args.model)
    missing = [key for key in
               ("meta.learner", "meta.strategy", "meta.k_classes", "meta.ng")
               if key not in kv]
    if missing:
        raise ModelFormatError(
            f"model file lacks {missing}; only models written by "
            "the train command carry prediction metadata")
    fitted = TrainedModel(learner=kv["meta.learner"], strategy=kv["meta.strategy"],
                          k_classes=int(kv["meta.k_classes"]), model=model,
                          ng=int(kv["meta.ng"]))
    subset = tuple(int(v) for v in kv.get("meta.classes", "").split(",") if v)
    rank_of = {label: i + 1 for i, label in enumerate(subset)}
    regions = load_regions(args.data)
    if not regions:
        from .errors import DataError

        raise DataError("the manifest lists no regions")
    ranks, scores = predict_model(fitted, regions)
    header = [("k_classes", fitted.k_classes),
              ("learner", fitted.learner),
              ("strategy", fitted.strategy),
              ("score_kind", _score_kind(fitted.learner, fitted.strategy))]
    if subset:
        header.append(("classes", ",".join(str(c) for c in subset)))
    score_names = [f"score{j + 1}" for j in range(scores.shape[1])]
    rows = []
    for region, rank, score_row in zip(regions, ranks, scores):
        if region.label is None:
            true = "?"
        elif subset:
            true = str(rank_of.get(region.label, "?"))
        else:
            true = str(region.label)
        rows.append([region.region_id, true, str(int(rank))]
                    + [repr(float(v)) for v in score_row])
    _write_table(args.out, header, ["id", "true", "predicted", *score_names], rows)
    print(f"rows={len(rows)}")
    print(f"predictions={args.out}")
    return 0


def _read_predictions(path):
    from .errors import DataError

    meta: dict[str, str] = {}
    rows = []
    with open(path, "r", encoding="utf-8") as fh:
        header = None
        for raw in fh:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                key, sep, value = line[1:].partition("=")
                if sep:
                    meta[key] = value
                continue
            parts = line.split("\t")
            if header is None:
                header = parts
                continue
            if len(parts) != len(header):
                raise DataError(f"ragged row in {path}: {line!r}")
            rows.append(parts)
    if header is None or header[:3] != ["id", "true", "predicted"]:
        raise DataError(f"{path} is not a predictions table")
    if "k_classes" not in meta:
        raise DataError(f"{path} lacks the #k_classes header")
    return meta, rows


def cmd_eval(args) -> int:
    import numpy as np

    from .errors import DataError
    from .metrics import (adjacency_fraction, adjusted_accuracy, confusion,
                          mean_absolute_rank_error, roc_auc)
    from .report import write_report

    meta, rows = _read_predictions(args.pred)
    k_classes = int(meta["k_classes"])
    scored = [row for row in rows if row[1] != "?"]
    if not scored:
        raise DataError("no rows with a known true label to score")
    true = np.array([int(row[1]) for row in scored])
    predicted = np.array([int(row[2]) for row in scored])
    cm = confusion(true, predicted, k_classes)
    metrics: dict = {
        "n_scored": len(scored),
        "n_rows": len(rows),
        "accuracy": float(np.mean(true == predicted)),
        "mean_absolute_rank_error": mean_absolute_rank_error(true, predicted),
        "adjacency_fraction": adjacency_fraction(true, predicted),
    }
    if cm.empty_classes:
        metrics["empty_classes"] = ",".join(str(c) for c in cm.empty_classes)
    else:
        metrics["adjusted_accuracy"] = adjusted_accuracy(cm)
    roc = None
    n_score_cols = len(scored[0]) - 3
    if k_classes == 2 and n_score_cols >= 1 and len(set(true.tolist())) == 2:
        column = -1 if meta.get("score_kind") == "class-probability" else 3
        scores = np.array([float(row[column]) for row in scored])
        roc = roc_auc(scores, (true == 2).astype(np.int64))
        metrics["auc"] = roc.auc
    artifacts = write_report(args.out, metrics, config_echo=dict(sorted(meta.items())),
                             cm=cm, roc=roc, figures=not args.no_figures)
    for key in sorted(metrics):
        value = metrics[key]
        print(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    for name in sorted(artifacts):
        print(f"artifact.{name}={artifacts[name]}")
    return 0


def cmd_gradcheck(args) -> int:
    from dataclasses import replace

    import numpy as np

    from .errors import NumericError
    from .neural.network import Network, grad_check

    run = _resolve_run(args)
    net_config = run.net if args.head is None else replace(run.net, head=args.head)
    net = Network(net_config)
    rng = np.random.default_rng(run.seed)
    dims = net_config.input_dims
    xl = rng.standard_normal((args.batch, 1, *dims))
    xr = rng.standard_normal((args.batch, 1, *dims))
    ranks = 1 + np.arange(args.batch) % net_config.k_classes
    worst = grad_check(net, xl, xr, ranks, eps=args.eps,
                       samples_per_array=args.samples, seed=run.seed)
    print(f"head={net_config.head}")
    print(f"eps={args.eps!r}")
    print(f"max_rel_err={worst!r}")
    if not worst < args.tol:
        raise NumericError(
            f"gradient check failed: max_rel_err={worst!r} >= tol={args.tol!r}")
    print(f"tol={args.tol!r}")
    return 0


# -- entry point ------------------------------------------------------------

def _fail(code: int, kind: str, exc: BaseException) -> int:
    message = " ".join(str(exc).split()) or exc.__class__.__name__
    print(f"error: {kind}: {message}", file=sys.stderr)
    return code


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        return _fail(1, "usage", exc)
    if args.reference:
        for name in _REFERENCE_ENV:
            os.environ[name] = "1"
    from .errors import ConfigError, DataError, NumericError

    try:
        return int(args.func(args) or 0)
    except _UsageError as exc:
        return _fail(1, "usage", exc)
    except ConfigError as exc:
        return _fail(2, "config", exc)
    except DataError as exc:
        return _fail(3, "data", exc)
    except NumericError as exc:
        return _fail(4, "numeric", exc)
    except OSError as exc:
        return _fail(3, "data", exc)


if __name__ == "__main__":
    sys.exit(main())
