"""Evaluation reports: delimited text plus rendered figures.

A report directory holds ``report.txt`` (config echo + metrics as
key=value, full-precision decimal), comma-separated tables for the
normalized confusion matrix and ROC points, a two-column loss curve,
and PNG renderings of each table. The text outputs are byte-stable for
fixed inputs; figures are rendered without embedded writer metadata so
reruns produce identical files too.
"""

from __future__ import annotations

import os

import numpy as np

from .metrics import ConfusionMatrix, RocResult

__all__ = ["write_report", "read_report_metrics"]

_PNG_META = {"Software": None}  # drop the writer stamp: byte-stable output


def _fmt(value) -> str:
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return str(value)


def _write_lines(path, lines):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def write_report(
    out_dir,
    metrics: dict,
    config_echo: dict | None = None,
    cm: ConfusionMatrix | None = None,
    roc: RocResult | None = None,
    loss_curve: np.ndarray | None = None,
    figures: bool = True,
) -> dict[str, str]:
    """Write report files into ``out_dir``; returns {artifact: path}."""
    os.makedirs(out_dir, exist_ok=True)
    written: dict[str, str] = {}

    lines = []
    if config_echo:
        lines.append("[config]")
        lines.extend(f"{k}={config_echo[k]}" for k in sorted(config_echo))
    lines.append("[metrics]")
    lines.extend(f"{k}={_fmt(metrics[k])}" for k in sorted(metrics))
    path = os.path.join(out_dir, "report.txt")
    _write_lines(path, lines)
    written["report"] = path

    if cm is not None:
        k = cm.k_classes
        header = "true\\pred," + ",".join(str(j + 1) for j in range(k))
        rows = [header]
        for i in range(k):
            rows.append(
                str(i + 1) + "," + ",".join(repr(float(v)) for v in cm.normalized[i])
            )
        path = os.path.join(out_dir, "confusion.csv")
        _write_lines(path, rows)
        written["confusion"] = path

    if roc is not None:
        rows = ["fpr,tpr"]
        rows.extend(f"{repr(float(x))},{repr(float(y))}" for x, y in roc.points)
        path = os.path.join(out_dir, "roc.csv")
        _write_lines(path, rows)
        written["roc"] = path

    if loss_curve is not None:
        rows = [f"{i} {repr(float(v))}" for i, v in enumerate(loss_curve)]
        path = os.path.join(out_dir, "loss.txt")
        _write_lines(path, rows)
        written["loss"] = path

    if figures:
        written.update(_render_figures(out_dir, cm, roc, loss_curve))
    return written


def _render_figures(out_dir, cm, roc, loss_curve) -> dict[str, str]:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    written: dict[str, str] = {}
    if cm is not None:
        fig, ax = plt.subplots(figsize=(4.2, 3.8))
        k = cm.k_classes
        image = ax.imshow(cm.normalized, vmin=0.0, vmax=1.0, cmap="Blues")
        for i in range(k):
            for j in range(k):
                v = cm.normalized[i, j]
                ax.text(j, i, f"{v:.2f}", ha="center", va="center",
                        color="white" if v > 0.5 else "black", fontsize=9)
        ax.set_xticks(range(k), [str(j + 1) for j in range(k)])
        ax.set_yticks(range(k), [str(i + 1) for i in range(k)])
        ax.set_xlabel("predicted")
        ax.set_ylabel("true")
        fig.colorbar(image, ax=ax, fraction=0.046)
        fig.tight_layout()
        path = os.path.join(out_dir, "confusion.png")
        fig.savefig(path, dpi=120, metadata=_PNG_META)
        plt.close(fig)
        written["confusion_png"] = path

    if roc is not None:
        fig, ax = plt.subplots(figsize=(4.2, 3.8))
        ax.plot(roc.points[:, 0], roc.points[:, 1], marker=".", lw=1.2)
        ax.plot([0, 1], [0, 1], ls="--", lw=0.8, color="gray")
        ax.set_xlabel("false positive rate")
        ax.set_ylabel("true positive rate")
        ax.set_title(f"AUC = {roc.auc:.4f}")
        fig.tight_layout()
        path = os.path.join(out_dir, "roc.png")
        fig.savefig(path, dpi=120, metadata=_PNG_META)
        plt.close(fig)
        written["roc_png"] = path

    if loss_curve is not None and len(loss_curve):
        fig, ax = plt.subplots(figsize=(4.6, 3.2))
        ax.plot(np.arange(len(loss_curve)), loss_curve, lw=0.9)
        ax.set_xlabel("iteration")
        ax.set_ylabel("loss")
        fig.tight_layout()
        path = os.path.join(out_dir, "loss.png")
        fig.savefig(path, dpi=120, metadata=_PNG_META)
        plt.close(fig)
        written["loss_png"] = path
    return written


def read_report_metrics(path) -> dict[str, str]:
    """Parse the [metrics] section of a report.txt back to raw strings."""
    metrics: dict[str, str] = {}
    in_metrics = False
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if line == "[metrics]":
                in_metrics = True
                continue
            if line.startswith("["):
                in_metrics = False
                continue
            if in_metrics and "=" in line:
                key, _, value = line.partition("=")
                metrics[key] = value
    return metrics
