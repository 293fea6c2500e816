"""Staged severity ranking on paired 3D blocks.

Ordinal decomposition of a K-rank staging problem into K-1 binary
"rank greater than k" tasks, solved either by a two-stream 3D
convolutional network or by random forests over shape and texture
features, with a synthetic phantom generator and an evaluation suite.

Submodules import lazily so that the command line can pin threading
environment variables before the first array library loads.  Import
them explicitly (``stagerank.ordinal``, ``stagerank.forest``, ...) or
through the attribute access below.
"""

from __future__ import annotations

import importlib

__version__ = "0.1.0"

_SUBMODULES = (
    "benchmark",
    "cli",
    "config",
    "errors",
    "features",
    "forest",
    "metrics",
    "model_io",
    "neural",
    "ordinal",
    "ovol",
    "pipeline",
    "report",
    "synthgen",
    "volume",
)

__all__ = ["__version__", *_SUBMODULES]


def __getattr__(name: str):
    if name in _SUBMODULES:
        return importlib.import_module(f".{name}", __name__)
    raise AttributeError(f"module {__name__!r} has no attribute {name!r}")


def __dir__():
    return sorted(__all__)
