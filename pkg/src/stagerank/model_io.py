"""Text-based model container: diffable, language-portable, checksummed.

Layout (all text, newline-terminated):

    ORDM1
    kind=<forest|net|ordinal-ensemble>
    [config]
    <key>=<value> lines, sorted
    [array <name>]
    dtype=<int32|int64|float64>
    shape=<d0,d1,...>
    one repr() per line, C order
    ... more arrays, sorted by name ...
    [end]
    sha256=<hex digest of every preceding byte>

Floats use repr(), which round-trips exactly; the checksum guards the
whole body. Loaders rebuild models purely from the config echo plus the
named arrays, so a save/load round trip reproduces predictions bitwise.
"""

from __future__ import annotations

import hashlib
from dataclasses import fields

import numpy as np

from .errors import ModelFormatError
from .forest import DecisionTree, Forest, ForestBinaryLearner, ForestConfig
from .neural.layers import BatchNorm3D
from .neural.network import NetConfig, Network, NormStats
from .ordinal import OrdinalModel

__all__ = [
    "save_container",
    "load_container",
    "save_forest",
    "load_forest",
    "save_network",
    "load_network",
    "save_ordinal_forest",
    "load_ordinal_forest",
    "save_model",
    "load_model",
]

_MAGIC = "ORDM1"
_DTYPES = {"int32": np.int32, "int64": np.int64, "float64": np.float64}


def _format_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (tuple, list)):
        return ",".join(_format_value(v) for v in value)
    return str(value)


def save_container(path, kind: str, config: dict, arrays: dict[str, np.ndarray]) -> None:
    lines = [_MAGIC, f"kind={kind}", "[config]"]
    for key in sorted(config):
        lines.append(f"{key}={_format_value(config[key])}")
    for name in sorted(arrays):
        arr = np.asarray(arrays[name])
        if arr.dtype.name not in _DTYPES:
            raise ModelFormatError(f"unsupported dtype {arr.dtype} for array {name!r}")
        lines.append(f"[array {name}]")
        lines.append(f"dtype={arr.dtype.name}")
        lines.append("shape=" + ",".join(str(d) for d in arr.shape))
        if arr.dtype.kind == "f":
            lines.extend(repr(float(v)) for v in arr.reshape(-1))
        else:
            lines.extend(str(int(v)) for v in arr.reshape(-1))
    lines.append("[end]")
    body = "\n".join(lines) + "\n"
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(body)
        fh.write(f"sha256={digest}\n")


def load_container(path) -> tuple[str, dict[str, str], dict[str, np.ndarray]]:
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    marker = "\nsha256="
    pos = text.rfind(marker)
    if pos < 0:
        raise ModelFormatError("missing checksum line")
    body = text[: pos + 1]
    stated = text[pos + len(marker) :].strip()
    actual = hashlib.sha256(body.encode("utf-8")).hexdigest()
    if stated != actual:
        raise ModelFormatError(f"checksum mismatch: stated {stated[:12]}…, actual {actual[:12]}…")
    lines = body.splitlines()
    if not lines or lines[0] != _MAGIC:
        raise ModelFormatError(f"bad magic: {lines[0] if lines else '<empty>'!r}")
    if not lines[1].startswith("kind="):
        raise ModelFormatError("missing kind")
    kind = lines[1][5:]
    if lines[2] != "[config]":
        raise ModelFormatError("missing [config] section")
    config: dict[str, str] = {}
    i = 3
    while i < len(lines) and not lines[i].startswith("["):
        key, sep, value = lines[i].partition("=")
        if not sep:
            raise ModelFormatError(f"bad config line {i + 1}: {lines[i]!r}")
        config[key] = value
        i += 1
    arrays: dict[str, np.ndarray] = {}
    while i < len(lines) and lines[i] != "[end]":
        header = lines[i]
        if not (header.startswith("[array ") and header.endswith("]")):
            raise ModelFormatError(f"expected array header at line {i + 1}: {header!r}")
        name = header[len("[array ") : -1]
        dtype_line, shape_line = lines[i + 1], lines[i + 2]
        if not dtype_line.startswith("dtype=") or not shape_line.startswith("shape="):
            raise ModelFormatError(f"array {name!r}: malformed header")
        dtype = _DTYPES.get(dtype_line[6:])
        if dtype is None:
            raise ModelFormatError(f"array {name!r}: unknown dtype {dtype_line[6:]!r}")
        shape = tuple(int(d) for d in shape_line[6:].split(",") if d != "")
        size = int(np.prod(shape, dtype=np.int64)) if shape else 1
        i += 3
        raw = lines[i : i + size]
        if len(raw) != size:
            raise ModelFormatError(f"array {name!r}: expected {size} values, got {len(raw)}")
        if np.dtype(dtype).kind == "f":
            flat = np.array([float(v) for v in raw], dtype=dtype)
        else:
            flat = np.array([int(v) for v in raw], dtype=dtype)
        arrays[name] = flat.reshape(shape)
        i += size
    if i >= len(lines):
        raise ModelFormatError("missing [end] marker")
    return kind, config, arrays


# -- forest ----------------------------------------------------------------

def _forest_config_echo(config: ForestConfig) -> dict:
    return {f"forest.{f.name}": getattr(config, f.name) for f in fields(config)}


def _forest_config_parse(kv: dict[str, str]) -> ForestConfig:
    mf = kv["forest.max_features"]
    return ForestConfig(
        n_trees=int(kv["forest.n_trees"]),
        min_leaf=int(kv["forest.min_leaf"]),
        max_features=mf if mf == "sqrt" else int(mf),
        seed=int(kv["forest.seed"]),
    )


def _forest_arrays(forest: Forest, prefix: str = "") -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {f"{prefix}classes": forest.classes.astype(np.int64)}
    for t, tree in enumerate(forest.trees):
        base = f"{prefix}tree{t:04d}."
        arrays[base + "feature"] = tree.feature
        arrays[base + "threshold"] = tree.threshold
        arrays[base + "left"] = tree.left
        arrays[base + "right"] = tree.right
        arrays[base + "counts"] = tree.counts
    return arrays


def _forest_from_arrays(config: ForestConfig, n_features: int,
                        arrays: dict, prefix: str = "") -> Forest:
    classes = arrays[f"{prefix}classes"]
    trees = []
    for t in range(config.n_trees):
        base = f"{prefix}tree{t:04d}."
        trees.append(DecisionTree(
            feature=arrays[base + "feature"],
            threshold=arrays[base + "threshold"],
            left=arrays[base + "left"],
            right=arrays[base + "right"],
            counts=arrays[base + "counts"],
        ))
    return Forest(trees=tuple(trees), classes=classes, config=config,
                  n_features=n_features)


def save_forest(path, forest: Forest, extra: dict | None = None) -> None:
    config = _forest_config_echo(forest.config)
    config["forest.n_features"] = forest.n_features
    config.update(extra or {})
    save_container(path, "forest", config, _forest_arrays(forest))


def _forest_from_parts(kv: dict[str, str], arrays: dict[str, np.ndarray]) -> Forest:
    config = _forest_config_parse(kv)
    return _forest_from_arrays(config, int(kv["forest.n_features"]), arrays)


def load_forest(path) -> Forest:
    kind, kv, arrays = load_container(path)
    if kind != "forest":
        raise ModelFormatError(f"expected kind=forest, got {kind!r}")
    return _forest_from_parts(kv, arrays)


# -- ordinal ensemble of forests -------------------------------------------

def save_ordinal_forest(path, model: OrdinalModel, extra: dict | None = None) -> None:
    """Persist an OrdinalModel whose learners are forest-backed."""
    for learner in model.learners:
        if not isinstance(learner, ForestBinaryLearner):
            raise ModelFormatError(
                f"only forest learners persist in an ensemble, got {type(learner).__name__}"
            )
    first = model.learners[0].forest
    config: dict = {"ordinal.k_classes": model.k_classes,
                    "ordinal.n_features": first.n_features}
    config.update(extra or {})
    arrays: dict[str, np.ndarray] = {
        "thresholds": np.asarray(model.thresholds, dtype=np.float64)
    }
    for k, learner in enumerate(model.learners, start=1):
        forest = learner.forest
        for key, value in _forest_config_echo(forest.config).items():
            config[f"task{k}.{key}"] = value
        arrays.update(_forest_arrays(forest, prefix=f"task{k}."))
    save_container(path, "ordinal-ensemble", config, arrays)


def load_ordinal_forest(path) -> OrdinalModel:
    kind, kv, arrays = load_container(path)
    if kind != "ordinal-ensemble":
        raise ModelFormatError(f"expected kind=ordinal-ensemble, got {kind!r}")
    return _ordinal_forest_from_parts(kv, arrays)


def _ordinal_forest_from_parts(kv: dict[str, str],
                               arrays: dict[str, np.ndarray]) -> OrdinalModel:
    k_classes = int(kv["ordinal.k_classes"])
    n_features = int(kv["ordinal.n_features"])
    learners = []
    for k in range(1, k_classes):
        task_kv = {key[len(f"task{k}.") :]: value for key, value in kv.items()
                   if key.startswith(f"task{k}.")}
        config = _forest_config_parse(task_kv)
        learner = ForestBinaryLearner(config)
        learner.forest = _forest_from_arrays(config, n_features, arrays,
                                             prefix=f"task{k}.")
        learners.append(learner)
    return OrdinalModel(learners=tuple(learners),
                        thresholds=arrays["thresholds"],
                        k_classes=k_classes)


# -- network ---------------------------------------------------------------

def _net_config_echo(config: NetConfig) -> dict:
    return {f"net.{f.name}": getattr(config, f.name) for f in fields(config)}


def _net_config_parse(kv: dict[str, str]) -> NetConfig:
    def ints(key):
        return tuple(int(v) for v in kv[key].split(","))

    return NetConfig(
        input_dims=ints("net.input_dims"),
        conv1_kernels=int(kv["net.conv1_kernels"]),
        resblock_kernels=ints("net.resblock_kernels"),
        kernel_size=int(kv["net.kernel_size"]),
        pool_size=int(kv["net.pool_size"]),
        pool_stride=int(kv["net.pool_stride"]),
        fc1_width=int(kv["net.fc1_width"]),
        head=kv["net.head"],
        k_classes=int(kv["net.k_classes"]),
        dropout_rate=float(kv["net.dropout_rate"]),
        pool_after=tuple(v for v in kv["net.pool_after"].split(",") if v),
        seed=int(kv["net.seed"]),
    )


def save_network(path, net: Network, extra: dict | None = None) -> None:
    config = _net_config_echo(net.config)
    config["norm.left.mean"] = net.norm_left.mean
    config["norm.left.std"] = net.norm_left.std
    config["norm.right.mean"] = net.norm_right.mean
    config["norm.right.std"] = net.norm_right.std
    config.update(extra or {})
    arrays: dict[str, np.ndarray] = {}
    for name, layer, key in net.param_entries():
        arrays[name] = layer.params[key]
    for name, bn in net.batchnorm_entries():
        arrays[name + ".running_mean"] = bn.running_mean
        arrays[name + ".running_var"] = bn.running_var
    save_container(path, "net", config, arrays)


def load_network(path) -> Network:
    kind, kv, arrays = load_container(path)
    if kind != "net":
        raise ModelFormatError(f"expected kind=net, got {kind!r}")
    return _network_from_parts(kv, arrays)


def _network_from_parts(kv: dict[str, str], arrays: dict[str, np.ndarray]) -> Network:
    net = Network(_net_config_parse(kv))
    net.norm_left = NormStats(float(kv["norm.left.mean"]), float(kv["norm.left.std"]))
    net.norm_right = NormStats(float(kv["norm.right.mean"]), float(kv["norm.right.std"]))
    for name, layer, key in net.param_entries():
        stored = arrays[name]
        if stored.shape != layer.params[key].shape:
            raise ModelFormatError(
                f"array {name!r}: shape {stored.shape} != expected {layer.params[key].shape}"
            )
        layer.params[key][...] = stored
    for name, bn in net.batchnorm_entries():
        bn.running_mean = arrays[name + ".running_mean"].copy()
        bn.running_var = arrays[name + ".running_var"].copy()
    return net


# -- kind dispatch ---------------------------------------------------------

def save_model(path, model, extra: dict | None = None) -> None:
    if isinstance(model, Forest):
        save_forest(path, model, extra)
    elif isinstance(model, Network):
        save_network(path, model, extra)
    elif isinstance(model, OrdinalModel):
        save_ordinal_forest(path, model, extra)
    else:
        raise ModelFormatError(f"cannot persist {type(model).__name__}")


def load_model(path):
    model, _ = load_model_with_config(path)
    return model


def load_model_with_config(path):
    """Load any persisted model plus its full config echo in one parse.

    Returns ``(model, kv)`` where ``kv`` maps every ``[config]`` key to
    its string value, including any extra metadata stored at save time.
    """
    kind, kv, arrays = load_container(path)
    if kind == "forest":
        return _forest_from_parts(kv, arrays), kv
    if kind == "net":
        return _network_from_parts(kv, arrays), kv
    if kind == "ordinal-ensemble":
        return _ordinal_forest_from_parts(kv, arrays), kv
    raise ModelFormatError(f"unknown model kind {kind!r}")
