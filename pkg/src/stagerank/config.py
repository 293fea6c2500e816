"""Flat key=value configuration with section prefixes and presets.

A config file is plain text: one ``section.field=value`` per line,
``#`` comments and blank lines ignored. Presets fully populate every
section; file values and command-line overrides then replace individual
fields. Two presets exist: "toy" (desk scale, the default everywhere)
and "adni-paper" (the published-scale geometry and schedule, kept for
shape audits and documentation).
"""

from __future__ import annotations

from dataclasses import dataclass, fields, replace

from .errors import ConfigInvalid
from .forest import ForestConfig
from .neural.network import NetConfig, net_preset
from .neural.optim import TrainConfig
from .synthgen import SynthConfig
from .volume import BoundingBox

__all__ = [
    "AugmentConfig",
    "RunConfig",
    "PRESET_NAMES",
    "parse_kv_text",
    "read_kv_file",
    "format_kv",
    "build_run_config",
    "config_echo",
]

PRESET_NAMES = ("toy", "adni-paper")


@dataclass(frozen=True)
class AugmentConfig:
    """Offline expansion policy: grid translations plus elastic copies."""

    magnitude: int = 2
    translations: int = 26
    elastic_copies: int = 0
    amplitude: float = 1.0
    smoothness: float = 2.0
    include_original: bool = True

    def __post_init__(self):
        if not 0 <= self.translations <= 26:
            raise ConfigInvalid(f"translations must be 0..26, got {self.translations}")
        if self.elastic_copies < 0:
            raise ConfigInvalid(f"elastic_copies must be >= 0, got {self.elastic_copies}")
        if self.magnitude < 1:
            raise ConfigInvalid(f"magnitude must be >= 1, got {self.magnitude}")


@dataclass(frozen=True)
class RunConfig:
    preset: str
    seed: int
    synth: SynthConfig
    augment: AugmentConfig
    forest: ForestConfig
    net: NetConfig
    train: TrainConfig
    ng: int = 32


def _toy_defaults(seed: int) -> RunConfig:
    net, train = net_preset("toy", seed=seed)
    return RunConfig(
        preset="toy",
        seed=seed,
        synth=SynthConfig(seed=seed),
        augment=AugmentConfig(),
        forest=ForestConfig(seed=seed),
        net=net,
        train=train,
        ng=16,
    )


def _adni_defaults(seed: int) -> RunConfig:
    net, train = net_preset("adni-paper", seed=seed)
    return RunConfig(
        preset="adni-paper",
        seed=seed,
        synth=SynthConfig(
            box=BoundingBox((29, 21, 55)),
            base_radius=9.0,
            atrophy_step=0.9,
            texture_noise_step=0.06,
            subject_jitter=0.35,
            seed=seed,
        ),
        augment=AugmentConfig(elastic_copies=3),
        forest=ForestConfig(n_trees=1000, min_leaf=5, seed=seed),
        net=net,
        train=train,
        ng=32,
    )


def parse_kv_text(text: str) -> dict[str, str]:
    kv: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigInvalid(f"line {lineno}: expected key=value, got {raw!r}")
        kv[key.strip()] = value.strip()
    return kv


def read_kv_file(path) -> dict[str, str]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_kv_text(fh.read())


def _coerce(field_name: str, current, text: str):
    if field_name == "max_features":
        return int(text) if text.lstrip("-").isdigit() else text
    if field_name == "box":
        return BoundingBox(tuple(int(v) for v in text.split(",")))
    if isinstance(current, bool):
        if text.lower() in ("1", "true", "yes"):
            return True
        if text.lower() in ("0", "false", "no"):
            return False
        raise ConfigInvalid(f"{field_name}: expected a boolean, got {text!r}")
    if isinstance(current, int):
        return int(text)
    if isinstance(current, float):
        return float(text)
    if isinstance(current, tuple):
        parts = [v for v in text.split(",") if v != ""]
        if current and isinstance(current[0], int):
            return tuple(int(v) for v in parts)
        return tuple(parts)
    return text


def _apply_section(instance, prefix: str, kv: dict[str, str]):
    updates = {}
    for f in fields(instance):
        key = f"{prefix}.{f.name}"
        if key in kv:
            try:
                updates[f.name] = _coerce(f.name, getattr(instance, f.name), kv[key])
            except ConfigInvalid:
                raise
            except (ValueError, TypeError) as exc:
                raise ConfigInvalid(f"{key}: {exc}") from exc
    return replace(instance, **updates) if updates else instance


_SECTIONS = ("run", "synth", "augment", "forest", "net", "train")


def build_run_config(preset: str = "toy", seed: int = 0,
                     kv: dict[str, str] | None = None) -> RunConfig:
    """Preset defaults, then key=value overrides on top."""
    if preset == "toy":
        run = _toy_defaults(seed)
    elif preset == "adni-paper":
        run = _adni_defaults(seed)
    else:
        raise ConfigInvalid(f"unknown preset {preset!r}; have {PRESET_NAMES}")
    kv = dict(kv or {})
    for section_key in kv:
        section = section_key.split(".", 1)[0]
        if section not in _SECTIONS:
            raise ConfigInvalid(f"unknown config section in {section_key!r}")
    run = replace(
        run,
        synth=_apply_section(run.synth, "synth", kv),
        augment=_apply_section(run.augment, "augment", kv),
        forest=_apply_section(run.forest, "forest", kv),
        net=_apply_section(run.net, "net", kv),
        train=_apply_section(run.train, "train", kv),
    )
    if "run.ng" in kv:
        run = replace(run, ng=int(kv["run.ng"]))
    known = {f"{p}.{f.name}" for p, inst in
             (("synth", run.synth), ("augment", run.augment), ("forest", run.forest),
              ("net", run.net), ("train", run.train)) for f in fields(inst)}
    known.add("run.ng")
    unknown = set(kv) - known
    if unknown:
        raise ConfigInvalid(f"unknown config keys: {sorted(unknown)}")
    return run


def _echo_value(value) -> str:
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, BoundingBox):
        return ",".join(str(d) for d in value.dims)
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    return str(value)


def config_echo(run: RunConfig) -> dict[str, str]:
    """Flatten a RunConfig back to sorted key=value pairs (audit trail)."""
    out: dict[str, str] = {"run.preset": run.preset, "run.seed": str(run.seed),
                           "run.ng": str(run.ng)}
    for prefix, instance in (("synth", run.synth), ("augment", run.augment),
                             ("forest", run.forest), ("net", run.net),
                             ("train", run.train)):
        for f in fields(instance):
            out[f"{prefix}.{f.name}"] = _echo_value(getattr(instance, f.name))
    return dict(sorted(out.items()))


def format_kv(kv: dict[str, str]) -> str:
    return "".join(f"{key}={value}\n" for key, value in sorted(kv.items()))
