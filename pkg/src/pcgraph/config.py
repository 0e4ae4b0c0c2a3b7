"""Run configuration: a sectioned key=value file plus CLI overrides.

The file is INI-style with four sections. Keys are named exactly as the
RunConfig fields:

    [model]     sizes, connections, activation, convention, weight_scale, seed
    [inference] max_steps, step_size, stop_tolerance, init, solver, evaluation
    [training]  epochs, batch_size, learning_rate, dataset, split, workers
    [output]    checkpoint, metrics

Overrides are ``section.key=value`` strings applied on top of the file.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass

from .core import CONVENTIONS, ACTIVATIONS, LayerSpec
from .pcn import InferenceConfig
from .topology import ConnectionKind, parse_kinds


class ConfigError(ValueError):
    """Invalid or missing run configuration."""


@dataclass
class RunConfig:
    """Everything a training run needs; all randomness flows from ``seed``."""

    # model
    sizes: tuple[int, ...] = ()
    connections: tuple[ConnectionKind, ...] = (ConnectionKind.FORWARD,)
    activation: str = "tanh"
    convention: str = "matrix-activation"
    weight_scale: float = 1.0
    seed: int | None = None
    # inference
    max_steps: int = 100
    step_size: float = 0.1
    stop_tolerance: float = 1e-8
    init: str = "feedforward"
    solver: str = "gradient-descent"
    evaluation: str = "auto"
    # training
    epochs: int = 100
    batch_size: int = 1
    learning_rate: float = 0.05
    dataset: str = ""
    split: float = 0.8
    workers: int = 1
    # output
    checkpoint: str = ""
    metrics: str = ""

    def layers(self) -> LayerSpec:
        if not self.sizes:
            raise ConfigError("model.sizes is required")
        try:
            return LayerSpec(self.sizes)
        except ValueError as err:
            raise ConfigError(f"model.sizes: {err}") from None

    def inference_config(self) -> InferenceConfig:
        try:
            return InferenceConfig(self.max_steps, self.step_size,
                                   self.stop_tolerance, self.solver, self.init,
                                   self.evaluation)
        except ValueError as err:
            raise ConfigError(f"inference: {err}") from None

    def validate_for_training(self) -> None:
        self.layers()
        self.inference_config()
        if self.seed is None:
            raise ConfigError("model.seed is required (pass --seed)")
        if self.seed < 0:
            raise ConfigError("model.seed must be nonnegative")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"model.activation must be one of {sorted(ACTIVATIONS)}")
        if self.convention not in CONVENTIONS:
            raise ConfigError(f"model.convention must be one of {CONVENTIONS}")
        if not self.connections:
            raise ConfigError("model.connections must name at least one kind")
        if self.weight_scale <= 0:
            raise ConfigError("model.weight_scale must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.workers < 1:
            raise ConfigError("training.epochs, batch_size, and workers must be positive")
        if self.learning_rate < 0:
            # zero is allowed: it trains nothing but exercises the loop
            raise ConfigError("training.learning_rate must be nonnegative")
        if not 0 < self.split <= 1:
            raise ConfigError("training.split must be in (0, 1]")
        if not self.dataset:
            raise ConfigError("training.dataset is required")
        if not self.checkpoint or not self.metrics:
            raise ConfigError("output.checkpoint and output.metrics are required")


_SECTION_FIELDS = {
    "model": ("sizes", "connections", "activation", "convention", "weight_scale", "seed"),
    "inference": ("max_steps", "step_size", "stop_tolerance", "init", "solver", "evaluation"),
    "training": ("epochs", "batch_size", "learning_rate", "dataset", "split", "workers"),
    "output": ("checkpoint", "metrics"),
}

_FIELD_SECTION = {
    key: section for section, keys in _SECTION_FIELDS.items() for key in keys
}


def _coerce(key: str, raw: str):
    kind = RunConfig.__dataclass_fields__[key].type
    raw = raw.strip()
    try:
        if key == "sizes":
            return tuple(int(part) for part in raw.split(","))
        if key == "connections":
            return parse_kinds(part.strip() for part in raw.split(","))
        if key == "seed":
            return int(raw)
        if "int" in kind:
            return int(raw)
        if "float" in kind:
            return float(raw)
        return raw
    except ValueError as err:
        raise ConfigError(f"{_FIELD_SECTION[key]}.{key}: {err}") from None


def _apply(cfg: RunConfig, section: str, key: str, raw: str) -> None:
    if section not in _SECTION_FIELDS:
        raise ConfigError(f"unknown section [{section}]")
    if key not in _SECTION_FIELDS[section]:
        raise ConfigError(f"unknown key {key!r} in section [{section}]")
    setattr(cfg, key, _coerce(key, raw))


def load_config(path, overrides: tuple[str, ...] = ()) -> RunConfig:
    """Parse the config file, then apply ``section.key=value`` overrides."""
    parser = configparser.ConfigParser(interpolation=None,
                                       inline_comment_prefixes=("#",))
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh, source=str(path))
    except configparser.Error as err:
        raise ConfigError(f"cannot parse {path}: {err}") from None
    cfg = RunConfig()
    for section in parser.sections():
        for key, raw in parser.items(section):
            _apply(cfg, section, key, raw)
    apply_overrides(cfg, overrides)
    return cfg


def apply_overrides(cfg: RunConfig, overrides: tuple[str, ...]) -> None:
    """Apply ``section.key=value`` strings in order."""
    for item in overrides:
        head, sep, value = item.partition("=")
        section, dot, key = head.strip().partition(".")
        if not sep or not dot:
            raise ConfigError(f"override must look like section.key=value, got {item!r}")
        _apply(cfg, section.strip(), key.strip(), value)
