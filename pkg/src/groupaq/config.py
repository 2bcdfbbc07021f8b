"""Run configuration: hyperparameters, defaults, and config-file loading."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

VARIANTS = ("full", "fga", "kmeans", "no_ce", "no_loc")
DISTANCE_MODES = ("haversine", "euclidean_degrees")


class ConfigError(ValueError):
    """Invalid or inconsistent configuration."""


@dataclass
class TrainConfig:
    """All knobs for building and training a forecaster.

    Defaults are the reference experimental settings; desk-scale runs
    typically shrink epochs/n_groups via a config file or CLI flags.
    """

    # data / task
    tau_in: int = 24
    tau_out: int = 6
    window_step: int = 1
    # graph
    radius_km: float = 250.0
    distance: str = "haversine"
    # architecture
    n_groups: int = 15
    d_hidden: int = 32
    d_edge: int = 12
    gnn_layers: int = 2
    attn_heads: int = 4
    attn_blocks: int = 1
    d_ff: int = 64
    time_dims: tuple[int, int, int] = (4, 4, 4)
    # optimization
    batch_size: int = 64
    epochs: int = 300
    lr_logits: float = 0.05
    lr_base: float = 0.001
    seed: int = 0
    variant: str = "full"

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        positive = [
            ("tau_in", self.tau_in), ("tau_out", self.tau_out),
            ("window_step", self.window_step), ("radius_km", self.radius_km),
            ("n_groups", self.n_groups), ("d_hidden", self.d_hidden),
            ("d_edge", self.d_edge), ("gnn_layers", self.gnn_layers),
            ("attn_heads", self.attn_heads), ("attn_blocks", self.attn_blocks),
            ("d_ff", self.d_ff), ("batch_size", self.batch_size),
            ("epochs", self.epochs),
        ]
        for name, value in positive:
            if value <= 0:
                raise ConfigError(f"{name} must be positive, got {value}")
        if self.lr_logits < 0 or self.lr_base < 0:
            raise ConfigError("learning rates must be >= 0")
        if self.variant not in VARIANTS:
            raise ConfigError(
                f"unknown variant {self.variant!r}; expected one of {VARIANTS}")
        if self.distance not in DISTANCE_MODES:
            raise ConfigError(
                f"unknown distance mode {self.distance!r}; expected one of {DISTANCE_MODES}")
        if self.d_hidden % self.attn_heads != 0:
            raise ConfigError(
                f"attn_heads ({self.attn_heads}) must divide d_hidden ({self.d_hidden})")
        if len(self.time_dims) != 3 or any(d <= 0 for d in self.time_dims):
            raise ConfigError("time_dims must be three positive integers")

    @property
    def d_time(self) -> int:
        return sum(self.time_dims)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["time_dims"] = list(self.time_dims)
        return d

    def replace(self, **changes) -> "TrainConfig":
        return dataclasses.replace(self, **changes)


_FIELD_NAMES = {f.name for f in dataclasses.fields(TrainConfig)}


def config_from_dict(values: dict) -> TrainConfig:
    """Build a TrainConfig from a plain dict, rejecting unknown keys."""
    unknown = set(values) - _FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    if "time_dims" in values:
        values = dict(values, time_dims=tuple(values["time_dims"]))
    return TrainConfig(**values)


def load_config(path: str | Path, overrides: dict | None = None) -> TrainConfig:
    """Load a JSON config file and apply non-None overrides on top."""
    with open(path) as fh:
        try:
            values = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path} is not valid JSON: {exc}") from exc
    if not isinstance(values, dict):
        raise ConfigError(f"config file {path} must contain a JSON object")
    if overrides:
        values.update({k: v for k, v in overrides.items() if v is not None})
    return config_from_dict(values)
