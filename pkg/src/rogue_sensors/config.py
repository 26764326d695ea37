"""Pipeline configuration: one YAML file with nested sections, flags override keys."""

from __future__ import annotations

import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from rogue_sensors.data import SCALE_MODES
from rogue_sensors.encoder import EncoderConfig
from rogue_sensors.errors import ConfigError, RogueSensorError
from rogue_sensors.simgen import SimConfig
from rogue_sensors.training import TrainConfig


@dataclass(frozen=True)
class DataSection:
    input: str | None = None
    ground_truth: str | None = None
    simgen: dict | None = None
    scale: str = "std"


@dataclass(frozen=True)
class DtwSection:
    band: int | None = None
    squared: bool = False


@dataclass(frozen=True)
class ClusterSection:
    min_pts: int = 4
    epsilon: float | None = None
    sensitivity: float = 1.0


@dataclass(frozen=True)
class OutputSection:
    plot: bool = True
    timings: bool = False
    dump_triplets: bool = False


@dataclass(frozen=True)
class PipelineConfig:
    seed: int
    out: str = "runs/default"
    data: DataSection = field(default_factory=DataSection)
    dtw: DtwSection = field(default_factory=DtwSection)
    encoder: dict = field(default_factory=dict)
    train: dict = field(default_factory=dict)
    clustering: ClusterSection = field(default_factory=ClusterSection)
    output: OutputSection = field(default_factory=OutputSection)

    def __post_init__(self):
        has_input = self.data.input is not None
        has_sim = self.data.simgen is not None
        if has_input == has_sim:
            raise ConfigError("config needs exactly one of data.input or data.simgen")
        if self.data.scale not in SCALE_MODES:
            raise ConfigError(f"data.scale must be one of {SCALE_MODES}")
        if self.clustering.epsilon is not None and not self.clustering.epsilon > 0:
            raise ConfigError("clustering.epsilon must be positive")
        # validate the nested sections eagerly so errors surface before any stage runs
        self.encoder_config()
        self.train_config()
        self.sim_config()

    @property
    def is_simulated(self) -> bool:
        return self.data.simgen is not None

    def sim_config(self) -> SimConfig | None:
        if self.data.simgen is None:
            return None
        kw = dict(self.data.simgen)
        kw.setdefault("seed", self.seed)
        for key in ("drying_rate", "initial_kpa", "rain_strength", "onset", "t2_hold",
                    "t2_recovery", "t3_hold", "t3_recovery"):
            if key in kw:
                kw[key] = tuple(kw[key])
        return _build(SimConfig, kw, "data.simgen")

    def encoder_config(self) -> EncoderConfig:
        return _build(EncoderConfig, self.encoder, "encoder")

    def train_config(self) -> TrainConfig:
        kw = dict(self.train)
        kw.setdefault("seed", self.seed)
        return _build(TrainConfig, kw, "train")

    def section_hash(self, stage: str) -> str:
        """Hash of the configuration a stage's outputs depend on."""
        return _digest(self._stage_inputs(stage))

    def _stage_inputs(self, stage: str) -> dict:
        data = {"data": _plain(self.data), "sim": _plain(self.sim_config())}
        if stage in ("data", "simulate"):
            return data
        dtw = {**data, "dtw": _plain(self.dtw)}
        if stage == "dtw":
            return dtw
        trained = {**dtw, "encoder": _plain(self.encoder_config()), "train": _plain(self.train_config())}
        if stage in ("train", "embed"):
            return trained
        if stage in ("cluster", "eval"):
            return {**trained, "clustering": _plain(self.clustering)}
        raise ConfigError(f"unknown stage {stage!r}")

    def as_dict(self) -> dict:
        return _plain(self)


def _build(cls, kw: dict, where: str):
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(kw) - names
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    try:
        return cls(**kw)
    except RogueSensorError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from None


def _plain(obj: Any) -> Any:
    if dataclasses.is_dataclass(obj):
        return {f.name: _plain(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    return obj


def _digest(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()[:16]


SECTIONS = {"data": DataSection, "dtw": DtwSection, "clustering": ClusterSection, "output": OutputSection}


def from_dict(raw: dict, **overrides) -> PipelineConfig:
    """Build a config from parsed YAML; ``overrides`` are already-validated flag values."""
    raw = dict(raw or {})
    for key, value in overrides.items():
        if value is None:
            continue
        if key == "epsilon":
            raw.setdefault("clustering", {})["epsilon"] = value
        elif key == "scale":
            raw.setdefault("data", {})["scale"] = value
        else:
            raw[key] = value
    if "seed" not in raw:
        raise ConfigError("config must set a global seed")
    kw: dict[str, Any] = {}
    for key, value in raw.items():
        if key in SECTIONS:
            kw[key] = _build(SECTIONS[key], dict(value or {}), key)
        elif key in ("encoder", "train"):
            kw[key] = dict(value or {})
        elif key in ("seed", "out"):
            kw[key] = value
        else:
            raise ConfigError(f"unknown config section {key!r}")
    try:
        kw["seed"] = int(kw["seed"])
    except (TypeError, ValueError):
        raise ConfigError("seed must be an integer") from None
    return PipelineConfig(**kw)


def load_config(path: str | Path | None, **overrides) -> PipelineConfig:
    """Read a YAML config; without a file the default synthetic fleet is used."""
    raw: dict = {"data": {"simgen": {}}}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: invalid YAML ({exc})") from None
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be a mapping")
        for key in ("input", "ground_truth"):
            rel = (raw.get("data") or {}).get(key)
            if rel is not None and not Path(rel).is_absolute():
                raw["data"][key] = str((path.parent / rel).resolve())
    return from_dict(raw, **overrides)
