"""Synthetic soil-moisture sensor fleets with injected threshold faults.

Normal sensors dry out exponentially toward ``dry_limit_kpa`` and are
pushed back toward 0 kPa by rain events shared across the whole region,
so healthy sensors look alike. Faulty sensors follow the same dynamics
until an onset, then read ``threshold_kpa``:

* ``t1`` stays at the threshold until the end,
* ``t2`` holds, then recovers slowly (over >= 25% of the remaining length),
* ``t3`` holds briefly, then recovers fast (over <= 5% of the remaining length).

Faults of one type come from a single regional episode (say a dry spell
that makes a batch of probes lose soil contact): onset, hold and recovery
fractions are drawn once per type, and each sensor's onset is shifted by a
small Gaussian jitter of ``timing_jitter`` times the series length.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from rogue_sensors.data import Dataset, SensorSeries
from rogue_sensors.errors import ConfigError

LABELS = ("normal", "t1", "t2", "t3")


def _default_mix() -> dict[str, int]:
    return {"normal": 48, "t1": 5, "t2": 5, "t3": 5}


@dataclass(frozen=True)
class SimConfig:
    n_sensors: int = 63
    length: int = 884
    cadence_hours: int = 4
    start: str = "2007-04-01T00:00:00"
    threshold_kpa: float = -200.0
    dry_limit_kpa: float = -150.0
    n_fields: int = 1
    drying_rate: tuple[float, float] = (0.012, 0.016)
    rate_jitter: float = 0.10
    initial_kpa: tuple[float, float] = (-15.0, -5.0)
    rain_rate: float = 1 / 60
    rain_strength: tuple[float, float] = (0.6, 0.95)
    noise_std: float = 1.0
    anomaly_mix: dict[str, int] = field(default_factory=_default_mix)
    onset: tuple[float, float] = (0.25, 0.40)
    t2_hold: tuple[float, float] = (0.15, 0.20)
    t2_recovery: tuple[float, float] = (0.30, 0.40)
    t3_hold: tuple[float, float] = (0.06, 0.10)
    t3_recovery: tuple[float, float] = (0.02, 0.05)
    timing_jitter: float = 0.001
    seed: int = 0

    def __post_init__(self):
        mix = dict(self.anomaly_mix)
        if set(mix) - set(LABELS):
            raise ConfigError(f"unknown anomaly types {sorted(set(mix) - set(LABELS))}")
        if any(v < 0 for v in mix.values()) or sum(mix.values()) != self.n_sensors:
            raise ConfigError(
                f"anomaly_mix counts {mix} must be non-negative and sum to n_sensors={self.n_sensors}"
            )
        if self.length < 2:
            raise ConfigError("length must be >= 2")
        if not self.threshold_kpa < self.dry_limit_kpa < 0:
            raise ConfigError("need threshold_kpa < dry_limit_kpa < 0")
        if self.n_fields < 1 or self.cadence_hours < 1 or self.noise_std < 0 or self.timing_jitter < 0:
            raise ConfigError("n_fields and cadence_hours must be positive; noise_std and timing_jitter non-negative")
        if self.t2_recovery[0] < 0.25 or self.t3_recovery[1] > 0.05:
            raise ConfigError("t2 recovery must span >= 25% and t3 <= 5% of the remaining length")


def _uniform(rng: np.random.Generator, bounds) -> float:
    lo, hi = bounds
    return float(rng.uniform(lo, hi))


def _normal_trajectory(cfg: SimConfig, rate: float, rain: np.ndarray, psi0: float) -> np.ndarray:
    psi = np.empty(cfg.length)
    psi[0] = psi0
    for t in range(1, cfg.length):
        p = psi[t - 1] + rate * (cfg.dry_limit_kpa - psi[t - 1])
        psi[t] = p * (1.0 - rain[t])
    return psi


@dataclass(frozen=True)
class Episode:
    """Timing shared by all faults of one type, as fractions of the series."""

    onset: float
    hold: float = 0.0
    recovery: float = 0.0


def _episode(cfg: SimConfig, kind: str, rng: np.random.Generator) -> Episode:
    onset = _uniform(rng, cfg.onset)
    if kind == "t1":
        return Episode(onset)
    hold_b, rec_b = (cfg.t2_hold, cfg.t2_recovery) if kind == "t2" else (cfg.t3_hold, cfg.t3_recovery)
    return Episode(onset, _uniform(rng, hold_b), _uniform(rng, rec_b))


def _inject(cfg: SimConfig, base: np.ndarray, kind: str, ep: Episode, rng: np.random.Generator) -> np.ndarray:
    out = base.copy()
    n = cfg.length
    shift = cfg.timing_jitter * n * rng.standard_normal()
    onset = int(np.clip(round(ep.onset * n + shift), 1, n - 1))
    remaining = n - onset
    if kind == "t1":
        out[onset:] = cfg.threshold_kpa
        return out
    hold = min(max(1, int(round(ep.hold * remaining))), remaining)
    rec = min(max(1, int(round(ep.recovery * remaining))), remaining - hold)
    out[onset : onset + hold] = cfg.threshold_kpa
    if rec > 0:
        ramp = np.arange(1, rec + 1) / (rec + 1)
        seg = slice(onset + hold, onset + hold + rec)
        out[seg] = cfg.threshold_kpa + (base[seg] - cfg.threshold_kpa) * ramp
    return out


def generate_clean(cfg: SimConfig) -> tuple[list[np.ndarray], np.ndarray, list[str]]:
    """Noise-free trajectories, integer labels (index into LABELS) and sensor ids."""
    rng = np.random.default_rng(cfg.seed)
    n = cfg.length
    rain_events = rng.random(n) < cfg.rain_rate
    rain = np.where(rain_events, rng.uniform(*cfg.rain_strength, size=n), 0.0)
    rain[0] = 0.0
    field_rates = rng.uniform(*cfg.drying_rate, size=cfg.n_fields)
    episodes = {k: _episode(cfg, k, rng) for k in LABELS[1:]}

    kinds = [k for k in LABELS for _ in range(cfg.anomaly_mix.get(k, 0))]
    kinds = [kinds[i] for i in rng.permutation(len(kinds))]
    series, labels, ids = [], [], []
    for s, kind in enumerate(kinds):
        fld = s % cfg.n_fields
        rate = field_rates[fld] * (1.0 + cfg.rate_jitter * rng.uniform(-1.0, 1.0))
        rate = float(np.clip(rate, 1e-4, 0.5))
        base = _normal_trajectory(cfg, rate, rain, _uniform(rng, cfg.initial_kpa))
        values = base if kind == "normal" else _inject(cfg, base, kind, episodes[kind], rng)
        series.append(values)
        labels.append(LABELS.index(kind))
        ids.append(f"field{fld}_s{s:03d}")
    return series, np.array(labels, dtype=np.int64), ids


def generate(cfg: SimConfig) -> tuple[Dataset, np.ndarray]:
    """Raw (unnormalized) fleet in kPa plus ground-truth labels."""
    clean, labels, ids = generate_clean(cfg)
    noise_rng = np.random.default_rng([cfg.seed, 1])
    start = int(datetime.fromisoformat(cfg.start).replace(tzinfo=timezone.utc).timestamp())
    ts = start + np.arange(cfg.length, dtype=np.int64) * cfg.cadence_hours * 3600
    series = tuple(
        SensorSeries(sid, ts, v + cfg.noise_std * noise_rng.standard_normal(cfg.length))
        for sid, v in zip(ids, clean)
    )
    return Dataset(series), labels


def longest_pinned_run(values: np.ndarray, threshold: float) -> int:
    """Longest run of consecutive readings exactly at ``threshold``."""
    best = run = 0
    for v in values:
        run = run + 1 if v == threshold else 0
        best = max(best, run)
    return best


def audit(cfg: SimConfig) -> dict:
    """Construction checks on the noise-free fleet."""
    clean, labels, _ = generate_clean(cfg)
    normal_runs = [longest_pinned_run(v, cfg.threshold_kpa) for v, l in zip(clean, labels) if l == 0]
    stacked = np.stack(clean)
    return {
        "max_normal_pinned_run": max(normal_runs, default=0),
        "all_nonpositive": bool(np.all(stacked <= 0)),
        "all_above_threshold": bool(np.all(stacked >= cfg.threshold_kpa)),
        "label_counts": {k: int(np.sum(labels == i)) for i, k in enumerate(LABELS)},
    }


def write_ground_truth(ids, labels, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensor_id", "label"])
        for sid, lab in zip(ids, labels):
            w.writerow([sid, LABELS[int(lab)]])


def read_ground_truth(path: str | Path) -> dict[str, str]:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        return {row["sensor_id"]: row["label"] for row in csv.DictReader(fh)}
