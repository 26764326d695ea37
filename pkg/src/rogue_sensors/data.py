"""Loading, validation and global normalization of sensor time series."""

from __future__ import annotations

import csv
import hashlib
import json
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import Sequence

import numpy as np

from rogue_sensors.errors import DataError, DegenerateDatasetError

CADENCE_SECONDS = 4 * 3600
MAX_INTERPOLATED_GAP = 2
SCALE_MODES = ("std", "variance")


@dataclass(frozen=True)
class SensorSeries:
    """One sensor's measurements; timestamps are epoch seconds (UTC)."""

    sensor_id: str
    timestamps: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        ts = np.asarray(self.timestamps, dtype=np.int64)
        vals = np.asarray(self.values, dtype=np.float64)
        if ts.ndim != 1 or vals.ndim != 1 or ts.shape != vals.shape:
            raise DataError(f"sensor {self.sensor_id!r}: timestamps and values must be 1-D and aligned")
        if len(vals) < 1:
            raise DataError(f"sensor {self.sensor_id!r}: empty series")
        if np.any(np.diff(ts) <= 0):
            raise DataError(f"sensor {self.sensor_id!r}: timestamps not strictly increasing")
        if not np.all(np.isfinite(vals)):
            raise DataError(f"sensor {self.sensor_id!r}: non-finite values")
        ts.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "timestamps", ts)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class NormStats:
    mean: float
    scale: float
    mode: str = "std"


@dataclass(frozen=True)
class Dataset:
    series: tuple[SensorSeries, ...]
    norm_stats: NormStats | None = None
    normalized: bool = False

    def __post_init__(self):
        object.__setattr__(self, "series", tuple(self.series))
        if not self.series:
            raise DataError("dataset has no series")
        ids = [s.sensor_id for s in self.series]
        if len(set(ids)) != len(ids):
            raise DataError("duplicate sensor ids in dataset")

    def __len__(self) -> int:
        return len(self.series)

    @property
    def sensor_ids(self) -> list[str]:
        return [s.sensor_id for s in self.series]

    @property
    def values(self) -> list[np.ndarray]:
        return [s.values for s in self.series]

    def content_hash(self) -> str:
        """SHA-256 over ids, timestamps, values and normalization state."""
        h = hashlib.sha256()
        h.update(repr((self.normalized, self.norm_stats)).encode())
        for s in self.series:
            h.update(s.sensor_id.encode() + b"\0")
            h.update(s.timestamps.astype("<i8").tobytes())
            h.update(s.values.astype("<f8").tobytes())
        return h.hexdigest()


def _parse_timestamp(raw: str, epoch: bool, lineno: int) -> int:
    raw = raw.strip()
    try:
        if epoch:
            return int(raw)
        dt = datetime.fromisoformat(raw.replace("Z", "+00:00"))
    except ValueError:
        raise DataError(f"line {lineno}: unparseable timestamp {raw!r}") from None
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return int(dt.timestamp())


def _looks_like_epoch(raw: str) -> bool:
    raw = raw.strip()
    return raw.lstrip("-").isdigit()


def _fill_gaps(sensor_id: str, ts: np.ndarray, vals: np.ndarray, cadence: int):
    """Put readings on the cadence grid, interpolating short runs of missing slots."""
    offsets = ts - ts[0]
    if np.any(offsets % cadence):
        raise DataError(f"sensor {sensor_id!r}: timestamps off the {cadence}s cadence grid")
    slots = offsets // cadence
    grid = np.full(int(slots[-1]) + 1, np.nan)
    grid[slots] = vals
    missing = np.isnan(grid)
    if missing[0] or missing[-1]:
        raise DataError(f"sensor {sensor_id!r}: missing value at series boundary")
    run = 0
    for m in missing:
        run = run + 1 if m else 0
        if run > MAX_INTERPOLATED_GAP:
            raise DataError(
                f"sensor {sensor_id!r}: more than {MAX_INTERPOLATED_GAP} consecutive missing slots"
            )
    if missing.any():
        idx = np.arange(len(grid))
        grid[missing] = np.interp(idx[missing], idx[~missing], grid[~missing])
    new_ts = ts[0] + np.arange(len(grid), dtype=np.int64) * cadence
    return new_ts, grid


def load_csv(
    path: str | Path,
    *,
    id_col: str = "sensor_id",
    time_col: str = "timestamp",
    value_col: str = "value",
    cadence_seconds: int = CADENCE_SECONDS,
) -> Dataset:
    """Read a long-format ``sensor_id,timestamp,value`` CSV into a Dataset.

    Timestamps are either all ISO-8601 or all integer epoch seconds; the
    format is decided from the first data row. Empty or ``nan`` values count
    as missing slots, as do absent cadence slots; up to two consecutive
    missing slots are linearly interpolated.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"input file not found: {path}")
    rows: dict[str, list[tuple[int, float, int]]] = {}
    epoch: bool | None = None
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        try:
            i_id, i_t, i_v = (header.index(c) for c in (id_col, time_col, value_col))
        except ValueError:
            raise DataError(f"{path}: header must contain {id_col},{time_col},{value_col}") from None
        for row in reader:
            lineno = reader.line_num
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) != len(header):
                raise DataError(f"line {lineno}: expected {len(header)} fields, got {len(row)}")
            if epoch is None:
                epoch = _looks_like_epoch(row[i_t])
            t = _parse_timestamp(row[i_t], epoch, lineno)
            raw_v = row[i_v].strip()
            if raw_v == "" or raw_v.lower() == "nan":
                continue  # treated as a missing slot
            try:
                v = float(raw_v)
            except ValueError:
                raise DataError(f"line {lineno}: unparseable value {raw_v!r}") from None
            if not np.isfinite(v):
                raise DataError(f"line {lineno}: non-finite value {raw_v!r}")
            rows.setdefault(row[i_id].strip(), []).append((t, v, lineno))
    if not rows:
        raise DataError(f"{path}: no data rows")

    series = []
    for sensor_id, recs in rows.items():
        recs.sort(key=lambda r: r[0])
        ts = np.array([r[0] for r in recs], dtype=np.int64)
        dup = np.flatnonzero(np.diff(ts) == 0)
        if dup.size:
            line = recs[dup[0] + 1][2]
            raise DataError(f"line {line}: duplicate timestamp for sensor {sensor_id!r}")
        vals = np.array([r[1] for r in recs], dtype=np.float64)
        ts, vals = _fill_gaps(sensor_id, ts, vals, cadence_seconds)
        series.append(SensorSeries(sensor_id, ts, vals))
    return Dataset(tuple(series))


def pooled_stats(d: Dataset, scale: str = "std") -> NormStats:
    if scale not in SCALE_MODES:
        raise DataError(f"unknown scale mode {scale!r}; expected one of {SCALE_MODES}")
    pooled = np.concatenate(d.values)
    mean = float(pooled.mean())
    var = float(((pooled - mean) ** 2).mean())
    if var <= 0.0:
        raise DegenerateDatasetError("pooled variance is zero; cannot normalize")
    return NormStats(mean, var if scale == "variance" else float(np.sqrt(var)), scale)


def normalize(d: Dataset, scale: str = "std") -> Dataset:
    """Subtract the pooled mean and divide by the pooled scale.

    ``scale="std"`` gives the usual z-score; ``scale="variance"`` divides by
    the raw (population) variance instead.
    """
    if d.normalized:
        raise DataError("dataset is already normalized")
    stats = pooled_stats(d, scale)
    series = tuple(
        replace(s, values=(s.values - stats.mean) / stats.scale) for s in d.series
    )
    return Dataset(series, norm_stats=stats, normalized=True)


def denormalize(d: Dataset) -> Dataset:
    if not d.normalized or d.norm_stats is None:
        raise DataError("dataset is not normalized")
    st = d.norm_stats
    series = tuple(replace(s, values=s.values * st.scale + st.mean) for s in d.series)
    return Dataset(series)


def from_arrays(
    values: Sequence[Sequence[float]],
    sensor_ids: Sequence[str] | None = None,
    start: int = 0,
    cadence_seconds: int = CADENCE_SECONDS,
) -> Dataset:
    """Build a raw Dataset from in-memory arrays on a uniform cadence."""
    if sensor_ids is None:
        sensor_ids = [f"s{i:03d}" for i in range(len(values))]
    series = []
    for sid, v in zip(sensor_ids, values):
        v = np.asarray(v, dtype=np.float64)
        ts = start + np.arange(len(v), dtype=np.int64) * cadence_seconds
        series.append(SensorSeries(sid, ts, v))
    return Dataset(tuple(series))


def _iso(t: int) -> str:
    return datetime.fromtimestamp(int(t), tz=timezone.utc).strftime("%Y-%m-%dT%H:%M:%S")


def save_dataset(d: Dataset, path: str | Path) -> None:
    """Write the canonical CSV plus a ``.meta.json`` sidecar with norm stats."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["sensor_id", "timestamp", "value"])
        for s in d.series:
            for t, v in zip(s.timestamps, s.values):
                w.writerow([s.sensor_id, _iso(t), repr(float(v))])
    meta = {
        "normalized": d.normalized,
        "norm_stats": None if d.norm_stats is None else vars(d.norm_stats),
    }
    meta_path(path).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def meta_path(path: str | Path) -> Path:
    path = Path(path)
    return path.with_name(path.stem + ".meta.json")


def read_dataset(path: str | Path) -> Dataset:
    """Inverse of :func:`save_dataset`."""
    d = load_csv(path)
    mp = meta_path(path)
    if mp.exists():
        meta = json.loads(mp.read_text(encoding="utf-8"))
        if meta.get("normalized"):
            st = meta["norm_stats"]
            return Dataset(d.series, NormStats(st["mean"], st["scale"], st["mode"]), True)
    return d
