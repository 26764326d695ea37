"""Anchor/positive/negative subsequence sampling guided by DTW distances."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from rogue_sensors.data import Dataset
from rogue_sensors.errors import ConfigError, DataError

NEGATIVE_MODES = ("dtw", "random")


@dataclass(frozen=True)
class Span:
    series: int
    offset: int
    length: int

    def take(self, d: Dataset) -> np.ndarray:
        return d.series[self.series].values[self.offset : self.offset + self.length]


@dataclass(frozen=True)
class Triplet:
    """Spans index into ``Dataset.series``; all offsets are absolute within their series."""

    series_index: int
    anchor: Span
    positive: Span
    negatives: tuple[Span, ...]

    def check(self, d: Dataset, neighbors: Iterable[int] | None = None) -> None:
        s_i = len(d.series[self.series_index])
        a, p = self.anchor, self.positive
        assert a.series == p.series == self.series_index
        assert 1 <= p.length <= a.length <= s_i
        assert 0 <= a.offset and a.offset + a.length <= s_i
        assert a.offset <= p.offset and p.offset + p.length <= a.offset + a.length
        allowed = None if neighbors is None else set(neighbors)
        for neg in self.negatives:
            assert neg.series != self.series_index
            assert allowed is None or neg.series in allowed
            s_k = len(d.series[neg.series])
            assert 1 <= neg.length <= s_k
            assert 0 <= neg.offset and neg.offset + neg.length <= s_k


def furthest_neighbors(m: np.ndarray, i: int, k: int) -> list[int]:
    """The ``k`` series furthest from ``i``; ties go to the lower index."""
    n = m.shape[0]
    if not 1 <= k <= n - 1:
        raise ConfigError(f"K={k} negatives requested but only {n - 1} other series exist")
    others = [j for j in range(n) if j != i]
    others.sort(key=lambda j: (-m[i, j], j))
    return others[:k]


def _random_span(series: int, size: int, rng: np.random.Generator) -> Span:
    length = int(rng.integers(1, size + 1))
    offset = int(rng.integers(0, size - length + 1))
    return Span(series, offset, length)


def sample_triplet(
    d: Dataset,
    i: int,
    m: np.ndarray | None,
    k: int,
    rng: np.random.Generator,
    negative_mode: str = "dtw",
) -> Triplet:
    """Draw one triplet for series ``i``.

    Positive length is uniform on [1, s_i], anchor length uniform on
    [positive length, s_i], and both offsets are uniform over the valid
    positions (the positive inside the anchor). Each of the ``k`` furthest
    series by DTW contributes one negative of uniform length and offset.
    ``negative_mode="random"`` picks the negative series uniformly instead,
    for comparison with plain random negative sampling.
    """
    n = len(d)
    if m is not None and m.shape != (n, n):
        raise DataError("distance matrix does not match dataset")
    s_i = len(d.series[i])
    s_pos = int(rng.integers(1, s_i + 1))
    s_anchor = int(rng.integers(s_pos, s_i + 1))
    a_off = int(rng.integers(0, s_i - s_anchor + 1))
    p_off = a_off + int(rng.integers(0, s_anchor - s_pos + 1))

    if negative_mode == "dtw":
        if m is None:
            raise ConfigError("DTW negative sampling needs a distance matrix")
        neigh = furthest_neighbors(m, i, k)
    elif negative_mode == "random":
        if not 1 <= k <= n - 1:
            raise ConfigError(f"K={k} negatives requested but only {n - 1} other series exist")
        others = np.array([j for j in range(n) if j != i])
        neigh = [int(j) for j in rng.choice(others, size=k, replace=False)]
    else:
        raise ConfigError(f"unknown negative mode {negative_mode!r}")

    negatives = tuple(_random_span(j, len(d.series[j]), rng) for j in neigh)
    return Triplet(i, Span(i, a_off, s_anchor), Span(i, p_off, s_pos), negatives)


def write_triplets_csv(rows: Iterable[tuple[int, Triplet]], path: str | Path) -> None:
    """Debug dump: one line per (step, triplet)."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["step", "i", "anchor_offset", "anchor_len", "pos_offset", "pos_len", "negatives"])
        for step, t in rows:
            negs = ";".join(f"{s.series}:{s.offset}:{s.length}" for s in t.negatives)
            w.writerow([step, t.series_index, t.anchor.offset, t.anchor.length,
                        t.positive.offset, t.positive.length, negs])
