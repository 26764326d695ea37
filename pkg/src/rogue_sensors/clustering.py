"""DBSCAN over embeddings, with epsilon read off the k-distance knee."""

from __future__ import annotations

import csv
from collections import deque
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from rogue_sensors.errors import ConfigError, DataError, NoKneeError

NOISE = -1
CORE, BORDER, OUTLIER = "core", "border", "noise"


@dataclass(frozen=True)
class DbscanParams:
    epsilon: float
    min_pts: int = 4

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError("epsilon must be positive")
        if self.min_pts < 1:
            raise ConfigError("min_pts must be >= 1")


@dataclass(frozen=True)
class ClusterResult:
    labels: np.ndarray
    roles: tuple[str, ...]

    @property
    def n_clusters(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size and self.labels.max() >= 0 else 0

    @property
    def noise(self) -> np.ndarray:
        return np.flatnonzero(self.labels == NOISE)


def _points(points) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[0] < 1:
        raise DataError("points must be a non-empty (n, dim) array")
    if not np.all(np.isfinite(pts)):
        raise DataError("points contain non-finite values")
    return pts


def k_distance_curve(points, k: int) -> np.ndarray:
    """Distance from every point to its k-th nearest other point, sorted descending."""
    pts = _points(points)
    n = pts.shape[0]
    if k < 1 or n <= k:
        raise DataError(f"k-distance needs n > k (n={n}, k={k})")
    dist = cdist(pts, pts)
    np.fill_diagonal(dist, np.inf)  # exclude the point itself, keep duplicates
    kth = np.sort(dist, axis=1)[:, k - 1]
    return np.sort(kth)[::-1]


def difference_curve(curve, shape: str = "convex") -> np.ndarray:
    """Normalized gap between a decreasing curve and the chord joining its ends."""
    y = np.asarray(curve, dtype=np.float64)
    n = y.size
    xn = np.arange(n) / (n - 1)
    span = y.max() - y.min()
    if span == 0:
        return np.zeros(n)
    yn = (y - y.min()) / span
    if shape == "convex":
        return (1.0 - xn) - yn
    if shape == "concave":
        return yn - (1.0 - xn)
    raise ConfigError(f"unknown curve shape {shape!r}")


def locate_knee(curve, sensitivity: float = 1.0, shape: str = "convex") -> int:
    """Kneedle (offline) on a decreasing curve; returns the knee index.

    A local maximum of the difference curve is a knee candidate once the
    difference later falls below ``max - sensitivity * mean x-spacing``
    before the next local maximum. Among candidates, the one with the
    largest difference wins.
    """
    y = np.asarray(curve, dtype=np.float64)
    if y.ndim != 1 or y.size < 3:
        raise DataError("knee detection needs a curve of at least 3 points")
    if np.any(np.diff(y) > 0):
        raise DataError("knee detection expects a non-increasing curve")
    diff = difference_curve(y, shape)
    n = diff.size
    threshold_step = sensitivity / (n - 1)
    candidates = []
    i = 0
    while i < n:
        left = diff[i - 1] if i > 0 else -np.inf
        right = diff[i + 1] if i < n - 1 else -np.inf
        if diff[i] >= left and diff[i] >= right and diff[i] > 1e-12:
            thresh = diff[i] - threshold_step
            j = i + 1
            while j < n and diff[j] <= diff[j - 1] and diff[j] >= thresh:
                j += 1
            if j < n and diff[j] < thresh:
                candidates.append(i)
            # skip a plateau so it yields one candidate
            while i + 1 < n and diff[i + 1] == diff[i]:
                i += 1
        i += 1
    if not candidates:
        raise NoKneeError(
            "no knee found in the k-distance curve; pass an explicit epsilon instead"
        )
    return max(candidates, key=lambda c: (diff[c], -c))


def find_knee(curve, sensitivity: float = 1.0, shape: str = "convex") -> float:
    """Curve value at the kneedle knee."""
    y = np.asarray(curve, dtype=np.float64)
    return float(y[locate_knee(y, sensitivity, shape)])


def select_epsilon(points, min_pts: int = 4, sensitivity: float = 1.0) -> float:
    eps = find_knee(k_distance_curve(points, min_pts), sensitivity)
    if not eps > 0:
        raise NoKneeError("knee of the k-distance curve is at distance 0; pass an explicit epsilon")
    return eps


def dbscan(points, params: DbscanParams) -> ClusterResult:
    """Classic DBSCAN with inclusive ``<= epsilon`` neighborhoods.

    Neighbor counts include the point itself. Clusters are numbered in the
    order their first core point appears; a border point reachable from
    several clusters joins the one that reaches it first.
    """
    pts = _points(points)
    n = pts.shape[0]
    within = cdist(pts, pts) <= params.epsilon
    neighbors = [np.flatnonzero(row) for row in within]
    is_core = np.array([nb.size >= params.min_pts for nb in neighbors])
    labels = np.full(n, NOISE, dtype=np.int64)
    cluster = 0
    for i in range(n):
        if labels[i] != NOISE or not is_core[i]:
            continue
        labels[i] = cluster
        queue = deque([i])
        while queue:
            q = queue.popleft()
            if not is_core[q]:
                continue
            for nb in neighbors[q]:
                if labels[nb] == NOISE:
                    labels[nb] = cluster
                    queue.append(nb)
        cluster += 1
    roles = tuple(
        CORE if is_core[i] else (BORDER if labels[i] != NOISE else OUTLIER) for i in range(n)
    )
    return ClusterResult(labels, roles)


def write_k_distance_csv(curve, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "distance"])
        for r, v in enumerate(curve):
            w.writerow([r, repr(float(v))])
