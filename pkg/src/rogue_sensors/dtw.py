"""Dynamic time warping distances and the pairwise matrix used for negative sampling."""

from __future__ import annotations

import json
import logging
from pathlib import Path

import numba as nb
import numpy as np

from rogue_sensors.data import Dataset
from rogue_sensors.errors import DataError

log = logging.getLogger(__name__)


@nb.njit(cache=True, nogil=True)
def _dtw_kernel(a, b, band, squared):
    n, m = a.shape[0], b.shape[0]
    inf = np.inf
    prev = np.full(m + 1, inf)
    cur = np.full(m + 1, inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur[:] = inf
        if band < 0:
            lo, hi = 1, m
        else:
            # band is measured around the rescaled diagonal so unequal lengths stay feasible
            center = (i * m) // n if n > 0 else i
            lo = max(1, center - band)
            hi = min(m, center + band)
        ai = a[i - 1]
        for j in range(lo, hi + 1):
            d = ai - b[j - 1]
            c = d * d if squared else abs(d)
            best = prev[j - 1]
            if prev[j] < best:
                best = prev[j]
            if cur[j - 1] < best:
                best = cur[j - 1]
            cur[j] = c + best
        prev, cur = cur, prev
    return prev[m]


def _as_sequence(x, name: str) -> np.ndarray:
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 1:
        raise DataError(f"{name} must be one-dimensional")
    if arr.size == 0:
        raise DataError(f"{name} is empty")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    return arr


def dtw_distance(a, b, *, band: int | None = None, squared: bool = False) -> float:
    """Cost of the cheapest monotone alignment of ``a`` and ``b``.

    Local cost is ``|a_i - b_j|`` (``(a_i - b_j)**2`` with ``squared``),
    steps are (1,0), (0,1), (1,1) and the path is anchored at both ends.
    ``band`` optionally restricts ``|j - i*m/n|`` (a Sakoe-Chiba style window).
    """
    a = _as_sequence(a, "a")
    b = _as_sequence(b, "b")
    if band is not None and band < 0:
        raise ValueError("band must be non-negative")
    dist = float(_dtw_kernel(a, b, -1 if band is None else int(band), squared))
    if not np.isfinite(dist):
        raise ValueError(f"band={band} admits no warping path for lengths {a.size}, {b.size}")
    return dist


def dtw_matrix(d: Dataset, *, band: int | None = None, squared: bool = False) -> np.ndarray:
    """Symmetric matrix of DTW distances between every pair of series in ``d``."""
    if len(d) < 2:
        raise DataError("need at least two series for a distance matrix")
    vals = [np.ascontiguousarray(v) for v in d.values]
    n = len(vals)
    m = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            m[i, j] = m[j, i] = dtw_distance(vals[i], vals[j], band=band, squared=squared)
    check_matrix(m)
    return m


def check_matrix(m: np.ndarray) -> None:
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DataError("distance matrix must be square")
    if not np.all(np.isfinite(m)) or np.any(m < 0):
        raise DataError("distance matrix has negative or non-finite entries")
    if np.any(np.diag(m) != 0) or not np.array_equal(m, m.T):
        raise DataError("distance matrix must be symmetric with a zero diagonal")


def save_matrix(m: np.ndarray, path: str | Path, dataset_hash: str, options: dict) -> None:
    path = Path(path)
    np.save(path, m, allow_pickle=False)
    sidecar = {"dataset_hash": dataset_hash, "options": options, "n": int(m.shape[0])}
    path.with_suffix(".json").write_text(json.dumps(sidecar, indent=2, sort_keys=True) + "\n")


def load_cached_matrix(path: str | Path, dataset_hash: str, options: dict) -> np.ndarray | None:
    """Return the cached matrix if it was built from the same data and options, else None."""
    path = Path(path)
    side = path.with_suffix(".json")
    if not path.exists() or not side.exists():
        return None
    meta = json.loads(side.read_text())
    if meta.get("dataset_hash") != dataset_hash or meta.get("options") != options:
        log.info("DTW cache at %s is stale; recomputing", path)
        return None
    m = np.load(path, allow_pickle=False)
    check_matrix(m)
    return m


def cached_dtw_matrix(
    d: Dataset, path: str | Path, *, band: int | None = None, squared: bool = False
) -> tuple[np.ndarray, bool]:
    """Load the matrix from ``path`` when valid, otherwise compute and store it.

    Returns ``(matrix, cache_hit)``.
    """
    options = {"band": band, "squared": squared}
    h = d.content_hash()
    m = load_cached_matrix(path, h, options)
    if m is not None:
        log.info("DTW matrix cache hit: %s", path)
        return m, True
    m = dtw_matrix(d, band=band, squared=squared)
    save_matrix(m, path, h, options)
    return m, False
