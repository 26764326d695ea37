"""Agreement between detected clusters and reference labels."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Sequence

import numpy as np

from rogue_sensors.errors import DataError


def _pairs(k: int) -> int:
    return k * (k - 1) // 2


def contingency(a, b) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Contingency table plus the sorted distinct labels of ``a`` and ``b``."""
    a = np.asarray(a)
    b = np.asarray(b)
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    return table, ua, ub


def adjusted_rand_index(a, b) -> float:
    """Hubert-Arabie adjusted Rand index.

    When the chance-corrected denominator vanishes (e.g. both labelings are
    a single cluster, or both all singletons) the result is 1.0 if the two
    partitions are identical and 0.0 otherwise.
    """
    a = np.asarray(a).ravel()
    b = np.asarray(b).ravel()
    if a.size != b.size:
        raise DataError(f"label vectors differ in length ({a.size} vs {b.size})")
    n = a.size
    if n < 2:
        raise DataError("adjusted Rand index needs at least two items")
    table, _, _ = contingency(a, b)
    # integer arithmetic up to a single final division
    index = sum(_pairs(int(v)) for v in table.ravel())
    sum_a = sum(_pairs(int(v)) for v in table.sum(axis=1))
    sum_b = sum(_pairs(int(v)) for v in table.sum(axis=0))
    total = _pairs(n)
    num = 2 * (index * total - sum_a * sum_b)
    den = (sum_a + sum_b) * total - 2 * sum_a * sum_b
    if den == 0:
        same = table.shape[0] == table.shape[1] == np.count_nonzero(table)
        return 1.0 if same else 0.0
    return num / den


def build_report(
    sensor_ids: Sequence[str], truth: Sequence, predicted: Sequence[int], extra: dict | None = None
) -> dict:
    """ARI, contingency table and the sensors making up each detected cluster."""
    ari = adjusted_rand_index(truth, predicted)
    table, ut, up = contingency(truth, predicted)
    composition = {}
    for c in up:
        members = [i for i, p in enumerate(predicted) if p == c]
        counts: dict[str, int] = {}
        for i in members:
            counts[str(truth[i])] = counts.get(str(truth[i]), 0) + 1
        composition[str(int(c))] = {
            "size": len(members),
            "truth_counts": dict(sorted(counts.items())),
            "sensors": [sensor_ids[i] for i in members],
        }
    report = {
        "ari": ari,
        "contingency": {
            "rows_truth": [str(t) for t in ut],
            "cols_cluster": [int(c) for c in up],
            "counts": table.tolist(),
        },
        "clusters": composition,
    }
    if extra:
        report.update(extra)
    return report


def write_report(report: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n", encoding="utf-8")
