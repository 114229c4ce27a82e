"""Numpy implementations of the group-by reduction kernels.

Used when the compiled extension is unavailable (or forced via STARCUBE_PURE=1).
Grouping keys are pre-packed int64 codes; reductions are exact int64 arithmetic
via stable sort + add.reduceat, never float accumulation.
"""

from __future__ import annotations

import numpy as np


def sum_by_key(keys: np.ndarray, values: np.ndarray, key_bound: int):
    """Aggregate ``values`` by ``keys``: (unique keys, per-key sums, per-key counts).

    Unique keys come back ascending. ``key_bound`` (exclusive upper bound on key
    values) is a density hint; this path ignores it.
    """
    if keys.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(sorted_keys)) + 1))
    uniq = sorted_keys[starts]
    sums = np.add.reduceat(values[order], starts)
    counts = np.diff(np.concatenate((starts, [sorted_keys.size])))
    return uniq, np.asarray(sums, dtype=np.int64), counts.astype(np.int64)


def sum2_by_key(keys: np.ndarray, values_a: np.ndarray, values_b: np.ndarray, key_bound: int):
    """Aggregate two value columns by the same keys (re-aggregation of cells)."""
    if keys.size == 0:
        empty = np.empty(0, dtype=np.int64)
        return empty, empty.copy(), empty.copy()
    order = np.argsort(keys, kind="stable")
    sorted_keys = keys[order]
    starts = np.concatenate(([0], np.flatnonzero(np.diff(sorted_keys)) + 1))
    uniq = sorted_keys[starts]
    sums_a = np.add.reduceat(values_a[order], starts)
    sums_b = np.add.reduceat(values_b[order], starts)
    return uniq, np.asarray(sums_a, dtype=np.int64), np.asarray(sums_b, dtype=np.int64)
