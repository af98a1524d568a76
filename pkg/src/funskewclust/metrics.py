"""Clustering agreement metrics."""

from __future__ import annotations

import numpy as np

__all__ = ["ari", "confusion"]


def confusion(a, b) -> np.ndarray:
    """Contingency table of two labelings; rows follow sorted labels of a."""
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("labelings must be 1-d arrays of equal length")
    ua, ia = np.unique(a, return_inverse=True)
    ub, ib = np.unique(b, return_inverse=True)
    table = np.zeros((ua.size, ub.size), dtype=int)
    np.add.at(table, (ia, ib), 1)
    return table


def ari(a, b) -> float:
    """Adjusted Rand index of two labelings of the same items.

    Chance-corrected pair-counting agreement: 1 for identical partitions,
    expectation 0 under random labelings.  When both partitions are constant
    the correction denominator vanishes; that case returns 1 if the partitions
    agree trivially (both constant) and 0 if only one of them is constant.
    """
    table = confusion(a, b)
    n = table.sum()
    if n < 1:
        raise ValueError("labelings must be nonempty")

    def comb2(x):
        return x * (x - 1) / 2.0

    sum_cells = comb2(table).sum()
    sum_rows = comb2(table.sum(axis=1)).sum()
    sum_cols = comb2(table.sum(axis=0)).sum()
    total = comb2(n)
    expected = sum_rows * sum_cols / total if total > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    denom = max_index - expected
    if denom == 0.0:
        both_constant = table.shape == (1, 1)
        one_constant = table.shape[0] == 1 or table.shape[1] == 1
        return 1.0 if both_constant or not one_constant else 0.0
    return float((sum_cells - expected) / denom)
