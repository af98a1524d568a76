"""Adjusted Rand index and contingency tables."""

import numpy as np
import pytest

from funskewclust.metrics import ari, confusion


def test_confusion_counts():
    a = [0, 0, 1, 1, 2]
    b = ["x", "y", "x", "x", "y"]
    table = confusion(a, b)
    np.testing.assert_array_equal(table, [[1, 1], [2, 0], [0, 1]])
    with pytest.raises(ValueError):
        confusion([0, 1], [0, 1, 2])
    with pytest.raises(ValueError):
        confusion(np.zeros((2, 2)), np.zeros((2, 2)))


def test_ari_identical_partitions():
    assert ari([1, 1, 2, 2, 3], [1, 1, 2, 2, 3]) == 1.0
    # Identity must survive label renaming.
    assert ari([1, 1, 2, 2, 3], ["b", "b", "c", "c", "a"]) == 1.0


def test_ari_checkerboard_example():
    assert ari([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(-0.5)


def test_ari_symmetric():
    rng = np.random.default_rng(0)
    a = rng.integers(0, 3, size=40)
    b = rng.integers(0, 4, size=40)
    assert ari(a, b) == pytest.approx(ari(b, a), abs=1e-15)


def test_ari_chance_level_monte_carlo():
    rng = np.random.default_rng(1)
    vals = []
    for _ in range(2000):
        a = rng.integers(0, 3, size=50)
        b = rng.integers(0, 3, size=50)
        vals.append(ari(a, b))
    assert abs(np.mean(vals)) <= 0.02


def test_ari_degenerate_cases():
    # Both partitions constant: trivially identical.
    assert ari([1, 1, 1], [7, 7, 7]) == 1.0
    # One constant, one not: no agreement beyond chance.
    assert ari([1, 1, 1, 1], [1, 2, 1, 2]) == 0.0
    with pytest.raises(ValueError):
        ari([], [])
