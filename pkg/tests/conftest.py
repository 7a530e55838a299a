"""Shared fixtures and independent oracles for the test suite."""

from __future__ import annotations

import itertools

import numpy as np
import pytest

from robust_ot.measure import DiscreteMeasure, GroundMetric


def brute_force_permutations(cost: np.ndarray) -> float:
    """Minimum assignment cost over all permutations (uniform mass 1/n)."""
    n = cost.shape[0]
    return min(
        sum(cost[i, p[i]] for i in range(n)) for p in itertools.permutations(range(n))
    ) / n


def random_measure(rng: np.random.Generator, max_atoms=20, dim=1, uniform=False) -> DiscreteMeasure:
    n = int(rng.integers(1, max_atoms + 1))
    atoms = rng.normal(0.0, 3.0, size=(n, dim))
    if uniform:
        weights = np.full(n, 1.0 / n)
    else:
        weights = rng.random(n) + 0.05
        weights = weights / weights.sum()
    return DiscreteMeasure(atoms, weights)


@pytest.fixture
def euclid() -> GroundMetric:
    return GroundMetric("euclidean")


@pytest.fixture
def absdiff() -> GroundMetric:
    return GroundMetric("absolute-difference")
