from __future__ import annotations

import numpy as np
import pytest

from imbalforest.dataio import Dataset, SynthSpec, generate_synthetic
from imbalforest.rng import RandomSource


def make_dataset(X, y, names=None) -> Dataset:
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[:, None]
    names = names or tuple(f"x{i}" for i in range(X.shape[1]))
    return Dataset(tuple(names), X, np.asarray(y))


@pytest.fixture
def rng() -> RandomSource:
    return RandomSource(1234)


@pytest.fixture(scope="session")
def imbalanced() -> Dataset:
    """2,000 rows at 2.3% fraud, 6 features, moderately separated."""
    return generate_synthetic(SynthSpec(2000, 0.023, 6, 2.0), RandomSource(99))


@pytest.fixture(scope="session")
def separable() -> Dataset:
    return generate_synthetic(SynthSpec(400, 0.25, 4, 4.0), RandomSource(5))
