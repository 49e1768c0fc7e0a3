from __future__ import annotations

import numpy as np
import pytest

from l1fd.rng import RandomSeed


@pytest.fixture
def seed() -> RandomSeed:
    return RandomSeed(20240601)


@pytest.fixture
def low_dim_points() -> np.ndarray:
    """500 points in R^20 on a random 3-dimensional subspace."""
    rng = np.random.default_rng(7)
    return rng.uniform(0, 8, size=(500, 3)) @ rng.normal(size=(3, 20))
