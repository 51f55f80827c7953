"""
Pytest configuration and fixtures for the entanglement toolkit tests.
"""
import math

import numpy as np
import pytest

from app.schemas.binning_schema import CollectiveDistribution, CollectiveMode
from app.services.binning_service import make_grid
from app.services.gaussian_states import (
    make_mixed_xp_example,
    make_pure_product_gaussian,
    make_smoothed_epr,
)


@pytest.fixture(scope="session")
def vacuum_state():
    """Two-mode vacuum: pure product with unit-free variance 1/2 per quadrature."""
    return make_pure_product_gaussian(math.sqrt(0.5), math.sqrt(0.5))


@pytest.fixture(scope="session")
def mixed_state():
    """50/50 mixture of x-sharp and p-sharp products, calibrated broad width."""
    return make_mixed_xp_example()


@pytest.fixture(scope="session")
def epr_state():
    """Smoothed EPR state with nbar = 1."""
    return make_smoothed_epr(1.0)


@pytest.fixture
def detector_grid():
    """32 bins over the [-2, 2] detector range."""
    return make_grid(-2.0, 2.0, 32)


@pytest.fixture
def make_collective():
    """
    Factory for collective distributions on a unit-spaced lattice.

    The probabilities are taken as the detected part; whatever they lack
    from 1 is recorded as missed mass.
    """
    def _make(probs, width=1.0, mode=CollectiveMode.difference):
        probs = np.asarray(probs, dtype=float)
        detected = float(probs.sum())
        grid = make_grid(-1.0, 1.0, 2)
        return CollectiveDistribution(
            values=width * (np.arange(probs.size) - (probs.size - 1) / 2.0),
            probs=probs,
            detected_mass=detected,
            missed_mass=1.0 - detected,
            bin_width=width,
            mode=mode,
            grid_a=grid,
            grid_b=grid,
        )
    return _make


@pytest.fixture
def rng():
    """Seeded generator for randomized property checks."""
    return np.random.default_rng(20240611)
