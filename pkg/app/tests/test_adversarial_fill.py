"""
Unit Tests for the Adversarial Fill Strategies

Tests cover:
- Mass conservation of every strategy
- Variance-worst split against a brute-force scan
- Water-filling level and its dominance over every other completion
- Naive renormalization and its warning
- Contract violations
"""
import itertools
import logging

import numpy as np
import pytest

from app.exceptions import ContractError, DegenerateInputError
from app.schemas.binning_schema import CollectiveDistribution, CollectiveMode, FillKind, FillStrategy
from app.services.adversarial_fill import (
    apply_strategy,
    fill_entropy_worst,
    fill_variance_worst,
    renormalize,
    variance_split,
    water_level,
)
from app.services.binning_service import extend_grid, make_grid
from app.services.criteria_service import renyi_entropy_of_probs, variance_of

ORDERS = [0.55, 0.75, 1.0, 1.5, 2.0, 5.0, 50.0]


def _completions(probs, mass, steps):
    """Every way to add `mass` to `probs` in multiples of mass / steps."""
    k = len(probs)
    for bars in itertools.combinations(range(steps + k - 1), k - 1):
        parts = np.diff([-1, *bars, steps + k - 1]) - 1
        yield probs + mass * parts / steps


@pytest.mark.unit
class TestMassConservation:
    """Test that every fill produces a normalized distribution."""

    @pytest.mark.parametrize("fill", [fill_variance_worst, fill_entropy_worst])
    def test_fill_sums_to_one(self, make_collective, fill):
        dist = make_collective([0.05, 0.3, 0.12, 0.0, 0.2])
        filled = fill(dist)
        assert abs(filled.total_mass - 1.0) <= 1e-12
        assert filled.missed_mass == 0.0
        assert filled.filled_mass == pytest.approx(dist.missed_mass, abs=1e-15)

    @pytest.mark.parametrize("fill", [fill_variance_worst, fill_entropy_worst])
    def test_fill_of_complete_distribution_is_identity(self, make_collective, fill):
        dist = make_collective([0.25, 0.5, 0.25])
        filled = fill(dist)
        np.testing.assert_array_equal(filled.probs, dist.probs)
        assert filled.filled_mass == 0.0

    def test_fill_never_removes_mass(self, make_collective, rng):
        probs = rng.dirichlet(np.ones(9)) * 0.6
        dist = make_collective(probs)
        for fill in (fill_variance_worst, fill_entropy_worst):
            assert np.all(fill(dist).probs >= dist.probs)


@pytest.mark.unit
class TestVarianceWorst:
    """Test the variance-maximizing split."""

    def test_symmetric_split(self, make_collective):
        dist = make_collective(0.9 * np.array([0.1, 0.2, 0.4, 0.2, 0.1]))
        assert variance_split(dist) == pytest.approx(0.5, abs=1e-12)

    def test_split_is_clamped(self, make_collective):
        dist = make_collective([0.0, 0.0, 0.0, 0.0, 0.9])
        assert variance_split(dist) == 1.0
        filled = fill_variance_worst(dist)
        assert filled.probs[0] == pytest.approx(0.1)
        assert filled.probs[-1] == pytest.approx(0.9)

    def test_split_beats_brute_force(self, make_collective, rng):
        for _ in range(20):
            probs = rng.dirichlet(np.ones(7)) * rng.uniform(0.3, 0.95)
            dist = make_collective(probs)
            mass = dist.missed_mass
            best = variance_of(fill_variance_worst(dist))
            for f in np.linspace(0.0, 1.0, 1001):
                trial = np.array(probs)
                trial[0] += f * mass
                trial[-1] += (1.0 - f) * mass
                mean = trial @ dist.values
                assert best >= trial @ (dist.values - mean) ** 2 - 1e-12

    def test_extremes_beat_interior_placement(self, make_collective):
        dist = make_collective([0.1, 0.2, 0.3, 0.1, 0.1])
        best = variance_of(fill_variance_worst(dist))
        for k in range(dist.support_size):
            trial = np.array(dist.probs)
            trial[k] += dist.missed_mass
            mean = trial @ dist.values
            assert best >= trial @ (dist.values - mean) ** 2 - 1e-12


@pytest.mark.unit
class TestFillComparison:
    """Test the two honest fills against each other."""

    def test_variance_fill_has_larger_variance(self, make_collective, rng):
        for _ in range(50):
            size = int(rng.integers(2, 16))
            probs = rng.dirichlet(np.ones(size)) * rng.uniform(0.05, 0.99)
            dist = make_collective(probs, width=rng.uniform(0.1, 2.0))
            assert variance_of(fill_variance_worst(dist)) >= variance_of(fill_entropy_worst(dist)) - 1e-12


@pytest.mark.unit
class TestEntropyWorst:
    """Test water-filling."""

    def test_water_level_exact(self):
        probs = np.array([0.1, 0.3, 0.0, 0.2])
        level = water_level(probs, 0.2)
        assert level == pytest.approx(0.15, abs=1e-15)
        assert np.maximum(level - probs, 0.0).sum() == pytest.approx(0.2, abs=1e-15)

    def test_water_level_covers_everything(self):
        assert water_level(np.array([0.1, 0.2]), 0.7) == pytest.approx(0.5)

    def test_water_level_without_mass(self):
        assert water_level(np.array([0.3, 0.1, 0.2]), 0.0) == pytest.approx(0.1)

    def test_enough_mass_gives_uniform(self, make_collective):
        filled = fill_entropy_worst(make_collective([0.1, 0.2, 0.3]))
        np.testing.assert_allclose(filled.probs, np.full(3, 1.0 / 3.0), atol=1e-15)

    @pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
    def test_water_fill_dominates_every_completion(self, make_collective, rng, k):
        probs = rng.dirichlet(np.ones(k)) * rng.uniform(0.4, 0.9)
        dist = make_collective(probs)
        filled = fill_entropy_worst(dist)
        steps = 12 if k <= 4 else 6
        for alpha in ORDERS:
            best = renyi_entropy_of_probs(filled.probs, alpha)
            for trial in _completions(probs, dist.missed_mass, steps):
                assert best >= renyi_entropy_of_probs(trial, alpha) - 1e-12


@pytest.mark.unit
class TestNaiveRenormalization:
    """Test the naive baseline."""

    def test_renormalize_rescales(self, make_collective):
        dist = renormalize(make_collective([0.1, 0.3]))
        np.testing.assert_allclose(dist.probs, [0.25, 0.75])
        assert dist.renormalized
        assert dist.filled_mass == 0.0

    def test_nothing_detected_raises(self, make_collective):
        with pytest.raises(DegenerateInputError):
            renormalize(make_collective([0.0, 0.0, 0.0]))

    def test_naive_strategy_warns(self, make_collective, caplog):
        with caplog.at_level(logging.WARNING):
            apply_strategy(make_collective([0.2, 0.2]), FillStrategy(kind=FillKind.none_naive_renormalize))
        assert "Naive renormalization" in caplog.text
        assert not FillStrategy(kind=FillKind.none_naive_renormalize).is_honest


@pytest.mark.unit
class TestStrategyDispatch:
    """Test support extension inside apply_strategy."""

    def test_honest_fill_extends_support(self, make_collective):
        grid = make_grid(-1.0, 1.0, 2)
        ext = extend_grid(grid, -3.0, 3.0)
        dist = make_collective([0.2, 0.3, 0.1])
        filled = apply_strategy(dist, FillStrategy(kind=FillKind.variance_worst), ext, ext)
        assert filled.support_size == 11
        assert filled.values[0] == pytest.approx(-5.0)
        assert filled.probs[0] + filled.probs[-1] == pytest.approx(0.4)
        assert filled.total_mass == pytest.approx(1.0, abs=1e-12)

    def test_clip_to_detector_keeps_support(self, make_collective):
        grid = make_grid(-1.0, 1.0, 2)
        ext = extend_grid(grid, -3.0, 3.0)
        dist = make_collective([0.2, 0.3, 0.1])
        filled = apply_strategy(dist, FillStrategy(kind=FillKind.entropy_worst, clip_to_detector=True), ext, ext)
        assert filled.support_size == 3


@pytest.mark.unit
class TestContracts:
    """Test rejected inputs."""

    def test_renormalized_input_rejected(self, make_collective):
        with pytest.raises(ContractError):
            fill_entropy_worst(renormalize(make_collective([0.1, 0.3])))

    def test_inconsistent_missed_mass_rejected(self):
        grid = make_grid(-1.0, 1.0, 2)
        dist = CollectiveDistribution(
            values=np.array([-1.0, 0.0, 1.0]),
            probs=np.array([0.2, 0.2, 0.1]),
            detected_mass=0.5,
            missed_mass=0.3,
            bin_width=1.0,
            mode=CollectiveMode.difference,
            grid_a=grid,
            grid_b=grid,
        )
        with pytest.raises(ContractError):
            fill_variance_worst(dist)

    def test_missed_mass_out_of_range_rejected(self):
        grid = make_grid(-1.0, 1.0, 2)
        dist = CollectiveDistribution(
            values=np.array([-1.0, 0.0, 1.0]),
            probs=np.array([0.2, 0.2, 0.1]),
            detected_mass=0.5,
            missed_mass=1.5,
            bin_width=1.0,
            mode=CollectiveMode.difference,
            grid_a=grid,
            grid_b=grid,
        )
        with pytest.raises(ContractError):
            fill_entropy_worst(dist)
