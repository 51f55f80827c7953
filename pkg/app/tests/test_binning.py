"""
Unit Tests for Binning and Collective Distributions

Tests cover:
- Detector grids and their extension to cutoffs
- Binned joints and their marginals
- Difference and sum distributions by lattice index
- Support extension and added-bin counts
- Product-state statistics against 1-D marginals and binned moments against quadrature
"""
import math

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import dblquad

from app.exceptions import GridError
from app.schemas.binning_schema import BinnedJoint, CollectiveMode, ExtendedGrid
from app.schemas.state_schema import Basis
from app.services.binning_service import (
    added_bins,
    bin_joint,
    collective_dist,
    extend_grid,
    extend_support,
    make_grid,
    marginal_binned,
)
from app.services.criteria_service import variance_of
from app.services.gaussian_states import make_pure_product_gaussian, make_smoothed_epr, marginal
from app.utils.numerics import Interval, gauss_interval_prob

EPR_VARIANCE = 3.0 - 2.0 * math.sqrt(2.0)


def _joint(probs):
    probs = np.asarray(probs, dtype=float)
    return BinnedJoint(probs=probs, detected_mass=probs.sum(), missed_mass=1.0 - probs.sum())


def _party_probs(mean, sigma, grid):
    return np.array([
        gauss_interval_prob(mean, sigma, Interval(lo=lo, hi=hi)) for lo, hi in zip(grid.edges[:-1], grid.edges[1:])
    ])


def _bin_mass_by_quadrature(cov, lo_a, hi_a, lo_b, hi_b):
    inv = np.linalg.inv(cov)
    scale = 1.0 / (2.0 * math.pi * math.sqrt(np.linalg.det(cov)))

    def density(y, x):
        return scale * math.exp(-0.5 * (inv[0, 0] * x * x + 2.0 * inv[0, 1] * x * y + inv[1, 1] * y * y))

    mass, _ = dblquad(density, lo_a, hi_a, lo_b, hi_b, epsabs=1e-13, epsrel=1e-11)
    return mass


@pytest.mark.unit
class TestGrids:
    """Test detector grids and extensions."""

    def test_grid_geometry(self, detector_grid):
        assert detector_grid.width == pytest.approx(0.125)
        assert detector_grid.edges[0] == -2.0
        assert detector_grid.edges[-1] == pytest.approx(2.0)
        assert detector_grid.centers[0] == pytest.approx(-1.9375)

    def test_invalid_grid_raises(self):
        with pytest.raises(GridError):
            make_grid(2.0, -2.0, 4)
        with pytest.raises(GridError):
            make_grid(-2.0, 2.0, 0)

    @pytest.mark.parametrize("cutoff, extra", [(10.0, 64), (50.0, 384), (2.0, 0)])
    def test_extension_counts(self, detector_grid, cutoff, extra):
        ext = extend_grid(detector_grid, -cutoff, cutoff)
        assert ext.extra_lo == extra
        assert ext.extra_hi == extra
        grid = ext.as_grid()
        assert grid.width == pytest.approx(detector_grid.width)
        assert grid.lo == pytest.approx(-cutoff)

    def test_extension_rounds_outward(self):
        ext = extend_grid(make_grid(-2.0, 2.0, 4), -3.5, 2.2)
        assert (ext.extra_lo, ext.extra_hi) == (2, 1)

    def test_cutoff_inside_detector_raises(self, detector_grid):
        with pytest.raises(GridError):
            extend_grid(detector_grid, -1.0, 10.0)

    def test_extension_must_reach_cutoff(self, detector_grid):
        with pytest.raises(ValidationError):
            ExtendedGrid(base=detector_grid, cutoff_lo=-10.0, cutoff_hi=10.0, extra_lo=10, extra_hi=64)


@pytest.mark.unit
class TestBinnedJoint:
    """Test binned joints."""

    def test_mass_accounting(self, epr_state, detector_grid):
        joint = bin_joint(marginal(epr_state, Basis.X), detector_grid, detector_grid)
        assert joint.probs.shape == (32, 32)
        assert joint.probs.sum() == pytest.approx(joint.detected_mass, abs=1e-12)
        assert joint.detected_mass + joint.missed_mass == pytest.approx(1.0, abs=1e-12)

    def test_marginals(self):
        joint = _joint([[0.1, 0.2], [0.3, 0.3]])
        np.testing.assert_allclose(marginal_binned(joint, 0), [0.3, 0.6])
        np.testing.assert_allclose(marginal_binned(joint, 1), [0.4, 0.5])
        with pytest.raises(GridError):
            marginal_binned(joint, 2)

    def test_inconsistent_mass_rejected(self):
        with pytest.raises(ValidationError):
            BinnedJoint(probs=np.full((2, 2), 0.25), detected_mass=0.9, missed_mass=0.1)


@pytest.mark.unit
class TestProductStates:
    """Test binned statistics of separable product states against 1-D marginals."""

    MEAN = [0.3, 0.0, -0.2, 0.0]

    def _product(self):
        return make_pure_product_gaussian(0.5, 1.0, mean=self.MEAN)

    def test_marginals_match_interval_probabilities(self, detector_grid):
        joint = bin_joint(marginal(self._product(), Basis.X), detector_grid, detector_grid)
        p_a = _party_probs(0.3, 0.5, detector_grid)
        p_b = _party_probs(-0.2, 1.0, detector_grid)
        np.testing.assert_allclose(marginal_binned(joint, 0), p_a * p_b.sum(), rtol=0, atol=1e-9)
        np.testing.assert_allclose(marginal_binned(joint, 1), p_b * p_a.sum(), rtol=0, atol=1e-9)

    def test_difference_is_cross_correlation(self, detector_grid):
        joint = bin_joint(marginal(self._product(), Basis.X), detector_grid, detector_grid)
        dist = collective_dist(joint, CollectiveMode.difference, detector_grid, detector_grid)
        p_a = _party_probs(0.3, 0.5, detector_grid)
        p_b = _party_probs(-0.2, 1.0, detector_grid)
        np.testing.assert_allclose(dist.probs, np.correlate(p_a, p_b, mode="full"), rtol=0, atol=1e-12)
        np.testing.assert_allclose(dist.probs, np.convolve(p_a, p_b[::-1]), rtol=0, atol=1e-12)

    def test_sum_is_convolution(self, detector_grid):
        joint = bin_joint(marginal(self._product(), Basis.X), detector_grid, detector_grid)
        dist = collective_dist(joint, CollectiveMode.sum, detector_grid, detector_grid)
        p_a = _party_probs(0.3, 0.5, detector_grid)
        p_b = _party_probs(-0.2, 1.0, detector_grid)
        np.testing.assert_allclose(dist.probs, np.convolve(p_a, p_b), rtol=0, atol=1e-12)


@pytest.mark.unit
class TestBinnedMoments:
    """Test binned EPR statistics against direct integration."""

    def test_wide_detector_sees_everything(self, epr_state):
        grid = make_grid(-50.0, 50.0, 32)
        joint = bin_joint(marginal(epr_state, Basis.X), grid, grid)
        assert joint.detected_mass == pytest.approx(1.0, abs=1e-9)

    @pytest.mark.slow
    def test_binned_variance_matches_quadrature(self):
        grid = make_grid(-10.0, 10.0, 8)
        comp = marginal(make_smoothed_epr(1.0), Basis.X)[0]
        dist = collective_dist(bin_joint([comp], grid, grid), CollectiveMode.difference, grid, grid)

        edges, centers = grid.edges, grid.centers
        probs = np.array([
            [_bin_mass_by_quadrature(comp.cov, edges[i], edges[i + 1], edges[j], edges[j + 1]) for j in range(8)]
            for i in range(8)
        ])
        diffs = centers[:, None] - centers[None, :]
        mean = float((probs * diffs).sum())
        expected = float((probs * diffs ** 2).sum()) - mean ** 2
        assert variance_of(dist) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.slow
    def test_binned_variance_converges(self):
        state = make_smoothed_epr(1.0)
        errors = []
        for bins in (64, 128, 256):
            grid = make_grid(-10.0, 10.0, bins)
            joint = bin_joint(marginal(state, Basis.X), grid, grid)
            error = variance_of(collective_dist(joint, CollectiveMode.difference, grid, grid)) - EPR_VARIANCE
            assert abs(error) < grid.width ** 2 / 3.0
            errors.append(abs(error))
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 2e-3


@pytest.mark.unit
class TestCollectiveDistribution:
    """Test difference and sum distributions."""

    def test_difference_by_index(self):
        grid = make_grid(-1.0, 1.0, 2)
        dist = collective_dist(_joint([[0.1, 0.2], [0.3, 0.4]]), CollectiveMode.difference, grid, grid)
        np.testing.assert_allclose(dist.values, [-1.0, 0.0, 1.0])
        np.testing.assert_allclose(dist.probs, [0.2, 0.5, 0.3])

    def test_sum_by_index(self):
        grid = make_grid(-1.0, 1.0, 2)
        dist = collective_dist(_joint([[0.1, 0.2], [0.3, 0.4]]), CollectiveMode.sum, grid, grid)
        np.testing.assert_allclose(dist.values, [-1.0, 0.0, 1.0])
        np.testing.assert_allclose(dist.probs, [0.1, 0.5, 0.4])

    @pytest.mark.parametrize("mode", [CollectiveMode.difference, CollectiveMode.sum])
    def test_support_and_mass(self, epr_state, detector_grid, mode):
        basis = Basis.X if mode == CollectiveMode.difference else Basis.P
        joint = bin_joint(marginal(epr_state, basis), detector_grid, detector_grid)
        dist = collective_dist(joint, mode, detector_grid, detector_grid)
        assert dist.support_size == 63
        assert dist.values[0] == pytest.approx(-3.875)
        assert dist.values[-1] == pytest.approx(3.875)
        assert dist.total_mass == pytest.approx(joint.detected_mass, abs=1e-12)
        assert dist.missed_mass == pytest.approx(joint.missed_mass)

    def test_unequal_widths_raise(self):
        with pytest.raises(GridError):
            collective_dist(
                _joint(np.full((2, 4), 0.125)), CollectiveMode.difference, make_grid(-1, 1, 2), make_grid(-1, 1, 4)
            )

    def test_shape_mismatch_raises(self, detector_grid):
        with pytest.raises(GridError):
            collective_dist(_joint(np.full((2, 2), 0.25)), CollectiveMode.sum, detector_grid, detector_grid)


@pytest.mark.unit
class TestSupportExtension:
    """Test extension of collective supports to the cutoffs."""

    @pytest.mark.parametrize("cutoff, added", [(10.0, 256), (50.0, 1536)])
    @pytest.mark.parametrize("mode", [CollectiveMode.difference, CollectiveMode.sum])
    def test_added_bins(self, epr_state, detector_grid, cutoff, added, mode):
        joint = bin_joint(marginal(epr_state, Basis.X), detector_grid, detector_grid)
        dist = collective_dist(joint, mode, detector_grid, detector_grid)
        ext = extend_grid(detector_grid, -cutoff, cutoff)
        wide = extend_support(dist, ext, ext, mode)
        assert added_bins(dist, wide) == added
        assert wide.total_mass == pytest.approx(dist.total_mass, abs=1e-15)

    def test_existing_outcomes_unchanged(self):
        grid = make_grid(-1.0, 1.0, 2)
        dist = collective_dist(_joint([[0.1, 0.2], [0.3, 0.4]]), CollectiveMode.difference, grid, grid)
        ext_a = extend_grid(grid, -3.0, 1.0)
        ext_b = extend_grid(grid, -1.0, 2.0)
        wide = extend_support(dist, ext_a, ext_b, CollectiveMode.difference)
        for value, prob in zip(dist.values, dist.probs):
            idx = int(np.argmin(np.abs(wide.values - value)))
            assert wide.values[idx] == pytest.approx(value)
            assert wide.probs[idx] == pytest.approx(prob)
        assert wide.values[0] == pytest.approx(-4.0)
        assert wide.values[-1] == pytest.approx(1.0)

    def test_extension_is_idempotent(self, detector_grid):
        dist = collective_dist(
            _joint(np.full((32, 32), 1.0 / 1024)), CollectiveMode.sum, detector_grid, detector_grid
        )
        ext = extend_grid(detector_grid, -10.0, 10.0)
        wide = extend_support(dist, ext, ext, CollectiveMode.sum)
        assert extend_support(wide, ext, ext, CollectiveMode.sum) is wide

    def test_mode_mismatch_raises(self, detector_grid):
        dist = collective_dist(
            _joint(np.full((32, 32), 1.0 / 1024)), CollectiveMode.sum, detector_grid, detector_grid
        )
        ext = extend_grid(detector_grid, -10.0, 10.0)
        with pytest.raises(GridError):
            extend_support(dist, ext, ext, CollectiveMode.difference)
