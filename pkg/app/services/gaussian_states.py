"""
Gaussian state families used for entanglement verification.

States are Wigner covariance matrices over (x_a, p_a, x_b, p_b) with
[x, p] = i, so the vacuum has covariance diag(1/2, 1/2, 1/2, 1/2) and the
position/momentum detection statistics are exactly the Gaussian marginals.
"""
import logging
import math
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import multivariate_normal

from app.exceptions import DomainError
from app.schemas.run_schema import StateKind, StateSpec
from app.schemas.state_schema import (
    Basis,
    GaussianComponent,
    GaussianMixtureState,
    MarginalComponent,
)
from app.utils.numerics import Interval, bvn_rect_prob, find_root, gauss_interval_prob, normal_mass

logger = logging.getLogger(__name__)

# Detector range every example in the analysis uses, and the joint x-basis
# detection probability quoted for the broad separable state on it.
DEFAULT_DETECTOR = Interval(lo=-2.0, hi=2.0)
BROAD_STATE_DETECTION = 0.086

_BASIS_INDICES = {Basis.X: [0, 2], Basis.P: [1, 3]}


def _require_positive(name: str, value: float) -> None:
    if not (value > 0.0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value}")


def _pure_product_component(weight: float, sigma_x_a: float, sigma_x_b: float, mean=None) -> GaussianComponent:
    cov = np.diag([
        sigma_x_a ** 2,
        1.0 / (4.0 * sigma_x_a ** 2),
        sigma_x_b ** 2,
        1.0 / (4.0 * sigma_x_b ** 2),
    ])
    return GaussianComponent(
        weight=weight,
        mean=np.zeros(4) if mean is None else mean,
        cov=cov,
    )


def make_pure_product_gaussian(
    sigma_x_a: float,
    sigma_x_b: float,
    mean: Optional[Sequence[float]] = None,
) -> GaussianMixtureState:
    """
    Pure separable product of two minimum-uncertainty Gaussians.

    Purity fixes sigma_p = 1 / (2 sigma_x) for each party. An optional mean
    4-vector displaces the state (used for asymmetric test cases).
    """
    _require_positive("sigma_x_a", sigma_x_a)
    _require_positive("sigma_x_b", sigma_x_b)
    return GaussianMixtureState(components=[_pure_product_component(1.0, sigma_x_a, sigma_x_b, mean)])


def calibrate_sigma_broad(
    target: float = BROAD_STATE_DETECTION,
    detector: Interval = DEFAULT_DETECTOR,
) -> float:
    """
    Width of the broad pure product state whose joint detection probability
    on detector x detector equals target.
    """
    if not 0.0 < target < 1.0:
        raise DomainError(f"target detection probability must lie in (0, 1), got {target}")

    def excess(sigma: float) -> float:
        return gauss_interval_prob(0.0, sigma, detector) ** 2 - target

    sigma = find_root(excess, Interval(lo=1e-3, hi=1e3), tol=1e-12)
    logger.debug(f"Calibrated sigma_broad={sigma:.12g} for detection target {target}")
    return sigma


def make_mixed_xp_example(sigma_broad: Optional[float] = None) -> GaussianMixtureState:
    """
    50/50 mixture of a state sharp in x (broad in p) and one broad in x
    (sharp in p). Both components are zero-mean pure products; sigma_broad
    defaults to the calibrated width.
    """
    if sigma_broad is None:
        sigma_broad = calibrate_sigma_broad()
    _require_positive("sigma_broad", sigma_broad)
    sigma_narrow = 1.0 / (2.0 * sigma_broad)
    return GaussianMixtureState(components=[
        _pure_product_component(0.5, sigma_narrow, sigma_narrow),
        _pure_product_component(0.5, sigma_broad, sigma_broad),
    ])


def make_smoothed_epr(nbar: float) -> GaussianMixtureState:
    """
    Smoothed EPR state: separable vacuum at nbar = 0, the ideal EPR state as
    nbar grows. x_a, x_b are positively and p_a, p_b negatively correlated.
    """
    if not (nbar >= 0.0 and math.isfinite(nbar)):
        raise DomainError(f"nbar must be a non-negative finite number, got {nbar}")
    var = nbar + 0.5
    corr = math.sqrt(nbar * (nbar + 1.0))
    cov = np.array([
        [var, 0.0, corr, 0.0],
        [0.0, var, 0.0, -corr],
        [corr, 0.0, var, 0.0],
        [0.0, -corr, 0.0, var],
    ])
    return GaussianMixtureState(components=[GaussianComponent(weight=1.0, mean=np.zeros(4), cov=cov)])


def marginal(state: GaussianMixtureState, basis: Basis) -> List[MarginalComponent]:
    """Per-component (x_a, x_b) or (p_a, p_b) sub-means and sub-covariances."""
    idx = _BASIS_INDICES[Basis(basis)]
    return [
        MarginalComponent(
            weight=c.weight,
            mean=c.mean[idx],
            cov=c.cov[np.ix_(idx, idx)],
        )
        for c in state.components
    ]


def analytic_collective_variances(state: GaussianMixtureState) -> Tuple[float, float]:
    """
    Unbinned Var(x_a - x_b) and Var(p_a + p_b); mixtures combine through the
    law of total variance.
    """
    directions = (np.array([1.0, 0.0, -1.0, 0.0]), np.array([0.0, 1.0, 0.0, 1.0]))
    variances = []
    for d in directions:
        means = np.array([d @ c.mean for c in state.components])
        second = np.array([d @ c.cov @ d for c in state.components]) + means ** 2
        weights = np.array([c.weight for c in state.components])
        variances.append(float(weights @ second - (weights @ means) ** 2))
    return variances[0], variances[1]


def cutoff_tail_mass(state: GaussianMixtureState, basis: Basis, cutoff_lo: float, cutoff_hi: float) -> float:
    """
    Probability that at least one party's value falls outside
    [cutoff_lo, cutoff_hi]; a cutoff is only meaningful when this is tiny.

    Computed as P(a out) + P(b out) - P(both out) so that masses far below
    machine epsilon keep their magnitude.
    """
    window = Interval(lo=cutoff_lo, hi=cutoff_hi)
    total = 0.0
    for comp in marginal(state, basis):
        sig_a, sig_b = math.sqrt(comp.cov[0, 0]), math.sqrt(comp.cov[1, 1])
        out_a = float(normal_mass(-np.inf, (window.lo - comp.mean[0]) / sig_a)
                      + normal_mass((window.hi - comp.mean[0]) / sig_a, np.inf))
        out_b = float(normal_mass(-np.inf, (window.lo - comp.mean[1]) / sig_b)
                      + normal_mass((window.hi - comp.mean[1]) / sig_b, np.inf))
        below = Interval(lo=-np.inf, hi=window.lo)
        above = Interval(lo=window.hi, hi=np.inf)
        both_out = sum(
            bvn_rect_prob(comp.mean, comp.cov, (ia, ib))
            for ia in (below, above)
            for ib in (below, above)
        )
        both_out = min(both_out, out_a, out_b)
        total += comp.weight * (out_a + out_b - both_out)
    return max(total, 0.0)


def marginal_density(state: GaussianMixtureState, basis: Basis, xs: Sequence[float], ys: Sequence[float]) -> np.ndarray:
    """Joint probability density of the basis marginal on the grid xs x ys (rows follow xs)."""
    xx, yy = np.meshgrid(np.asarray(xs, dtype=float), np.asarray(ys, dtype=float), indexing="ij")
    points = np.column_stack([xx.ravel(), yy.ravel()])
    density = np.zeros(xx.size)
    for comp in marginal(state, basis):
        density += comp.weight * np.atleast_1d(multivariate_normal(mean=comp.mean, cov=comp.cov).pdf(points))
    return density.reshape(xx.shape)


def build_state(spec: StateSpec) -> GaussianMixtureState:
    """State described by a run configuration."""
    if spec.kind == StateKind.pure_product:
        state = make_pure_product_gaussian(spec.sigma_x_a, spec.sigma_x_b)
    elif spec.kind == StateKind.mixed_xp:
        state = make_mixed_xp_example(spec.sigma_broad)
    else:
        state = make_smoothed_epr(spec.nbar)
    logger.info(f"Built {spec.kind.value} state with {len(state.components)} component(s)")
    return state
