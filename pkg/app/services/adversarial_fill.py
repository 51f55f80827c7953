"""
Worst-case assignment of missed probability mass.

Counts that fell outside the detector range are handed to an adversary who
places them wherever they hurt the chosen criterion most:

- variance criteria: all missed mass goes to the two extreme outcomes, split
  so that the variance is maximal;
- entropic criteria: missed mass water-fills the emptiest outcomes, which
  maximizes every Renyi entropy at once among completions that only add mass.

Naive renormalization (dropping the missed mass) is kept to reproduce the
false positive it causes; it is never a sound choice.
"""
import logging
from typing import Optional

import numpy as np

from app.exceptions import ContractError, DegenerateInputError, DomainError
from app.schemas.binning_schema import (
    MASS_TOLERANCE,
    CollectiveDistribution,
    ExtendedGrid,
    FillKind,
    FillStrategy,
)
from app.services.binning_service import extend_support

logger = logging.getLogger(__name__)


def _missing_mass(dist: CollectiveDistribution) -> float:
    """Mass still to be assigned: the complement of what the vector already holds."""
    if dist.support_size == 0:
        raise DomainError("cannot fill a distribution with empty support")
    if not -MASS_TOLERANCE <= dist.missed_mass <= 1.0 + MASS_TOLERANCE:
        raise ContractError(f"missed_mass must lie in [0, 1], got {dist.missed_mass}")
    if dist.renormalized:
        raise ContractError("distribution was already renormalized; its missed mass is gone")
    mass = 1.0 - dist.total_mass
    if abs(mass - dist.missed_mass) > MASS_TOLERANCE:
        raise ContractError(
            f"probabilities sum to {dist.total_mass} but missed_mass is {dist.missed_mass}"
        )
    return max(mass, 0.0)


def _filled(dist: CollectiveDistribution, probs: np.ndarray, mass: float) -> CollectiveDistribution:
    return CollectiveDistribution(
        values=dist.values,
        probs=probs,
        detected_mass=dist.detected_mass,
        missed_mass=0.0,
        bin_width=dist.bin_width,
        mode=dist.mode,
        grid_a=dist.grid_a,
        grid_b=dist.grid_b,
        filled_mass=dist.filled_mass + mass,
    )


def variance_split(dist: CollectiveDistribution) -> float:
    """
    Fraction f of the missed mass that goes to the leftmost outcome
    (1 - f goes to the rightmost) so that the variance is maximal.

    Var(f) is a concave quadratic whose stationary point puts the overall
    mean halfway between the extremes; the result is clamped to [0, 1].
    """
    mass = _missing_mass(dist)
    left, right = float(dist.values[0]), float(dist.values[-1])
    if mass == 0.0 or left == right:
        return 0.5
    first_moment = float(dist.probs @ dist.values)
    f = (0.5 * (left + right) - first_moment - mass * right) / (mass * (left - right))
    return float(np.clip(f, 0.0, 1.0))


def fill_variance_worst(dist: CollectiveDistribution) -> CollectiveDistribution:
    """Place the missed mass on the two extreme outcomes, maximizing the variance."""
    mass = _missing_mass(dist)
    probs = np.array(dist.probs, dtype=float)
    if mass == 0.0:
        return _filled(dist, probs, 0.0)

    f = variance_split(dist)
    probs[0] += f * mass
    probs[-1] += (1.0 - f) * mass
    logger.debug(
        f"Variance-worst fill: mass={mass:.6g} split f={f:.6f} onto [{dist.values[0]}, {dist.values[-1]}]"
    )
    return _filled(dist, probs, mass)


def water_level(probs: np.ndarray, mass: float) -> float:
    """
    Level lambda with sum(max(0, lambda - p_k)) == mass.

    Found exactly from the sorted probabilities: the m smallest bins are
    raised to (mass + their sum) / m for the first m at which that level does
    not exceed the next bin.
    """
    probs = np.asarray(probs, dtype=float)
    if probs.size == 0:
        raise DomainError("cannot water-fill an empty vector")
    if mass <= 0.0:
        return float(probs.min())
    ordered = np.sort(probs)
    levels = (mass + np.cumsum(ordered)) / np.arange(1, ordered.size + 1)
    next_bin = np.append(ordered[1:], np.inf)
    m = int(np.argmax(levels <= next_bin))
    return float(levels[m])


def fill_entropy_worst(dist: CollectiveDistribution) -> CollectiveDistribution:
    """Water-fill the missed mass so the distribution is as uniform as possible."""
    mass = _missing_mass(dist)
    probs = np.array(dist.probs, dtype=float)
    if mass == 0.0:
        return _filled(dist, probs, 0.0)

    level = water_level(probs, mass)
    probs = np.maximum(probs, level)
    logger.debug(
        f"Entropy-worst fill: mass={mass:.6g} water level={level:.6g} "
        f"raised {(dist.probs < level).sum()} of {dist.support_size} bins"
    )
    return _filled(dist, probs, mass)


def renormalize(dist: CollectiveDistribution) -> CollectiveDistribution:
    """Discard the missed mass and rescale the detected counts to unit mass."""
    total = dist.total_mass
    if total <= 0.0:
        raise DegenerateInputError("nothing was detected; naive renormalization is undefined")
    return CollectiveDistribution(
        values=dist.values,
        probs=dist.probs / total,
        detected_mass=dist.detected_mass,
        missed_mass=0.0,
        bin_width=dist.bin_width,
        mode=dist.mode,
        grid_a=dist.grid_a,
        grid_b=dist.grid_b,
        renormalized=True,
    )


def apply_strategy(
    dist: CollectiveDistribution,
    strategy: FillStrategy,
    ext_a: Optional[ExtendedGrid] = None,
    ext_b: Optional[ExtendedGrid] = None,
) -> CollectiveDistribution:
    """
    Apply a fill strategy.

    Honest strategies first extend the support to the cutoffs when extended
    grids are supplied, unless clip_to_detector keeps the missed mass inside
    the detector range (the extremes are then the outermost detector bins).
    """
    if strategy.kind == FillKind.none_naive_renormalize:
        logger.warning("Naive renormalization ignores missed counts; verdicts are not trustworthy")
        return renormalize(dist)

    if not strategy.clip_to_detector and ext_a is not None and ext_b is not None:
        dist = extend_support(dist, ext_a, ext_b, dist.mode)

    if strategy.kind == FillKind.variance_worst:
        return fill_variance_worst(dist)
    return fill_entropy_worst(dist)
