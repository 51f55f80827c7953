"""
Binning of two-party Gaussian marginals into detector statistics.

Outcome lattices are addressed by integer index, never by matching floating
point values: for grids of common width the difference k - l (or the sum
k + l) of the two bin indices determines the collective outcome exactly.
"""
import logging
import math
from typing import List

import numpy as np
from pydantic import ValidationError

from app.exceptions import GridError
from app.schemas.binning_schema import (
    MASS_TOLERANCE,
    BinnedJoint,
    CollectiveDistribution,
    CollectiveMode,
    DetectorGrid,
    ExtendedGrid,
    expected_lattice,
    lattice_size,
)
from app.schemas.state_schema import MarginalComponent
from app.utils.numerics import bvn_grid_probs

logger = logging.getLogger(__name__)


def make_grid(lo: float, hi: float, bins: int) -> DetectorGrid:
    """Detector grid of `bins` equal bins over [lo, hi]."""
    try:
        return DetectorGrid(lo=lo, hi=hi, bins=bins)
    except ValidationError as e:
        raise GridError(f"invalid detector grid [{lo}, {hi}] with {bins} bins: {e}") from e


def extend_grid(grid: DetectorGrid, cutoff_lo: float, cutoff_hi: float) -> ExtendedGrid:
    """
    Extend a grid with whole bins out to the cutoffs.

    The number of added bins is rounded outward, so the extended grid keeps
    the bin width and alignment of the detector grid and covers at least
    [cutoff_lo, cutoff_hi].
    """
    if cutoff_lo > grid.lo or cutoff_hi < grid.hi:
        raise GridError(
            f"cutoffs [{cutoff_lo}, {cutoff_hi}] must enclose the detector range [{grid.lo}, {grid.hi}]"
        )
    width = grid.width
    # Slack of 1e-9 bins keeps commensurate cutoffs from gaining a spurious bin.
    extra_lo = max(0, math.ceil((grid.lo - cutoff_lo) / width - 1e-9))
    extra_hi = max(0, math.ceil((cutoff_hi - grid.hi) / width - 1e-9))
    return ExtendedGrid(
        base=grid,
        cutoff_lo=cutoff_lo,
        cutoff_hi=cutoff_hi,
        extra_lo=extra_lo,
        extra_hi=extra_hi,
    )


def bin_joint(marginal: List[MarginalComponent], grid_a: DetectorGrid, grid_b: DetectorGrid) -> BinnedJoint:
    """
    Joint detection probabilities per bin pair.

    Entry (k, l) is the mixture-weighted probability that party a lands in
    bin k and party b in bin l; whatever falls outside either detector range
    is reported as missed mass.
    """
    total_weight = sum(c.weight for c in marginal)
    if abs(total_weight - 1.0) > 1e-12:
        raise GridError(f"marginal weights must sum to 1, got {total_weight}")

    probs = np.zeros((grid_a.bins, grid_b.bins))
    for comp in marginal:
        if comp.weight == 0.0:
            continue
        probs += comp.weight * bvn_grid_probs(comp.mean, comp.cov, grid_a.edges, grid_b.edges)

    detected = float(probs.sum())
    logger.info(
        f"Binned joint on {grid_a.bins}x{grid_b.bins} bins: detected={detected:.6f}, missed={1.0 - detected:.6g}"
    )
    return BinnedJoint(probs=probs, detected_mass=detected, missed_mass=1.0 - detected)


def marginal_binned(joint: BinnedJoint, axis: int) -> np.ndarray:
    """1-D binned detection probabilities of party a (axis=0) or party b (axis=1)."""
    if axis not in (0, 1):
        raise GridError(f"axis must be 0 (party a) or 1 (party b), got {axis}")
    return joint.probs.sum(axis=1 - axis)


def _check_common_width(grid_a: DetectorGrid, grid_b: DetectorGrid) -> None:
    if abs(grid_a.width - grid_b.width) > 1e-12 * max(grid_a.width, grid_b.width):
        raise GridError(
            f"collective outcomes need equal bin widths, got {grid_a.width} and {grid_b.width}"
        )


def collective_dist(
    joint: BinnedJoint,
    mode: CollectiveMode,
    grid_a: DetectorGrid,
    grid_b: DetectorGrid,
) -> CollectiveDistribution:
    """
    Distribution of x_a - x_b (difference) or p_a + p_b (sum) built from
    bin centers; has grid_a.bins + grid_b.bins - 1 outcomes spaced by the
    common bin width.
    """
    mode = CollectiveMode(mode)
    if joint.probs.shape != (grid_a.bins, grid_b.bins):
        raise GridError(
            f"joint of shape {joint.probs.shape} does not match grids with {grid_a.bins} and {grid_b.bins} bins"
        )
    _check_common_width(grid_a, grid_b)

    matrix = joint.probs if mode == CollectiveMode.difference else joint.probs[:, ::-1]
    n_out = lattice_size(grid_a, grid_b)
    # Diagonal j collects every (k, l) with k - l (difference) or k + l (sum)
    # equal to j - (grid_b.bins - 1) or j respectively.
    probs = np.array([np.trace(matrix, offset=(grid_b.bins - 1) - j) for j in range(n_out)])

    return CollectiveDistribution(
        values=expected_lattice(mode, grid_a, grid_b),
        probs=probs,
        detected_mass=joint.detected_mass,
        missed_mass=joint.missed_mass,
        bin_width=grid_a.width,
        mode=mode,
        grid_a=grid_a,
        grid_b=grid_b,
    )


def extend_support(
    dist: CollectiveDistribution,
    ext_a: ExtendedGrid,
    ext_b: ExtendedGrid,
    mode: CollectiveMode,
) -> CollectiveDistribution:
    """
    Enlarge the outcome lattice to everything the extended grids can
    produce. Added outcomes carry probability 0; existing ones are unchanged.
    A distribution already on the extended lattice is returned as is.
    """
    mode = CollectiveMode(mode)
    if mode != dist.mode:
        raise GridError(f"distribution is a {dist.mode.value} distribution, not {mode.value}")

    new_a, new_b = ext_a.as_grid(), ext_b.as_grid()
    if dist.grid_a == new_a and dist.grid_b == new_b:
        return dist
    if ext_a.base != dist.grid_a or ext_b.base != dist.grid_b:
        raise GridError("extended grids were not built from the grids of this distribution")
    _check_common_width(new_a, new_b)

    if mode == CollectiveMode.difference:
        offset = ext_a.extra_lo + ext_b.extra_hi
    else:
        offset = ext_a.extra_lo + ext_b.extra_lo

    values = expected_lattice(mode, new_a, new_b)
    if abs(values[offset] - dist.values[0]) > MASS_TOLERANCE * max(1.0, abs(dist.values[0])):
        raise GridError("extended lattice is not aligned with the distribution's lattice")

    probs = np.zeros(values.size)
    probs[offset:offset + dist.support_size] = dist.probs

    logger.debug(
        f"Extended {mode.value} support from {dist.support_size} to {values.size} outcomes "
        f"(cutoffs a=[{ext_a.cutoff_lo}, {ext_a.cutoff_hi}], b=[{ext_b.cutoff_lo}, {ext_b.cutoff_hi}])"
    )
    return CollectiveDistribution(
        values=values,
        probs=probs,
        detected_mass=dist.detected_mass,
        missed_mass=dist.missed_mass,
        bin_width=dist.bin_width,
        mode=mode,
        grid_a=new_a,
        grid_b=new_b,
        filled_mass=dist.filled_mass,
        renormalized=dist.renormalized,
    )


def added_bins(before: CollectiveDistribution, after: CollectiveDistribution) -> int:
    """Number of outcome bins an extension added."""
    return after.support_size - before.support_size
