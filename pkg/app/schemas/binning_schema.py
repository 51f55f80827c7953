import math
from enum import Enum

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from .common import FloatArray

MASS_TOLERANCE = 1e-9


class CollectiveMode(str, Enum):
    difference = "difference"  # X- = x_a - x_b
    sum = "sum"                # P+ = p_a + p_b


class DetectorGrid(BaseModel):
    """Uniform binning of one quadrature axis over the detector range [lo, hi)."""

    model_config = ConfigDict(frozen=True)

    lo: float
    hi: float
    bins: int = Field(..., ge=1)

    @model_validator(mode="after")
    def _check_range(self) -> "DetectorGrid":
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("detector range must be finite")
        if not self.lo < self.hi:
            raise ValueError(f"detector range requires lo < hi, got [{self.lo}, {self.hi}]")
        return self

    @property
    def width(self) -> float:
        return (self.hi - self.lo) / self.bins

    @property
    def edges(self) -> np.ndarray:
        return self.lo + self.width * np.arange(self.bins + 1)

    @property
    def centers(self) -> np.ndarray:
        return self.lo + self.width * (np.arange(self.bins) + 0.5)


class ExtendedGrid(BaseModel):
    """A detector grid plus the whole bins added out to the assumed cutoffs."""

    model_config = ConfigDict(frozen=True)

    base: DetectorGrid
    cutoff_lo: float
    cutoff_hi: float
    extra_lo: int = Field(..., ge=0)
    extra_hi: int = Field(..., ge=0)

    @model_validator(mode="after")
    def _check_extension(self) -> "ExtendedGrid":
        width = self.base.width
        if self.cutoff_lo > self.base.lo + MASS_TOLERANCE or self.cutoff_hi < self.base.hi - MASS_TOLERANCE:
            raise ValueError(
                f"cutoffs [{self.cutoff_lo}, {self.cutoff_hi}] must enclose the detector range "
                f"[{self.base.lo}, {self.base.hi}]"
            )
        if self.base.lo - self.extra_lo * width > self.cutoff_lo + MASS_TOLERANCE * width:
            raise ValueError("extra_lo does not reach the lower cutoff")
        if self.base.hi + self.extra_hi * width < self.cutoff_hi - MASS_TOLERANCE * width:
            raise ValueError("extra_hi does not reach the upper cutoff")
        return self

    def as_grid(self) -> DetectorGrid:
        width = self.base.width
        return DetectorGrid(
            lo=self.base.lo - self.extra_lo * width,
            hi=self.base.hi + self.extra_hi * width,
            bins=self.base.bins + self.extra_lo + self.extra_hi,
        )


class BinnedJoint(BaseModel):
    """Joint detection probabilities of the two parties in one basis."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    probs: FloatArray
    detected_mass: float
    missed_mass: float

    @model_validator(mode="after")
    def _check_mass(self) -> "BinnedJoint":
        if self.probs.ndim != 2:
            raise ValueError(f"probs must be a matrix, got {self.probs.ndim} dimensions")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be non-negative")
        if abs(self.probs.sum() - self.detected_mass) > MASS_TOLERANCE:
            raise ValueError(f"detected_mass {self.detected_mass} != sum(probs) {self.probs.sum()}")
        if abs(self.detected_mass + self.missed_mass - 1.0) > MASS_TOLERANCE:
            raise ValueError("detected_mass + missed_mass must equal 1")
        return self


class CollectiveDistribution(BaseModel):
    """
    Distribution of X- or P+ on the uniform outcome lattice spanned by two grids.

    sum(probs) equals detected_mass + filled_mass, except for naive
    renormalization, which rescales the detected counts to unit mass.
    """

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    values: FloatArray
    probs: FloatArray
    detected_mass: float
    missed_mass: float
    bin_width: float = Field(..., gt=0)
    mode: CollectiveMode
    grid_a: DetectorGrid
    grid_b: DetectorGrid
    filled_mass: float = 0.0
    renormalized: bool = False

    @model_validator(mode="after")
    def _check_lattice(self) -> "CollectiveDistribution":
        if self.values.ndim != 1 or self.values.shape != self.probs.shape:
            raise ValueError("values and probs must be vectors of equal length")
        if self.values.size > 1:
            steps = np.diff(self.values)
            if np.any(np.abs(steps - self.bin_width) > 1e-9 * max(1.0, self.bin_width)):
                raise ValueError("outcome values must be uniformly spaced by bin_width")
        if np.any(self.probs < 0):
            raise ValueError("probabilities must be non-negative")
        expected = 1.0 if self.renormalized else self.detected_mass + self.filled_mass
        if abs(self.probs.sum() - expected) > MASS_TOLERANCE:
            raise ValueError(f"sum(probs) {self.probs.sum()} does not match the accounted mass {expected}")
        return self

    @property
    def total_mass(self) -> float:
        return float(self.probs.sum())

    @property
    def support_size(self) -> int:
        return int(self.values.size)


def lattice_origin(mode: CollectiveMode, grid_a: DetectorGrid, grid_b: DetectorGrid) -> float:
    """Outcome value of lattice index 0 for the given grids."""
    if mode == CollectiveMode.difference:
        return grid_a.centers[0] - grid_b.centers[-1]
    return grid_a.centers[0] + grid_b.centers[0]


def lattice_size(grid_a: DetectorGrid, grid_b: DetectorGrid) -> int:
    return grid_a.bins + grid_b.bins - 1


def expected_lattice(mode: CollectiveMode, grid_a: DetectorGrid, grid_b: DetectorGrid) -> np.ndarray:
    return lattice_origin(mode, grid_a, grid_b) + grid_a.width * np.arange(lattice_size(grid_a, grid_b))


class FillKind(str, Enum):
    none_naive_renormalize = "naive"
    variance_worst = "variance_worst"
    entropy_worst = "entropy_worst"


class FillStrategy(BaseModel):
    """How missed mass is assigned before a criterion is evaluated."""

    model_config = ConfigDict(frozen=True)

    kind: FillKind = FillKind.entropy_worst
    clip_to_detector: bool = False

    @property
    def is_honest(self) -> bool:
        return self.kind != FillKind.none_naive_renormalize
