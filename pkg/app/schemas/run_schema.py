import math
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, Field, model_validator

from app.config import settings

from .binning_schema import FillKind, FillStrategy
from .criterion_schema import CriterionKind, CriterionReport
from .state_schema import Basis

VACUUM_SIGMA = math.sqrt(0.5)


class StateKind(str, Enum):
    pure_product = "pure_product"
    mixed_xp = "mixed_xp"
    smoothed_epr = "smoothed_epr"


class RunMode(str, Enum):
    analyze = "analyze"
    sweep_bins = "sweep_bins"
    sweep_cutoff = "sweep_cutoff"
    sample = "sample"


class StateSpec(BaseModel):
    kind: StateKind = StateKind.smoothed_epr
    sigma_x_a: float = Field(VACUUM_SIGMA, gt=0)
    sigma_x_b: float = Field(VACUUM_SIGMA, gt=0)
    sigma_broad: Optional[float] = Field(None, gt=0)
    nbar: float = Field(1.0, ge=0)


class GridSpec(BaseModel):
    """Detector grid shared by both parties in one basis, with optional cutoffs."""

    lo: float = -2.0
    hi: float = 2.0
    bins: int = Field(32, ge=1)
    cutoff_lo: Optional[float] = None
    cutoff_hi: Optional[float] = None

    @model_validator(mode="after")
    def _check_grid(self) -> "GridSpec":
        if not self.lo < self.hi:
            raise ValueError(f"detector range requires lo < hi, got [{self.lo}, {self.hi}]")
        if (self.cutoff_lo is None) != (self.cutoff_hi is None):
            raise ValueError("cutoff_lo and cutoff_hi must be given together")
        if self.has_cutoff and (self.cutoff_lo > self.lo or self.cutoff_hi < self.hi):
            raise ValueError("cutoffs must enclose the detector range")
        return self

    @property
    def has_cutoff(self) -> bool:
        return self.cutoff_lo is not None


class FillSpec(BaseModel):
    kind: FillKind = FillKind.entropy_worst
    clip_to_detector: bool = False

    def strategy(self) -> FillStrategy:
        return FillStrategy(kind=self.kind, clip_to_detector=self.clip_to_detector)


class CriterionSpec(BaseModel):
    criterion: CriterionKind = CriterionKind.renyi_entropic
    alpha: Optional[float] = Field(None, gt=0.5)


class SweepSpec(BaseModel):
    """Sweep points, either listed or as an inclusive start/stop/step range."""

    values: Optional[List[float]] = None
    start: Optional[float] = None
    stop: Optional[float] = None
    step: Optional[float] = Field(None, gt=0)

    @model_validator(mode="after")
    def _check_points(self) -> "SweepSpec":
        if self.values is None and None in (self.start, self.stop, self.step):
            raise ValueError("give either values or start, stop and step")
        if self.values is not None and not self.values:
            raise ValueError("sweep values must not be empty")
        if self.values is None and self.stop < self.start:
            raise ValueError("sweep stop must not lie below start")
        return self

    def points(self) -> List[float]:
        if self.values is not None:
            return sorted(float(v) for v in self.values)
        n = int(math.floor((self.stop - self.start) / self.step + 1e-9)) + 1
        return [float(v) for v in self.start + self.step * np.arange(n)]


class SampleSpec(BaseModel):
    n: int = Field(1_000_000, ge=1)
    seed: int = 0
    miss_confidence: Optional[float] = Field(default_factory=lambda: settings.miss_confidence, gt=0, lt=1)


class OutputSpec(BaseModel):
    out_dir: Optional[str] = None
    write_files: bool = False
    write_distributions: bool = False
    write_joints: bool = False
    events_csv: bool = False


class RunConfig(BaseModel):
    state: StateSpec = StateSpec()
    grid_x: GridSpec = GridSpec()
    grid_p: GridSpec = GridSpec()
    fill: FillSpec = FillSpec()
    criterion: CriterionSpec = CriterionSpec()
    mode: RunMode = RunMode.analyze
    sweep: Optional[SweepSpec] = None
    sample: Optional[SampleSpec] = None
    output: OutputSpec = OutputSpec()

    @model_validator(mode="after")
    def _check_mode(self) -> "RunConfig":
        if self.mode in (RunMode.sweep_bins, RunMode.sweep_cutoff) and self.sweep is None:
            raise ValueError(f"mode {self.mode.value} requires a sweep section")
        if self.mode == RunMode.sweep_bins:
            bad = [v for v in self.sweep.points() if v < 1 or v != int(v)]
            if bad:
                raise ValueError(f"bin counts must be positive integers, got {bad}")
        if self.mode == RunMode.sweep_cutoff:
            reach = min(-self.grid_x.lo, self.grid_x.hi, -self.grid_p.lo, self.grid_p.hi)
            bad = [v for v in self.sweep.points() if v < reach]
            if bad:
                raise ValueError(f"cutoffs {bad} lie inside the detector range")
        if self.mode == RunMode.sample and self.sample is None:
            raise ValueError("mode sample requires a sample section")
        return self

    def grid_for(self, basis: Basis) -> GridSpec:
        return self.grid_x if Basis(basis) == Basis.X else self.grid_p


class BasisSummary(BaseModel):
    basis: Basis
    detected_mass: float
    missed_mass: float
    filled_mass: float
    bin_width: float
    support_size: int
    added_bins: int
    cutoff_tail_mass: Optional[float] = None
    cutoff_plausible: bool = True
    n_events: Optional[int] = None
    n_missed: Optional[int] = None
    miss_bound: Optional[float] = None


class SweepRow(BaseModel):
    parameter: float
    criterion_value: float
    alpha_opt: Optional[float] = None
    verified: bool
    cutoff_plausible: bool = True
    detected_mass_x: float
    detected_mass_p: float


class RunReport(BaseModel):
    version: str
    config: RunConfig
    bases: List[BasisSummary] = []
    criterion: Optional[CriterionReport] = None
    cutoff_plausible: bool = True
    entanglement_verified: Optional[bool] = None
    analytic_variances: Optional[Tuple[float, float]] = None
    analytic_comparison: Optional[CriterionReport] = None
    sweep_rows: List[SweepRow] = []
    crossings: List[Tuple[float, float]] = []
    threshold: Optional[float] = None
    multiple_crossings: bool = False
    files: List[str] = []
    timing: Dict[str, float] = {}

    @model_validator(mode="after")
    def _check_verdict(self) -> "RunReport":
        if self.entanglement_verified and not (
            self.cutoff_plausible and self.criterion is not None and self.criterion.entanglement_verified
        ):
            raise ValueError("entanglement is only verified by a passing criterion under plausible cutoffs")
        return self


class DensityRequest(BaseModel):
    state: StateSpec
    basis: Basis = Basis.X
    xs: List[float] = Field(..., min_length=1)
    ys: List[float] = Field(..., min_length=1)


class DensityResponse(BaseModel):
    basis: Basis
    xs: List[float]
    ys: List[float]
    density: List[List[float]]
