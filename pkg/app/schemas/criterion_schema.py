from enum import Enum
from typing import Any, Dict, Optional, Tuple

from pydantic import BaseModel, ConfigDict, model_validator


class CriterionKind(str, Enum):
    mgvt_raw = "mgvt_raw"
    coarse_variance = "coarse_variance"
    renyi_entropic = "renyi_entropic"


class CriterionReport(BaseModel):
    """Outcome of one separability criterion evaluation."""

    model_config = ConfigDict(frozen=True)

    criterion: CriterionKind
    value: float
    threshold: float
    entanglement_verified: bool
    alpha_opt: Optional[float] = None
    beta_opt: Optional[float] = None
    shannon_value: Optional[float] = None
    alpha_scan_bounds: Optional[Tuple[float, float]] = None
    inputs_digest: Dict[str, Any] = {}

    @model_validator(mode="after")
    def _check_verdict(self) -> "CriterionReport":
        if self.entanglement_verified != (self.value < self.threshold):
            raise ValueError("entanglement_verified must equal value < threshold")
        if self.alpha_opt is not None:
            if self.beta_opt is None:
                raise ValueError("beta_opt is required together with alpha_opt")
            expected = self.alpha_opt / (2.0 * self.alpha_opt - 1.0)
            if abs(self.beta_opt - expected) > 1e-9 * max(1.0, abs(expected)):
                raise ValueError("beta_opt must equal alpha_opt / (2 alpha_opt - 1)")
        return self
