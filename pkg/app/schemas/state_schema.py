from enum import Enum
from typing import List

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.exceptions import DomainError

from .common import FloatArray

# Symplectic form for the quadrature ordering (x_a, p_a, x_b, p_b)
OMEGA = np.kron(np.eye(2), np.array([[0.0, 1.0], [-1.0, 0.0]]))

PHYSICALITY_TOLERANCE = 1e-9


class Basis(str, Enum):
    X = "X"
    P = "P"


def symplectic_eigenvalues(cov: np.ndarray) -> np.ndarray:
    """Symplectic eigenvalues of a 4x4 covariance matrix, ascending, each listed once."""
    eig = np.abs(np.linalg.eigvals(1j * OMEGA @ np.asarray(cov, dtype=float)))
    return np.sort(eig)[::2]


def check_physical(cov: np.ndarray) -> None:
    """
    Raise DomainError unless cov is a symmetric positive-definite 4x4
    covariance with every symplectic eigenvalue at least 1/2.
    """
    cov = np.asarray(cov, dtype=float)
    if cov.shape != (4, 4):
        raise DomainError(f"cov must be 4x4, got shape {cov.shape}")
    if not np.allclose(cov, cov.T, atol=1e-12, rtol=0.0):
        raise DomainError("cov must be symmetric")
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise DomainError("cov must be positive-definite") from e
    nu_min = symplectic_eigenvalues(cov)[0]
    if nu_min < 0.5 - PHYSICALITY_TOLERANCE:
        raise DomainError(f"cov violates the uncertainty principle: symplectic eigenvalue {nu_min} < 1/2")


class GaussianComponent(BaseModel):
    """One weighted Gaussian Wigner function over (x_a, p_a, x_b, p_b)."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weight: float = Field(..., ge=0.0, le=1.0)
    mean: FloatArray
    cov: FloatArray

    @model_validator(mode="after")
    def _check_physical(self) -> "GaussianComponent":
        if self.mean.shape != (4,):
            raise ValueError(f"mean must be a 4-vector, got shape {self.mean.shape}")
        check_physical(self.cov)
        return self


class GaussianMixtureState(BaseModel):
    """Convex mixture of Gaussian components."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    components: List[GaussianComponent] = Field(..., min_length=1)

    @model_validator(mode="after")
    def _check_weights(self) -> "GaussianMixtureState":
        total = sum(c.weight for c in self.components)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"component weights must sum to 1, got {total}")
        return self


class MarginalComponent(BaseModel):
    """Weighted 2-D Gaussian over the two parties' values in one basis."""

    model_config = ConfigDict(frozen=True, arbitrary_types_allowed=True)

    weight: float
    mean: FloatArray
    cov: FloatArray
