from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class ToolkitSettings(BaseSettings):
    """Runtime settings for the entanglement verification toolkit"""

    model_config = SettingsConfigDict(
        env_prefix="CVTOOLKIT_",
        env_file=".env",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging / output
    log_level: str = "INFO"
    output_dir: str = "./results"

    # Quadrature controls for the bivariate normal kernels
    quad_epsabs: float = Field(1e-13, gt=0)
    quad_epsrel: float = Field(1e-12, gt=0)
    quad_limit: int = Field(200, ge=10)
    tail_sigmas: float = Field(10.0, gt=0)

    # Entropic criterion optimizer
    alpha_scan_points: int = Field(64, ge=4)
    alpha_max: float = Field(1000.0, gt=1)
    alpha_min_offset: float = Field(1e-6, gt=0, lt=0.5)
    alpha_tol: float = Field(1e-10, gt=0)

    # Sampling / parallelism
    sample_shard_size: int = Field(1_000_000, ge=1)
    max_workers: int = Field(1, ge=1)

    # Finite-sample missed-mass bound (None disables it)
    miss_confidence: Optional[float] = Field(0.99, gt=0, lt=1)

    # Tail mass beyond a cutoff above which the cutoff is reported as implausible
    cutoff_tail_warning: float = Field(1e-9, ge=0)
    # Tail mass above which a run withholds its entanglement verdict
    cutoff_tail_limit: float = Field(1e-2, ge=0)


# Global settings instance
settings = ToolkitSettings()
