from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from app.exceptions import ToolkitError
from app.schemas.run_schema import RunConfig, RunMode, RunReport
from app.services.runner_service import run_analyze, run_sample, run_sweep

router = APIRouter(prefix="/runs", tags=["runs"])


def _run(runner, config: RunConfig) -> RunReport:
    try:
        return runner(config)
    except (ToolkitError, ValidationError) as e:
        raise HTTPException(status_code=422, detail=str(e))


@router.post("/analyze", response_model=RunReport)
def analyze(config: RunConfig):
    """Single analysis of a state under the configured grids, fill and criterion"""
    if config.mode != RunMode.analyze:
        config = config.model_copy(update={"mode": RunMode.analyze})
    return _run(run_analyze, config)


@router.post("/sweep", response_model=RunReport)
def sweep(config: RunConfig):
    """Bin-count or cutoff sweep; mode must be sweep_bins or sweep_cutoff"""
    if config.mode not in (RunMode.sweep_bins, RunMode.sweep_cutoff):
        raise HTTPException(status_code=422, detail="mode must be sweep_bins or sweep_cutoff")
    return _run(run_sweep, config)


@router.post("/sample", response_model=RunReport)
def sample(config: RunConfig):
    """Finite-sample analysis on Monte-Carlo detection records"""
    if config.sample is None:
        raise HTTPException(status_code=422, detail="a sample section is required")
    if config.mode != RunMode.sample:
        config = config.model_copy(update={"mode": RunMode.sample})
    return _run(run_sample, config)
