from fastapi import APIRouter, HTTPException
from pydantic import ValidationError

from app.exceptions import ToolkitError
from app.schemas.run_schema import DensityRequest, DensityResponse
from app.services.gaussian_states import build_state, marginal_density

router = APIRouter(prefix="/states", tags=["states"])


@router.post("/density", response_model=DensityResponse)
def density(request: DensityRequest):
    """Continuous joint density of a state's X or P marginal on xs x ys"""
    try:
        state = build_state(request.state)
        values = marginal_density(state, request.basis, request.xs, request.ys)
    except (ToolkitError, ValidationError) as e:
        raise HTTPException(status_code=422, detail=str(e))
    return DensityResponse(basis=request.basis, xs=request.xs, ys=request.ys, density=values.tolist())
