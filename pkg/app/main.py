from fastapi import FastAPI

from app import __version__
from app.api.v1.routes.runs import router as runs_router
from app.api.v1.routes.states import router as states_router

app = FastAPI(
    title="CV Entanglement Verification Toolkit",
    description="Verifies entanglement from binned, finite-range quadrature statistics",
    version=__version__,
)

app.include_router(runs_router)
app.include_router(states_router)

@app.get("/")
def read_root():
    return {"message": "CV Entanglement Verification API", "version": __version__}

@app.get("/health")
def health_check():
    return {"status": "healthy"}
