from .runs import router as runs_router
from .states import router as states_router
