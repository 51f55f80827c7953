from .state_schema import *
from .binning_schema import *
from .criterion_schema import *
from .run_schema import *
