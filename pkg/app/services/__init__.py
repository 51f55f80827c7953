from .gaussian_states import *
from .binning_service import *
from .adversarial_fill import *
from .criteria_service import *
from .event_sampler import *
