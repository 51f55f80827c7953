from typing import Annotated

import numpy as np
from pydantic import BeforeValidator, PlainSerializer


def _as_readonly_array(value) -> np.ndarray:
    arr = np.array(value, dtype=float)
    arr.flags.writeable = False
    return arr


# Float arrays held by frozen models: copied on the way in, read-only afterwards,
# serialized as nested lists.
FloatArray = Annotated[
    np.ndarray,
    BeforeValidator(_as_readonly_array),
    PlainSerializer(lambda a: a.tolist(), return_type=list),
]
