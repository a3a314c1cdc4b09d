"""
Common custom types of segtrain project.
"""

from typing import Annotated

import numpy as np
import numpy.typing as npt
from pydantic import AfterValidator

from apps.common.validators import validate_probability

# Вещественные массивы хранятся только в float64
FloatArray = npt.NDArray[np.float64]
IntArray = npt.NDArray[np.int64]

# AfterValidator прогонит значение через функцию валидации после базовой проверки типа
Probability = Annotated[
    float,
    AfterValidator(validate_probability),  # Вероятность в [0, 1]
]
