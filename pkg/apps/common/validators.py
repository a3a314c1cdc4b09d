"""
Кастомные валидаторы для всего проекта.

Используются в pydantic-схемах через AfterValidator (см. apps/common/types.py),
поэтому сигнализируют об ошибке через ValueError.
"""

import math


def validate_probability(value: float) -> float:
    """
    Проверяет, что значение - конечная вероятность из отрезка [0, 1].

    Args:
        value (float): Проверяемое значение.

    Raises:
        ValueError: NaN, бесконечность или значение вне [0, 1].

    Returns:
        float: То же значение.
    """
    if not math.isfinite(value) or not 0.0 <= value <= 1.0:
        raise ValueError(f"Probability must lie in [0, 1], got {value}")
    return value
