"""
Базовые классы тестов: численная проверка градиентов и статистические сравнения.
"""

from collections.abc import Callable

import numpy as np
import pytest

from apps.diffcore.params import ParamStore


class GradientCheckTest:
    """
    Сравнение градиентов ленты с центральными конечными разностями.

    Функция потерь должна быть детерминированной и читать параметры из хранилища
    на каждом вызове (параметры возмущаются на месте и восстанавливаются).
    """

    step: float = 1e-6
    tolerance: float = 1e-5

    @staticmethod
    def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
        """
        Максимальная относительная ошибка |a - n| / max(|a| + |n|, 1e-3).

        Нижняя граница знаменателя отсекает шум округления у почти нулевых градиентов.
        """
        denominator = np.maximum(np.abs(analytic) + np.abs(numeric), 1e-3)
        return float(np.max(np.abs(analytic - numeric) / denominator))

    @classmethod
    def numeric_gradient(cls, loss: Callable[[], float], params: ParamStore, name: str) -> np.ndarray:
        """
        Центральная разность по каждому элементу параметра.

        Args:
            loss (Callable[[], float]): Значение потерь при текущих параметрах.
            params (ParamStore): Хранилище.
            name (str): Имя параметра.

        Returns:
            np.ndarray: Численный градиент формы параметра.
        """
        data = params[name].data
        gradient = np.zeros_like(data)

        for index in np.ndindex(data.shape):
            original = data[index]
            data[index] = original + cls.step
            upper = loss()
            data[index] = original - cls.step
            lower = loss()
            data[index] = original
            gradient[index] = (upper - lower) / (2.0 * cls.step)

        return gradient

    @classmethod
    def assert_gradients_match(
        cls,
        analytic: dict[str, np.ndarray],
        loss: Callable[[], float],
        params: ParamStore,
        names: list[str] | None = None,
    ) -> None:
        """
        Проверяет каждый параметр и печатает худший при расхождении.

        Raises:
            AssertionError: Относительная ошибка хотя бы одного параметра не меньше tolerance.
        """
        errors = {
            name: cls.relative_error(analytic[name], cls.numeric_gradient(loss, params, name))
            for name in (names if names is not None else list(params))
        }
        worst = max(errors, key=lambda name: errors[name])

        if errors[worst] >= cls.tolerance:
            pytest.fail(f"Gradient check failed for '{worst}': relative error {errors[worst]:.3e} >= {cls.tolerance}")


class StatisticalTest:
    """Сравнение оценок Монте-Карло с ожидаемыми значениями в единицах стандартной ошибки."""

    sigmas: float = 4.0

    @classmethod
    def assert_within_se(cls, expected: float, observed: float, se: float, label: str = "") -> None:
        """
        Raises:
            AssertionError: |observed - expected| > sigmas * se (плюс машинный допуск).
        """
        tolerance = cls.sigmas * se + 1e-12 * max(1.0, abs(expected))

        if abs(observed - expected) > tolerance:
            pytest.fail(
                f"\nStatistical Check Failed {label}"
                f"\nExpected: {expected:.6e}"
                f"\nObserved: {observed:.6e}"
                f"\nSE:       {se:.3e} ({cls.sigmas} sigmas allowed)"
            )
