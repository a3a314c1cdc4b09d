"""
Типы анализа устаревания: модель возмущения и точные моменты.
"""

from dataclasses import dataclass
from enum import StrEnum
from fractions import Fraction

import numpy as np

from apps.common.exceptions import ConfigError
from apps.common.types import FloatArray

FractionMatrix = list[list[Fraction]]


class Scheme(StrEnum):
    """Схема использования устаревших эмбеддингов."""

    ET = "et"  # таблица эмбеддингов: все невыбранные сегменты из таблицы
    SED = "sed"  # таблица + Stale Embedding Dropout


@dataclass(frozen=True)
class PerturbationModel:
    """
    Свежие и устаревшие эмбеддинги сегментов одного графа.

    Возмущение - разность между агрегированным (со схемой) и чистым эмбеддингом графа,
    агрегирование - среднее по J сегментам.

    Attributes:
        J (int): Число сегментов.
        S (int): Число сегментов с градиентом.
        p (float): Вероятность сохранения устаревшего эмбеддинга.
        fresh (FloatArray): Свежие эмбеддинги h (J x d).
        stale (FloatArray): Устаревшие эмбеддинги таблицы (J x d).
    """

    J: int
    S: int
    p: float
    fresh: FloatArray
    stale: FloatArray

    def __post_init__(self) -> None:
        if not 1 <= self.S <= self.J:
            raise ConfigError(f"PerturbationModel needs J >= S >= 1, got J={self.J}, S={self.S}")
        if not 0.0 <= self.p <= 1.0:
            raise ConfigError(f"keep probability must lie in [0, 1], got {self.p}")

        fresh, stale = np.asarray(self.fresh), np.asarray(self.stale)
        if fresh.ndim != 2 or fresh.shape[0] != self.J or fresh.shape != stale.shape:
            raise ConfigError(
                f"fresh {fresh.shape} and stale {stale.shape} must both be ({self.J}, d)",
            )

    @property
    def width(self) -> int:
        return int(self.fresh.shape[1])

    @property
    def clean(self) -> FloatArray:
        """Чистый эмбеддинг графа: среднее свежих эмбеддингов."""
        return np.asarray(self.fresh, dtype=np.float64).sum(axis=0) / self.J

    @property
    def selected_weight(self) -> float:
        """Вес выбранного сегмента в SED: p + (1 - p) * J / S."""
        return self.p + (1.0 - self.p) * self.J / self.S

    def with_p(self, p: float) -> "PerturbationModel":
        return PerturbationModel(J=self.J, S=self.S, p=p, fresh=self.fresh, stale=self.stale)


@dataclass(frozen=True)
class DeltaMoments:
    """
    Точные моменты возмущения (рациональная арифметика).

    Attributes:
        scheme (Scheme): Схема.
        segment_mean (FractionMatrix): E[delta_j] по сегментам (J x d).
        segment_square (FractionMatrix): E[delta_j ** 2] поэлементно (J x d).
        mean (list[Fraction]): E[Delta] агрегированного возмущения (d).
        second (FractionMatrix): E[Delta Delta^T] (d x d).
        configurations (int): Число перебранных исходов.
    """

    scheme: Scheme
    segment_mean: FractionMatrix
    segment_square: FractionMatrix
    mean: list[Fraction]
    second: FractionMatrix
    configurations: int

    def as_arrays(self) -> dict[str, FloatArray]:
        return {
            "segment_mean": np.array(self.segment_mean, dtype=np.float64),
            "segment_square": np.array(self.segment_square, dtype=np.float64),
            "mean": np.array(self.mean, dtype=np.float64),
            "second": np.array(self.second, dtype=np.float64),
        }


@dataclass(frozen=True, slots=True)
class BiasEstimate:
    """
    Оценка Монте-Карло изменения потерь от возмущения.

    total - среднее L(z + Delta) - L(z); first_order - g^T Delta; second_order - Delta^T H Delta / 2.
    Каждое значение сопровождается стандартной ошибкой.
    """

    scheme: Scheme
    trials: int
    total: float
    total_se: float
    first_order: float
    first_order_se: float
    second_order: float
    second_order_se: float
