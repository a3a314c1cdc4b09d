"""
Оракулы синтетических датасетов: метка по подсчёту на всём графе и цель ранжирования.
"""

import numpy as np

from apps.common.types import FloatArray
from apps.synthdata.types import GeneratorSpec

MARK_COLUMN = 0


def marked_fraction(features: FloatArray) -> float:
    """Доля помеченных узлов (признак 0 равен 1)."""
    if features.shape[0] == 0:
        return 0.0
    return float(np.mean(features[:, MARK_COLUMN] > 0.5))


def class_from_fraction(fraction: float, spec: GeneratorSpec) -> int:
    """
    Класс, чья полоса содержит долю (для доли в зазоре - ближайшая полоса).
    """
    distances = []
    for k in range(spec.num_classes):
        lo, hi = spec.band(k)
        distances.append(0.0 if lo <= fraction <= hi else min(abs(fraction - lo), abs(fraction - hi)))
    return int(np.argmin(distances))


def oracle_label(features: FloatArray, spec: GeneratorSpec) -> int:
    """Метка по подсчёту помеченных узлов всего графа."""
    return class_from_fraction(marked_fraction(features), spec)


def segment_oracle_label(segment_features: FloatArray, spec: GeneratorSpec) -> int:
    """Та же метка, но по одному сегменту (видит только часть графа)."""
    return class_from_fraction(marked_fraction(segment_features), spec)


def node_cost(features: FloatArray) -> FloatArray:
    """
    Нелинейная стоимость узла по его признакам: латентная стоимость и параметр конфигурации.

    g(x) = x0 * (1 + 4 * (x1 - 0.5)^2) + 0.5 * x1^2
    """
    latent, knob = features[:, 0], features[:, 1]
    return latent * (1.0 + 4.0 * (knob - 0.5) ** 2) + 0.5 * knob**2


def ranking_target(features: FloatArray) -> float:
    """Цель ранжирования: сумма стоимостей всех узлов."""
    return float(node_cost(features).sum())
