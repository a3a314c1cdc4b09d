"""
Метрики качества: точность классификации и OPA (ordered pair accuracy).
"""

from collections.abc import Sequence

import numpy as np

from apps.common.exceptions import ConfigError
from apps.metrics.types import PredictionBatch


def accuracy(logits: np.ndarray, classes: Sequence[int] | np.ndarray) -> float:
    """
    Доля совпадений argmax с классом; ничьи argmax - в пользу меньшего индекса.

    Raises:
        ConfigError: Пустой пакет.
    """
    values = np.asarray(logits, dtype=np.float64)
    targets = np.asarray(classes, dtype=np.int64)

    if targets.size == 0:
        raise ConfigError("accuracy() on an empty batch")

    return float(np.mean(np.argmax(values, axis=1) == targets))


def opa(predictions: Sequence[float] | np.ndarray, targets: Sequence[float] | np.ndarray) -> float | None:
    """
    sum_ij I[p_i > p_j] I[y_i > y_j] / sum_ij I[y_i > y_j].

    Ничьи в предсказаниях считаются неверно упорядоченной парой.

    Returns:
        float | None: Значение в [0, 1] или None, если упорядоченных пар целей нет.
    """
    p = np.asarray(predictions, dtype=np.float64).reshape(-1)
    y = np.asarray(targets, dtype=np.float64).reshape(-1)

    ordered = y[:, None] > y[None, :]
    denominator = int(ordered.sum())

    if denominator == 0:
        return None

    concordant = int((ordered & (p[:, None] > p[None, :])).sum())
    return concordant / denominator


def grouped_opa(batch: PredictionBatch) -> float | None:
    """
    OPA по каждой группе (конфигурации одного графа), затем среднее по группам.

    Группы без упорядоченных пар не учитываются.

    Returns:
        float | None: Среднее OPA или None, если ни одна группа не определена.
    """
    groups = batch.groups if batch.groups is not None else np.zeros(len(batch), dtype=np.int64)
    predictions = batch.predictions.reshape(-1)

    values = []
    for group in np.unique(groups):
        mask = groups == group
        value = opa(predictions[mask], batch.targets[mask])
        if value is not None:
            values.append(value)

    return float(np.mean(values)) if values else None
