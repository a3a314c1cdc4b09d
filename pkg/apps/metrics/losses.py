"""
Дифференцируемые функции потерь (записываются на ленту как операции diffcore).
"""

from collections.abc import Sequence

import numpy as np
from scipy.special import logsumexp, softmax

from apps.common.exceptions import ConfigError, NumericalError
from apps.common.types import FloatArray
from apps.diffcore.tensor import Tensor, make_result
from apps.metrics.types import Reduction


def cross_entropy(logits: Tensor, classes: int | Sequence[int] | np.ndarray, reduction: Reduction | str = Reduction.MEAN) -> Tensor:
    """
    -log softmax(logits)[class] для вектора (C,) или пакета (B, C).

    Градиент по логитам - softmax - one_hot (делённый на B при усреднении).

    Args:
        logits (Tensor): Логиты.
        classes (int | Sequence[int] | np.ndarray): Истинные классы.
        reduction (Reduction | str): Свёртка по пакету.

    Raises:
        ConfigError: Число целей не совпадает с числом строк или класс вне диапазона.
        NumericalError: Нефинитные логиты.

    Returns:
        Tensor: Скаляр.
    """
    values = logits.data.reshape(-1, logits.shape[-1])
    targets = np.atleast_1d(np.asarray(classes, dtype=np.int64))
    batch, num_classes = values.shape

    if targets.shape[0] != batch:
        raise ConfigError(f"{targets.shape[0]} targets for {batch} logit rows")
    if targets.size and (targets.min() < 0 or targets.max() >= num_classes):
        raise ConfigError(f"class index out of range for {num_classes} classes: {targets.tolist()}")
    if not np.isfinite(values).all():
        raise NumericalError("cross_entropy() requires finite logits")

    rows = np.arange(batch)
    per_item = logsumexp(values, axis=1) - values[rows, targets]
    factor = 1.0 / batch if Reduction(reduction) is Reduction.MEAN else 1.0

    def backward(g: FloatArray) -> list[FloatArray | None]:
        grad = softmax(values, axis=1)
        grad[rows, targets] -= 1.0
        return [(float(g) * factor * grad).reshape(logits.shape)]

    return make_result("cross_entropy", np.asarray(per_item.sum() * factor), (logits,), backward)


def pairwise_hinge(
    predictions: Tensor,
    targets: Sequence[float] | np.ndarray,
    groups: Sequence[int] | np.ndarray | None = None,
    reduction: Reduction | str = Reduction.SUM,
) -> Tensor:
    """
    Попарный hinge внутри групп: sum_i sum_j I[y_i > y_j] * max(0, 1 - (p_i - p_j)).

    Пара активна при строго положительном слагаемом; в изломе субградиент 0.
    Группа из одного элемента даёт 0.

    Args:
        predictions (Tensor): Скалярные предсказания (B,).
        targets (Sequence[float] | np.ndarray): Цели.
        groups (Sequence[int] | np.ndarray | None): Группы (None - одна группа).
        reduction (Reduction | str): SUM - точная двойная сумма; MEAN - сумма / B.

    Raises:
        ConfigError: Длины предсказаний, целей и групп различаются.

    Returns:
        Tensor: Скаляр.
    """
    scores = predictions.data.reshape(-1)
    y = np.asarray(targets, dtype=np.float64)
    g = np.zeros(y.shape[0], dtype=np.int64) if groups is None else np.asarray(groups, dtype=np.int64)

    if scores.shape[0] != y.shape[0] or g.shape[0] != y.shape[0]:
        raise ConfigError("pairwise_hinge(): predictions, targets and groups must have equal lengths")

    ordered = (y[:, None] > y[None, :]) & (g[:, None] == g[None, :])
    margins = 1.0 - (scores[:, None] - scores[None, :])
    active = ordered & (margins > 0.0)

    batch = max(y.shape[0], 1)
    factor = 1.0 / batch if Reduction(reduction) is Reduction.MEAN else 1.0
    total = float(np.where(active, margins, 0.0).sum()) * factor

    def backward(upstream: FloatArray) -> list[FloatArray | None]:
        # d/dp_i: -1 за каждую активную пару (i, j), +1 за каждую активную пару (j, i)
        counts = active.sum(axis=0).astype(np.float64) - active.sum(axis=1).astype(np.float64)
        return [(float(upstream) * factor * counts).reshape(predictions.shape)]

    return make_result("pairwise_hinge", np.asarray(total), (predictions,), backward)
