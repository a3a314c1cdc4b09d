"""
Выбор сегментов с градиентом, веса Stale Embedding Dropout и агрегирование эмбеддингов сегментов.
"""

from collections.abc import Sequence

import numpy as np

from apps.common.exceptions import ConfigError, WidthMismatchError
from apps.diffcore import ops
from apps.diffcore.tensor import Tensor
from apps.diffcore.types import Readout
from apps.training.types import SedAssignment


def sample_segments(J: int, S: int, rng: np.random.Generator) -> tuple[int, ...]:
    """
    Равномерный выбор min(S, J) сегментов без возвращения.

    Args:
        J (int): Число сегментов.
        S (int): Число сегментов с градиентом.
        rng (np.random.Generator): Поток выбора сегментов.

    Returns:
        tuple[int, ...]: Отсортированные индексы.
    """
    if J < 1 or S < 1:
        raise ConfigError(f"sample_segments() needs J >= 1 and S >= 1, got J={J}, S={S}")
    return tuple(sorted(int(j) for j in rng.choice(J, size=min(S, J), replace=False)))


def sed_weights(J: int, S: int, selected: Sequence[int], p: float, rng: np.random.Generator) -> SedAssignment:
    """
    Веса Stale Embedding Dropout.

    Выбранные сегменты получают вес p + (1 - p) * J / S. Каждый невыбранный сегмент
    независимо сохраняется с вероятностью p (вес 1), иначе выбрасывается (вес 0).
    На каждый невыбранный сегмент тратится ровно одно число из потока, по возрастанию индекса.

    Args:
        J (int): Число сегментов.
        S (int): Число выбранных сегментов.
        selected (Sequence[int]): Выбранные сегменты.
        p (float): Вероятность сохранения.
        rng (np.random.Generator): Поток дропаута.

    Raises:
        ConfigError: p вне [0, 1] или selected не согласован с S.

    Returns:
        SedAssignment: Веса и выбранные сегменты.
    """
    if not 0.0 <= p <= 1.0:
        raise ConfigError(f"SED keep probability must lie in [0, 1], got {p}")

    chosen = set(selected)
    if len(chosen) != S or not all(0 <= j < J for j in chosen):
        raise ConfigError(f"selected {sorted(chosen)} must hold {S} distinct indices in [0, {J})")

    selected_weight = p + (1.0 - p) * J / S
    weights = [selected_weight if j in chosen else (1.0 if rng.random() < p else 0.0) for j in range(J)]

    return SedAssignment(weights=tuple(weights), selected=tuple(sorted(chosen)))


def aggregate(
    embeddings: Sequence[Tensor | None],
    weights: Sequence[float],
    J: int,
    mode: Readout | str = Readout.MEAN,
) -> Tensor:
    """
    Агрегирование эмбеддингов сегментов: (1/J) * sum w_j h_j (mean) или sum w_j h_j (sum).

    Слагаемые с нулевым весом пропускаются, поэтому их эмбеддинг может отсутствовать (None).

    Args:
        embeddings (Sequence[Tensor | None]): Эмбеддинги сегментов.
        weights (Sequence[float]): Веса.
        J (int): Число сегментов.
        mode (Readout | str): mean или sum.

    Raises:
        WidthMismatchError: Разные ширины, длины не равны J или отсутствует эмбеддинг с ненулевым весом.

    Returns:
        Tensor: Эмбеддинг графа.
    """
    if len(embeddings) != J or len(weights) != J:
        raise WidthMismatchError(f"aggregate() needs {J} embeddings and weights, got {len(embeddings)}/{len(weights)}")

    vectors: list[Tensor] = []
    active: list[float] = []
    for j, (embedding, weight) in enumerate(zip(embeddings, weights, strict=True)):
        if weight == 0.0:
            continue
        if embedding is None:
            raise WidthMismatchError(f"segment {j} has weight {weight} but no embedding")
        vectors.append(embedding)
        active.append(weight)

    return ops.weighted_sum(vectors, active, divisor=float(J) if Readout(mode) is Readout.MEAN else None)
