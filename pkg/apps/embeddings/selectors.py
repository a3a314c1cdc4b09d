"""
Селекторы таблицы эмбеддингов.
"""

import numpy as np

from apps.common.exceptions import EmptyTableError
from apps.embeddings.types import EmbeddingTable, StalenessStats


def staleness_stats(table: EmbeddingTable) -> StalenessStats:
    """
    Максимум, среднее и гистограмма текущего устаревания записей.

    Args:
        table (EmbeddingTable): Таблица.

    Raises:
        EmptyTableError: Таблица пуста.

    Returns:
        StalenessStats: Статистика.
    """
    values = table.staleness_values()

    if values.size == 0:
        raise EmptyTableError("staleness_stats() on an empty embedding table")

    levels, counts = np.unique(values, return_counts=True)
    return StalenessStats(
        max=int(values.max()),
        mean=float(values.mean()),
        histogram={int(level): int(count) for level, count in zip(levels, counts, strict=True)},
    )
