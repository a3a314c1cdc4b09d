"""
Таблица исторических эмбеддингов сегментов.
"""

import threading
from dataclasses import dataclass, field
from typing import Any, NamedTuple

import numpy as np

from apps.common.exceptions import DatasetIOError, WidthMismatchError
from apps.common.types import FloatArray, IntArray
from apps.common.utils.serialization import decode_array, encode_array
from apps.graphs.types import freeze

TableKey = tuple[int, int]


class TableEntry(NamedTuple):
    """Запись таблицы: вектор (read-only) и итерация записи."""

    vector: FloatArray
    written_at: int


class Lookup(NamedTuple):
    """Результат чтения: сохранённый вектор и его устаревание в итерациях."""

    embedding: FloatArray
    staleness: int


class EmbeddingTable:
    """
    Отображение (graph_id, segment_id) -> (эмбеддинг, итерация записи).

    Счётчик итераций увеличивается ровно один раз на шаг оптимизатора основного обучения.
    Запись заменяет кортеж целиком под блокировкой, поэтому читатель никогда
    не видит наполовину записанный вектор.

    Attributes:
        width (int): Ширина эмбеддинга d_h.
        current_iteration (int): Текущая итерация.
        lookups (int): Число выполненных чтений.
    """

    def __init__(self, width: int, current_iteration: int = 0) -> None:
        self.width = width
        self.current_iteration = current_iteration
        self.lookups = 0
        self._entries: dict[TableKey, TableEntry] = {}
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._entries)

    def __contains__(self, key: object) -> bool:
        return key in self._entries

    def keys(self) -> list[TableKey]:
        with self._lock:
            return sorted(self._entries)

    def lookup(self, graph_id: int, segment_id: int) -> Lookup | None:
        """
        Возвращает сохранённый вектор без каких-либо вычислений модели.

        Returns:
            Lookup | None: (вектор, устаревание) или None, если ключ не записывался.
        """
        with self._lock:
            self.lookups += 1
            entry = self._entries.get((graph_id, segment_id))

        if entry is None:
            return None
        return Lookup(embedding=entry.vector, staleness=self.current_iteration - entry.written_at)

    def insert_or_update(self, graph_id: int, segment_id: int, embedding: FloatArray) -> None:
        """
        Записывает вектор (копию) с written_at = current_iteration.

        Raises:
            WidthMismatchError: Ширина вектора не равна d_h.
        """
        vector = np.array(embedding, dtype=np.float64)

        if vector.shape != (self.width,):
            raise WidthMismatchError(f"Embedding shape {vector.shape} != ({self.width},)")

        entry = TableEntry(vector=freeze(vector), written_at=self.current_iteration)
        with self._lock:
            self._entries[(graph_id, segment_id)] = entry

    def advance(self, steps: int = 1) -> None:
        """Сдвигает счётчик итераций (один раз на шаг оптимизатора)."""
        with self._lock:
            self.current_iteration += steps

    def staleness_values(self) -> IntArray:
        """Устаревание всех записей в порядке ключей."""
        with self._lock:
            return np.array(
                [self.current_iteration - self._entries[key].written_at for key in sorted(self._entries)],
                dtype=np.int64,
            )

    def snapshot(self) -> dict[str, Any]:
        """
        JSON-снимок таблицы: ключи "graph_id:segment_id", векторы в hex.
        """
        with self._lock:
            return {
                "width": self.width,
                "current_iteration": self.current_iteration,
                "entries": {
                    f"{g}:{s}": {"written_at": entry.written_at, "vector": encode_array(entry.vector)}
                    for (g, s), entry in sorted(self._entries.items())
                },
            }

    @classmethod
    def restore(cls, snapshot: dict[str, Any]) -> "EmbeddingTable":
        """
        Восстанавливает таблицу из снимка.

        Raises:
            DatasetIOError: Повреждённый снимок.
        """
        try:
            table = cls(width=int(snapshot["width"]), current_iteration=int(snapshot["current_iteration"]))
            for key, item in snapshot["entries"].items():
                graph_id, segment_id = (int(part) for part in key.split(":"))
                vector = decode_array(item["vector"])
                table._entries[(graph_id, segment_id)] = TableEntry(vector=freeze(vector), written_at=int(item["written_at"]))
        except (KeyError, ValueError, TypeError) as exc:
            raise DatasetIOError(f"Corrupted embedding table snapshot: {exc}") from exc

        return table


@dataclass(frozen=True, slots=True)
class StalenessStats:
    """Статистика устаревания записей таблицы."""

    max: int
    mean: float
    histogram: dict[int, int] = field(default_factory=dict)

    def as_dict(self) -> dict[str, Any]:
        return {"max": self.max, "mean": self.mean, "histogram": {str(k): v for k, v in self.histogram.items()}}
