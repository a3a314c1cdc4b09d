"""
Доменные типы графового ядра: Label, Graph, Dataset.

Все структуры неизменяемы после построения: массивы помечаются как read-only,
поэтому графы безопасно читать из нескольких потоков.
"""

from dataclasses import dataclass, field
from enum import StrEnum
from functools import cached_property

import numpy as np
from scipy import sparse

from apps.common.types import FloatArray, IntArray


class Task(StrEnum):
    """Тип задачи над датасетом."""

    CLASSIFICATION = "classification"
    RANKING = "regression-ranking"


class SplitName(StrEnum):
    """Имена разбиений датасета."""

    TRAIN = "train"
    VAL = "val"
    TEST = "test"


@dataclass(frozen=True, slots=True)
class ClassLabel:
    """Метка класса графа."""

    class_index: int
    num_classes: int

    def __post_init__(self) -> None:
        if not 0 <= self.class_index < self.num_classes:
            raise ValueError(f"class_index {self.class_index} out of range for {self.num_classes} classes")


@dataclass(frozen=True, slots=True)
class RegressionLabel:
    """Вещественная цель графа (задача ранжирования)."""

    target: float


Label = ClassLabel | RegressionLabel


def freeze[A: np.ndarray](array: A) -> A:
    """Помечает массив как read-only и возвращает его же."""
    array.flags.writeable = False
    return array


@dataclass(frozen=True)
class Graph:
    """
    Неориентированный граф с признаками узлов и меткой уровня графа.

    Смежность хранится в CSR-форме симметрично: каждое неориентированное ребро
    присутствует в строках обоих концов. Петель и дубликатов нет.

    Attributes:
        graph_id (int): Плотный идентификатор графа в датасете.
        node_count (int): Число узлов.
        indptr (IntArray): CSR-указатели строк, длина node_count + 1.
        indices (IntArray): CSR-индексы соседей (в каждой строке отсортированы).
        features (FloatArray): Матрица признаков node_count x d_in.
        label (Label): Метка графа.
        group_id (int | None): Группа (базовый граф) для задачи ранжирования.
    """

    graph_id: int
    node_count: int
    indptr: IntArray
    indices: IntArray
    features: FloatArray
    label: Label
    group_id: int | None = None

    @property
    def feature_width(self) -> int:
        return int(self.features.shape[1])

    @property
    def edge_count(self) -> int:
        """Число неориентированных рёбер."""
        return int(self.indices.shape[0]) // 2

    def degree(self, node: int) -> int:
        return int(self.indptr[node + 1] - self.indptr[node])

    def neighbors(self, node: int) -> IntArray:
        return self.indices[self.indptr[node] : self.indptr[node + 1]]

    @cached_property
    def degrees(self) -> IntArray:
        return freeze(np.diff(self.indptr).astype(np.int64))

    def edge_list(self) -> list[tuple[int, int]]:
        """
        Список неориентированных рёбер (u < v) в порядке CSR.

        Returns:
            list[tuple[int, int]]: Пары концов.
        """
        rows = np.repeat(np.arange(self.node_count, dtype=np.int64), np.diff(self.indptr))
        mask = rows < self.indices
        return list(zip(rows[mask].tolist(), self.indices[mask].tolist(), strict=True))

    @cached_property
    def mean_operator(self) -> sparse.csr_matrix:
        """Row-нормированная матрица смежности (среднее по соседям; пустые строки - нули)."""
        return mean_operator(self.node_count, self.indptr, self.indices)

    @cached_property
    def closed_mean_operator(self) -> sparse.csr_matrix:
        """Среднее по замкнутой окрестности (для GCN-слоя)."""
        return closed_mean_operator(self.node_count, self.indptr, self.indices)


def mean_operator(node_count: int, indptr: IntArray, indices: IntArray) -> sparse.csr_matrix:
    """
    Строит оператор среднего по соседям для CSR-смежности.

    Args:
        node_count (int): Число узлов.
        indptr (IntArray): CSR-указатели.
        indices (IntArray): CSR-индексы.

    Returns:
        sparse.csr_matrix: Матрица M, (M @ X)[v] = mean_{u in N(v)} X[u].
    """
    degrees = np.diff(indptr).astype(np.float64)
    inverse = np.divide(1.0, degrees, out=np.zeros_like(degrees), where=degrees > 0)
    data = np.repeat(inverse, np.diff(indptr))
    return sparse.csr_matrix((data, indices, indptr), shape=(node_count, node_count))


@dataclass(frozen=True, slots=True)
class Split:
    """Индексы графов по разбиениям (непересекающиеся)."""

    train: tuple[int, ...] = ()
    val: tuple[int, ...] = ()
    test: tuple[int, ...] = ()

    def get(self, name: SplitName | str) -> tuple[int, ...]:
        return tuple(getattr(self, SplitName(name).value))


@dataclass(frozen=True)
class Dataset:
    """
    Упорядоченный набор графов с типом задачи и разбиением.

    Идентификаторы графов плотные: graphs[i].graph_id == i.
    """

    graphs: tuple[Graph, ...]
    task: Task
    split: Split = field(default_factory=Split)

    def __len__(self) -> int:
        return len(self.graphs)

    def __getitem__(self, graph_id: int) -> Graph:
        return self.graphs[graph_id]

    @property
    def num_classes(self) -> int | None:
        """Число классов (только для классификации)."""
        for graph in self.graphs:
            if isinstance(graph.label, ClassLabel):
                return graph.label.num_classes
        return None

    @property
    def feature_width(self) -> int | None:
        return self.graphs[0].feature_width if self.graphs else None

    def split_graphs(self, name: SplitName | str) -> list[Graph]:
        return [self.graphs[i] for i in self.split.get(name)]


def closed_mean_operator(node_count: int, indptr: IntArray, indices: IntArray) -> sparse.csr_matrix:
    """
    Оператор среднего по замкнутой окрестности (узел + соседи).

    Args:
        node_count (int): Число узлов.
        indptr (IntArray): CSR-указатели.
        indices (IntArray): CSR-индексы.

    Returns:
        sparse.csr_matrix: Матрица M, (M @ X)[v] = mean_{u in N(v) + v} X[u].
    """
    adjacency = sparse.csr_matrix(
        (np.ones(indices.shape[0], dtype=np.float64), indices, indptr), shape=(node_count, node_count)
    )
    closed = (adjacency + sparse.identity(node_count, dtype=np.float64, format="csr")).tocsr()
    inverse = 1.0 / np.diff(closed.indptr).astype(np.float64)
    return sparse.diags(inverse).dot(closed).tocsr()
