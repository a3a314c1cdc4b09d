"""
Доменные типы разбиения графов на сегменты.
"""

from dataclasses import dataclass
from enum import StrEnum
from functools import cached_property

import numpy as np
from scipy import sparse

from apps.common.types import FloatArray, IntArray
from apps.graphs.types import Label, closed_mean_operator, mean_operator


class PartitionMethod(StrEnum):
    """Семейства разбиений: edge-cut делит узлы, vertex-cut делит рёбра."""

    RANDOM_EDGE_CUT = "random-edge-cut"
    LOCALITY_EDGE_CUT = "locality-edge-cut"
    RANDOM_VERTEX_CUT = "random-vertex-cut"
    DEGREE_HASH_VERTEX_CUT = "degree-hash-vertex-cut"

    @property
    def is_vertex_cut(self) -> bool:
        return self in (PartitionMethod.RANDOM_VERTEX_CUT, PartitionMethod.DEGREE_HASH_VERTEX_CUT)


@dataclass(frozen=True)
class Segment:
    """
    Подграф ограниченного размера - единица прямого прохода и учёта памяти.

    Attributes:
        parent_graph_id (int): Идентификатор исходного графа.
        segment_id (int): Номер сегмента в [0, J).
        local_nodes (IntArray): Отсортированные индексы узлов родителя.
        indptr (IntArray): CSR-указатели локальной смежности.
        indices (IntArray): CSR-индексы локальной смежности (локальные номера).
        features (FloatArray): Строки признаков родителя для local_nodes.
    """

    parent_graph_id: int
    segment_id: int
    local_nodes: IntArray
    indptr: IntArray
    indices: IntArray
    features: FloatArray

    @property
    def node_count(self) -> int:
        return int(self.local_nodes.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.indices.shape[0]) // 2

    @property
    def feature_width(self) -> int:
        return int(self.features.shape[1])

    @property
    def key(self) -> tuple[int, int]:
        """Ключ сегмента в таблице эмбеддингов."""
        return self.parent_graph_id, self.segment_id

    def edge_list(self) -> list[tuple[int, int]]:
        """Локальные рёбра (u < v)."""
        rows = np.repeat(np.arange(self.node_count, dtype=np.int64), np.diff(self.indptr))
        mask = rows < self.indices
        return list(zip(rows[mask].tolist(), self.indices[mask].tolist(), strict=True))

    @cached_property
    def mean_operator(self) -> sparse.csr_matrix:
        return mean_operator(self.node_count, self.indptr, self.indices)

    @cached_property
    def closed_mean_operator(self) -> sparse.csr_matrix:
        return closed_mean_operator(self.node_count, self.indptr, self.indices)


@dataclass(frozen=True)
class SegmentedGraph:
    """
    Граф, разложенный на J сегментов.

    Attributes:
        parent (int): Идентификатор исходного графа.
        parent_node_count (int): Число узлов родителя.
        parent_edge_count (int): Число неориентированных рёбер родителя.
        method (PartitionMethod): Метод разбиения.
        segments (tuple[Segment, ...]): Сегменты по порядку segment_id.
        label (Label): Метка родителя.
        group_id (int | None): Группа родителя (ранжирование).
    """

    parent: int
    parent_node_count: int
    parent_edge_count: int
    method: PartitionMethod
    segments: tuple[Segment, ...]
    label: Label
    group_id: int | None = None

    @property
    def J(self) -> int:
        return len(self.segments)

    @property
    def segment_sizes(self) -> list[int]:
        return [segment.node_count for segment in self.segments]


@dataclass(frozen=True, slots=True)
class PartitionStats:
    """
    Статистика одного разбиения.

    Attributes:
        edge_cut_ratio (float): Доля рёбер родителя, отброшенных как межсегментные.
        replication_factor (float): Сумма размеров сегментов / число узлов родителя.
        sizes (list[int]): Размеры сегментов.
    """

    edge_cut_ratio: float
    replication_factor: float
    sizes: list[int]

    @property
    def J(self) -> int:
        return len(self.sizes)
