"""
Селекторы (Read Logic) разбиений: статистика качества и сводки по датасету.
"""

from collections import Counter
from collections.abc import Sequence

import numpy as np
from pydantic import BaseModel

from apps.partition.types import PartitionStats, SegmentedGraph


def partition_stats(sg: SegmentedGraph) -> PartitionStats:
    """
    Статистика разбиения одного графа.

    edge_cut_ratio - доля рёбер родителя, не попавших ни в один сегмент (для vertex-cut всегда 0).
    replication_factor - сумма размеров сегментов к числу узлов родителя (для edge-cut всегда 1).

    Args:
        sg (SegmentedGraph): Разложение.

    Returns:
        PartitionStats: Статистика.
    """
    kept_edges = sum(segment.edge_count for segment in sg.segments)
    covered_nodes = sum(segment.node_count for segment in sg.segments)

    edge_cut_ratio = (sg.parent_edge_count - kept_edges) / sg.parent_edge_count if sg.parent_edge_count else 0.0
    replication_factor = covered_nodes / sg.parent_node_count if sg.parent_node_count else 1.0

    return PartitionStats(edge_cut_ratio=edge_cut_ratio, replication_factor=replication_factor, sizes=sg.segment_sizes)


class PartitionSummary(BaseModel):
    """Сводка разбиений датасета для CLI."""

    method: str
    max_segment_nodes: int
    graphs: int
    segments_total: int
    j_histogram: dict[int, int]
    mean_edge_cut_ratio: float
    mean_replication_factor: float
    max_segment_size: int


def summarize_partitions(segmented: Sequence[SegmentedGraph], max_segment_nodes: int) -> PartitionSummary:
    """
    Агрегирует статистику разбиений по набору графов.

    Args:
        segmented (Sequence[SegmentedGraph]): Разложения.
        max_segment_nodes (int): Ограничение размера сегмента.

    Returns:
        PartitionSummary: Распределение J и средние показатели.
    """
    stats = [partition_stats(sg) for sg in segmented]

    return PartitionSummary(
        method=segmented[0].method.value if segmented else "",
        max_segment_nodes=max_segment_nodes,
        graphs=len(segmented),
        segments_total=sum(s.J for s in stats),
        j_histogram=dict(sorted(Counter(s.J for s in stats).items())),
        mean_edge_cut_ratio=float(np.mean([s.edge_cut_ratio for s in stats])) if stats else 0.0,
        mean_replication_factor=float(np.mean([s.replication_factor for s in stats])) if stats else 1.0,
        max_segment_size=max((max(s.sizes) for s in stats if s.sizes), default=0),
    )
