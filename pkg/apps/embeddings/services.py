"""
Сервисы таблицы эмбеддингов: полное обновление и ленивый прогрев.
"""

from collections.abc import Sequence

from loguru import logger as log

from apps.common.utils.parallel import parallel_map
from apps.diffcore.layers import Backbone, forward_segment
from apps.diffcore.types import GradMode
from apps.embeddings.types import EmbeddingTable, Lookup
from apps.partition.types import Segment, SegmentedGraph


def refresh_all(
    table: EmbeddingTable,
    backbone: Backbone,
    dataset_segments: Sequence[SegmentedGraph],
    threads: int = 1,
) -> None:
    """
    Перезаписывает каждый ключ (i, j) свежим grad-disabled эмбеддингом текущего backbone.

    Прямые проходы - чистое чтение параметров и могут идти в пуле потоков;
    запись в таблицу выполняется после объединения в порядке сегментов.

    Args:
        table (EmbeddingTable): Таблица.
        backbone (Backbone): Текущий backbone.
        dataset_segments (Sequence[SegmentedGraph]): Разложения графов.
        threads (int): Число потоков.

    Raises:
        WidthMismatchError: Ширина сегмента не совпадает с backbone.
    """
    segments = [segment for sg in dataset_segments for segment in sg.segments]
    log.info(f"Refreshing embedding table: {len(segments)} segments")

    embeddings = parallel_map(
        lambda segment: forward_segment(backbone, segment, GradMode.DISABLED).data,
        segments,
        threads,
    )

    for segment, embedding in zip(segments, embeddings, strict=True):
        table.insert_or_update(segment.parent_graph_id, segment.segment_id, embedding)


def lookup_or_warm(table: EmbeddingTable, backbone: Backbone, segment: Segment) -> Lookup:
    """
    Чтение с ленивым прогревом: отсутствующий ключ заполняется grad-disabled проходом.

    Args:
        table (EmbeddingTable): Таблица.
        backbone (Backbone): Текущий backbone.
        segment (Segment): Сегмент.

    Returns:
        Lookup: Вектор и устаревание (0 для только что прогретого ключа).
    """
    found = table.lookup(segment.parent_graph_id, segment.segment_id)

    if found is not None:
        return found

    embedding = forward_segment(backbone, segment, GradMode.DISABLED).data
    table.insert_or_update(segment.parent_graph_id, segment.segment_id, embedding)
    log.debug(f"Table warm-up for segment {segment.key}")

    return Lookup(embedding=embedding, staleness=0)
