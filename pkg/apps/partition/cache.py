"""
Дисковый кэш разбиений.

Один JSON-lines файл на ключ (хеш датасета, метод, ограничение, сид).
Кодирование рёбер и признаков - как в файлах графов.
"""

import json
import os
import tempfile
from pathlib import Path

import numpy as np
from loguru import logger as log
from pydantic import ValidationError

from apps.common.exceptions import DatasetIOError
from apps.common.utils.hashing import stable_hash
from apps.graphs.services import label_from_record, label_to_record, normalize_adjacency
from apps.graphs.types import Dataset, freeze
from apps.partition.schemas import SegmentedGraphRecord, SegmentRecord
from apps.partition.services import partition_dataset
from apps.partition.types import PartitionMethod, Segment, SegmentedGraph


def cache_key(dataset_hash: str, method: PartitionMethod | str, max_segment_nodes: int, seed: int) -> str:
    """Ключ кэша разбиения."""
    return stable_hash(
        {"dataset": dataset_hash, "method": str(method), "cap": max_segment_nodes, "seed": seed},
    )


def cache_path(cache_dir: Path, key: str) -> Path:
    return cache_dir / f"segments-{key}.jsonl"


def _to_record(sg: SegmentedGraph) -> SegmentedGraphRecord:
    return SegmentedGraphRecord(
        id=sg.parent,
        num_nodes=sg.parent_node_count,
        num_edges=sg.parent_edge_count,
        method=sg.method.value,
        label=label_to_record(sg.label),
        group=sg.group_id,
        segments=[
            SegmentRecord(
                segment_id=segment.segment_id,
                nodes=segment.local_nodes.tolist(),
                edges=segment.edge_list(),
                features=segment.features.tolist(),
            )
            for segment in sg.segments
        ],
    )


def _from_record(record: SegmentedGraphRecord) -> SegmentedGraph:
    segments = []

    for item in record.segments:
        nodes = np.asarray(item.nodes, dtype=np.int64)
        indptr, indices = normalize_adjacency(nodes.shape[0], np.asarray(item.edges, dtype=np.int64))
        features = np.asarray(item.features, dtype=np.float64).reshape(nodes.shape[0], -1)
        segments.append(
            Segment(
                parent_graph_id=record.id,
                segment_id=item.segment_id,
                local_nodes=freeze(nodes),
                indptr=freeze(indptr),
                indices=freeze(indices),
                features=freeze(features),
            )
        )

    return SegmentedGraph(
        parent=record.id,
        parent_node_count=record.num_nodes,
        parent_edge_count=record.num_edges,
        method=PartitionMethod(record.method),
        segments=tuple(segments),
        label=label_from_record(record.label),
        group_id=record.group,
    )


def write_segments(path: Path, segmented: list[SegmentedGraph]) -> None:
    """
    Атомарно пишет разложения в JSON-lines.

    Raises:
        DatasetIOError: Ошибка записи.
    """
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")

    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for sg in segmented:
                fh.write(json.dumps(_to_record(sg).model_dump(by_alias=True, exclude_none=True), separators=(",", ":")))
                fh.write("\n")
        os.replace(tmp_name, path)
    except OSError as exc:
        Path(tmp_name).unlink(missing_ok=True)
        raise DatasetIOError(f"Cannot write segment cache {path}: {exc}") from exc


def read_segments(path: Path) -> list[SegmentedGraph]:
    """
    Читает разложения из JSON-lines.

    Raises:
        DatasetIOError: Файл не найден или повреждён (с номером строки).
    """
    if not path.exists():
        raise DatasetIOError(f"Segment cache not found: {path}")

    segmented = []
    with path.open("r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                segmented.append(_from_record(SegmentedGraphRecord.model_validate_json(line)))
            except ValidationError as exc:
                raise DatasetIOError(f"{path}:{line_number}: invalid segment record", details={"line": line_number}) from exc

    return segmented


def load_or_partition(
    dataset: Dataset,
    dataset_hash: str,
    method: PartitionMethod | str,
    max_segment_nodes: int,
    seed: int,
    cache_dir: Path | None,
    threads: int = 1,
) -> tuple[list[SegmentedGraph], bool]:
    """
    Возвращает разложения датасета из кэша или считает и сохраняет их.

    Args:
        dataset (Dataset): Датасет.
        dataset_hash (str): Отпечаток файлов датасета.
        method (PartitionMethod | str): Метод разбиения.
        max_segment_nodes (int): Ограничение размера сегмента.
        seed (int): Сид.
        cache_dir (Path | None): Директория кэша (None - без кэша).
        threads (int): Потоки для разбиения.

    Returns:
        tuple[list[SegmentedGraph], bool]: Разложения (индекс = graph_id) и признак попадания в кэш.
    """
    if cache_dir is None:
        return partition_dataset(dataset, method, max_segment_nodes, seed, threads), False

    path = cache_path(cache_dir, cache_key(dataset_hash, method, max_segment_nodes, seed))

    if path.exists():
        log.info(f"Segment cache hit: {path.name}")
        segmented = read_segments(path)
        if len(segmented) == len(dataset):
            return segmented, True
        log.warning(f"Segment cache {path.name} holds {len(segmented)} graphs, dataset has {len(dataset)}; rebuilding")

    segmented = partition_dataset(dataset, method, max_segment_nodes, seed, threads)
    write_segments(path, segmented)
    log.info(f"Segment cache written: {path.name}")

    return segmented, False
