"""
Сервисы (Write Logic) графового ядра.

Построение нормализованных графов из записей и сохранение датасета в JSON-lines.
"""

import json
import os
import tempfile
from collections.abc import Iterable, Sequence
from pathlib import Path

import numpy as np
from loguru import logger as log
from scipy import sparse

from apps.common.exceptions import DatasetIOError, GraphFormatError
from apps.graphs.schemas import GraphRecord, LabelRecord, SplitRecord
from apps.graphs.types import ClassLabel, Dataset, Graph, Label, RegressionLabel, Split, Task, freeze


def normalize_adjacency(node_count: int, edges: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """
    Симметризует список рёбер, удаляет петли и дубликаты.

    Args:
        node_count (int): Число узлов.
        edges (np.ndarray): Массив рёбер формы (m, 2).

    Raises:
        GraphFormatError: Если конец ребра вне [0, node_count).

    Returns:
        tuple[np.ndarray, np.ndarray]: CSR (indptr, indices) с отсортированными строками.
    """
    edges = np.asarray(edges, dtype=np.int64).reshape(-1, 2)

    if edges.size and (edges.min() < 0 or edges.max() >= node_count):
        bad = edges[(edges < 0).any(axis=1) | (edges >= node_count).any(axis=1)][0]
        raise GraphFormatError(
            f"Edge endpoint out of range: ({bad[0]}, {bad[1]}) for {node_count} nodes",
            details={"edge": bad.tolist(), "num_nodes": node_count},
        )

    # Петли отбрасываем
    edges = edges[edges[:, 0] != edges[:, 1]]

    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    data = np.ones(rows.shape[0], dtype=np.int8)

    # coo -> csr суммирует дубликаты, так что каждое ребро остаётся один раз в каждом направлении
    adjacency = sparse.coo_matrix((data, (rows, cols)), shape=(node_count, node_count)).tocsr()
    adjacency.sum_duplicates()
    adjacency.sort_indices()

    return adjacency.indptr.astype(np.int64), adjacency.indices.astype(np.int64)


def _build_label(record: LabelRecord, num_classes: int | None) -> Label:
    if record.class_index is not None:
        classes = record.num_classes or num_classes
        if classes is None:
            raise GraphFormatError("num_classes is unknown for a classification label")
        return ClassLabel(class_index=record.class_index, num_classes=classes)

    assert record.target is not None  # Гарантирует LabelRecord.check_kind
    return RegressionLabel(target=float(record.target))


def build_graph(record: GraphRecord, graph_id: int | None = None, num_classes: int | None = None) -> Graph:
    """
    Строит нормализованный неизменяемый граф из файловой записи.

    Args:
        record (GraphRecord): Валидированная запись.
        graph_id (int | None): Плотный идентификатор (по умолчанию record.id).
        num_classes (int | None): Число классов датасета, если запись его не содержит.

    Raises:
        GraphFormatError: Концы рёбер вне диапазона или несовпадение числа/ширины строк признаков.

    Returns:
        Graph: Граф с симметричной CSR-смежностью.
    """
    node_count = record.num_nodes

    if len(record.features) != node_count:
        raise GraphFormatError(
            f"Feature row count {len(record.features)} != num_nodes {node_count}",
            details={"graph_id": record.id},
        )

    widths = {len(row) for row in record.features}
    if len(widths) > 1:
        raise GraphFormatError(f"Ragged feature rows in graph {record.id}: widths {sorted(widths)}")

    features = np.asarray(record.features, dtype=np.float64).reshape(node_count, widths.pop() if widths else 0)

    if not np.isfinite(features).all():
        raise GraphFormatError(f"Non-finite feature values in graph {record.id}")

    return graph_from_arrays(
        graph_id=record.id if graph_id is None else graph_id,
        edges=np.asarray(record.edges, dtype=np.int64),
        features=features,
        label=_build_label(record.label, num_classes),
        group_id=record.group,
    )


def graph_from_arrays(
    graph_id: int,
    edges: np.ndarray,
    features: np.ndarray,
    label: Label,
    group_id: int | None = None,
) -> Graph:
    """
    Строит граф из массива рёбер и матрицы признаков (с нормализацией смежности).

    Args:
        graph_id (int): Идентификатор.
        edges (np.ndarray): Рёбра (m, 2) в любом порядке и направлении.
        features (np.ndarray): Признаки (n, d).
        label (Label): Метка.
        group_id (int | None): Группа.

    Returns:
        Graph: Неизменяемый граф.
    """
    features = np.array(features, dtype=np.float64)
    indptr, indices = normalize_adjacency(features.shape[0], edges)

    return Graph(
        graph_id=graph_id,
        node_count=int(features.shape[0]),
        indptr=freeze(indptr),
        indices=freeze(indices),
        features=freeze(features),
        label=label,
        group_id=group_id,
    )


def label_to_record(label: Label) -> LabelRecord:
    """Метка в файловом виде."""
    if isinstance(label, ClassLabel):
        return LabelRecord(class_index=label.class_index, num_classes=label.num_classes)
    return LabelRecord(target=label.target)


def label_from_record(record: LabelRecord, num_classes: int | None = None) -> Label:
    """Метка из файлового вида."""
    return _build_label(record, num_classes)


def graph_to_record(graph: Graph) -> GraphRecord:
    """
    Обратное преобразование графа в файловую запись (рёбра u < v, порядок CSR).

    Args:
        graph (Graph): Граф.

    Returns:
        GraphRecord: Запись для JSON-lines.
    """
    label = label_to_record(graph.label)

    return GraphRecord(
        id=graph.graph_id,
        num_nodes=graph.node_count,
        edges=graph.edge_list(),
        features=graph.features.tolist(),
        label=label,
        group=graph.group_id,
    )


def make_dataset(graphs: Sequence[Graph], split: Split | None = None) -> Dataset:
    """
    Собирает датасет, проверяя плотность идентификаторов и согласованность задачи.

    Args:
        graphs (Sequence[Graph]): Графы с graph_id == позиции.
        split (Split | None): Разбиение (по умолчанию всё в train).

    Raises:
        GraphFormatError: Смешанные типы меток, разная ширина признаков или неплотные id.

    Returns:
        Dataset: Неизменяемый датасет.
    """
    kinds = {type(graph.label) for graph in graphs}
    if len(kinds) > 1:
        raise GraphFormatError("Dataset mixes classification and regression labels")

    task = Task.RANKING if kinds == {RegressionLabel} else Task.CLASSIFICATION

    widths = {graph.feature_width for graph in graphs}
    if len(widths) > 1:
        raise GraphFormatError(f"Feature width mismatch across graphs: {sorted(widths)}")

    for position, graph in enumerate(graphs):
        if graph.graph_id != position:
            raise GraphFormatError(f"Graph ids must be dense: position {position} holds id {graph.graph_id}")

    if split is None:
        split = Split(train=tuple(range(len(graphs))))

    return Dataset(graphs=tuple(graphs), task=task, split=split)


def split_path_for(path: Path) -> Path:
    """
    Путь к файлу разбиения рядом с файлом графов: graphs.jsonl -> graphs.split.json.
    """
    return path.with_name(f"{path.stem}.split.json")


def _atomic_write_lines(path: Path, lines: Iterable[str]) -> None:
    """Пишет строки во временный файл рядом и атомарно подменяет целевой."""
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")

    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            for line in lines:
                fh.write(line)
                fh.write("\n")
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def save_dataset(dataset: Dataset, path: Path) -> None:
    """
    Сохраняет датасет: JSON-lines графов + JSON разбиения.

    Запись детерминирована (повторное сохранение даёт побайтно тот же файл),
    вещественные числа пишутся в кратчайшем точном представлении.

    Args:
        dataset (Dataset): Датасет.
        path (Path): Путь к файлу графов (*.jsonl).

    Raises:
        DatasetIOError: Ошибка записи.
    """
    log.info(f"Saving dataset: {len(dataset)} graphs -> {path}")

    try:
        _atomic_write_lines(
            path,
            (
                json.dumps(graph_to_record(graph).model_dump(by_alias=True, exclude_none=True), separators=(",", ":"))
                for graph in dataset.graphs
            ),
        )

        split = SplitRecord(train=list(dataset.split.train), val=list(dataset.split.val), test=list(dataset.split.test))
        _atomic_write_lines(split_path_for(path), [json.dumps(split.model_dump(), separators=(",", ":"))])

    except OSError as exc:
        log.error(f"Error saving dataset to {path}: {exc}")
        raise DatasetIOError(f"Cannot write dataset to {path}: {exc}") from exc
