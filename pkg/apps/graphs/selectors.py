"""
Селекторы (Read Logic) графового ядра.

Загрузка датасета из JSON-lines и детерминированный порядок обхода.
"""

import json
from pathlib import Path
from typing import Literal

import numpy as np
from loguru import logger as log
from pydantic import ValidationError

from apps.common.exceptions import DatasetIOError, GraphFormatError
from apps.common.utils.hashing import file_hash
from apps.graphs.schemas import GraphRecord, SplitRecord
from apps.graphs.services import build_graph, make_dataset, split_path_for
from apps.graphs.types import Dataset, Split, SplitName

GraphFileFormat = Literal["jsonl"]


def _read_records(path: Path) -> list[GraphRecord]:
    records: list[GraphRecord] = []

    with path.open("r", encoding="utf-8") as fh:
        for line_number, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                records.append(GraphRecord.model_validate(json.loads(line)))
            except json.JSONDecodeError as exc:
                raise DatasetIOError(
                    f"{path}:{line_number}: invalid JSON: {exc.msg}", details={"line": line_number}
                ) from exc
            except ValidationError as exc:
                raise DatasetIOError(
                    f"{path}:{line_number}: invalid graph record",
                    details={"line": line_number, "errors": json.loads(exc.json())},
                ) from exc

    return records


def _read_split(path: Path, id_map: dict[int, int]) -> Split | None:
    if not path.exists():
        return None

    try:
        record = SplitRecord.model_validate_json(path.read_text(encoding="utf-8"))
    except ValidationError as exc:
        raise DatasetIOError(f"{path}: invalid split file", details=json.loads(exc.json())) from exc

    def remap(ids: list[int]) -> tuple[int, ...]:
        unknown = [i for i in ids if i not in id_map]
        if unknown:
            raise GraphFormatError(f"{path}: split references unknown graph ids {unknown[:5]}")
        return tuple(id_map[i] for i in ids)

    return Split(train=remap(record.train), val=remap(record.val), test=remap(record.test))


def load_dataset(path: Path, format: GraphFileFormat = "jsonl") -> Dataset:
    """
    Загружает датасет из JSON-lines файла и соседнего файла разбиения.

    Файловые id графов переотображаются в плотные [0, n) в порядке строк файла.
    Смежность нормализуется (симметризация, без петель и дубликатов).
    Если файла разбиения нет, все графы попадают в train.

    Args:
        path (Path): Путь к *.jsonl файлу графов.
        format (GraphFileFormat): Формат файла (поддерживается "jsonl").

    Raises:
        DatasetIOError: Файл не найден или строка не парсится (с номером строки).
        GraphFormatError: Нарушение инвариантов графа.

    Returns:
        Dataset: Неизменяемый датасет.
    """
    if format != "jsonl":
        raise DatasetIOError(f"Unsupported graph file format: {format}")

    if not path.exists():
        raise DatasetIOError(f"Dataset file not found: {path}")

    log.info(f"Loading dataset from {path}")

    records = _read_records(path)

    id_map: dict[int, int] = {}
    for record in records:
        if record.id in id_map:
            raise GraphFormatError(f"{path}: duplicate graph id {record.id}")
        id_map[record.id] = len(id_map)

    # Число классов: из записей, иначе max(class) + 1
    declared = {r.label.num_classes for r in records if r.label.num_classes is not None}
    observed = [r.label.class_index for r in records if r.label.class_index is not None]
    num_classes = max(declared) if declared else (max(max(observed) + 1, 2) if observed else None)

    graphs = [build_graph(record, graph_id=id_map[record.id], num_classes=num_classes) for record in records]
    dataset = make_dataset(graphs, split=_read_split(split_path_for(path), id_map))

    log.info(f"Dataset loaded: {len(dataset)} graphs, task={dataset.task.value}")
    return dataset


def dataset_fingerprint(path: Path) -> str:
    """
    Хеш содержимого файлов датасета (графы + разбиение) для ключей кэша.

    Args:
        path (Path): Путь к *.jsonl файлу графов.

    Returns:
        str: Hex-префикс хеша.
    """
    split_path = split_path_for(path)
    parts = [file_hash(path)]

    if split_path.exists():
        parts.append(file_hash(split_path))

    return "-".join(parts)


def graph_order(dataset: Dataset, split: SplitName | str, rng: np.random.Generator | None = None) -> list[int]:
    """
    Порядок обхода графов разбиения.

    Без генератора - порядок файла; с генератором - перестановка, детерминированная его состоянием.

    Args:
        dataset (Dataset): Датасет.
        split (SplitName | str): Имя разбиения.
        rng (np.random.Generator | None): Генератор для перемешивания.

    Returns:
        list[int]: Идентификаторы графов.
    """
    ids = list(dataset.split.get(split))

    if rng is None:
        return ids

    return [ids[i] for i in rng.permutation(len(ids))]
