"""
Утилиты для стабильного хеширования конфигов и датасетов.
"""

import hashlib
import json
from pathlib import Path
from typing import Any

import numpy as np


def canonical_json(payload: Any) -> str:
    """
    Канонический JSON: сортированные ключи, без пробелов.

    Args:
        payload (Any): JSON-сериализуемый объект.

    Returns:
        str: Строка, одинаковая для равных объектов.
    """
    return json.dumps(payload, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def stable_hash(payload: Any, length: int = 16) -> str:
    """
    SHA-256 от канонического JSON.

    Args:
        payload (Any): JSON-сериализуемый объект.
        length (int): Длина возвращаемого hex-префикса.

    Returns:
        str: Hex-префикс хеша.
    """
    return hashlib.sha256(canonical_json(payload).encode("utf-8")).hexdigest()[:length]


def file_hash(path: Path, length: int = 16) -> str:
    """
    SHA-256 содержимого файла (читается блоками).

    Args:
        path (Path): Путь к файлу.
        length (int): Длина hex-префикса.

    Returns:
        str: Hex-префикс хеша.
    """
    digest = hashlib.sha256()

    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)

    return digest.hexdigest()[:length]


def arrays_hash(arrays: dict[str, np.ndarray]) -> str:
    """
    Хеш набора именованных массивов (порядок имён фиксирован сортировкой).

    Используется, чтобы проверять побитовую неизменность параметров (например, замороженного backbone).

    Args:
        arrays (dict[str, np.ndarray]): Массивы по именам.

    Returns:
        str: Полный hex SHA-256.
    """
    digest = hashlib.sha256()

    for name in sorted(arrays):
        array = np.ascontiguousarray(arrays[name])
        digest.update(name.encode("utf-8"))
        digest.update(str(array.shape).encode("utf-8"))
        digest.update(array.tobytes())

    return digest.hexdigest()
