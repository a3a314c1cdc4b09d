"""
Побитно точная JSON-сериализация массивов float64 (через float.hex).
"""

from typing import Any

import numpy as np

from apps.common.types import FloatArray


def encode_array(array: np.ndarray) -> dict[str, Any]:
    """
    Кодирует массив float64 в JSON-совместимый словарь.

    Args:
        array (np.ndarray): Массив.

    Returns:
        dict[str, Any]: {"shape": [...], "hex": [...]}.
    """
    values = np.asarray(array, dtype=np.float64)
    return {"shape": list(values.shape), "hex": [float(x).hex() for x in values.ravel().tolist()]}


def decode_array(payload: dict[str, Any]) -> FloatArray:
    """
    Восстанавливает массив, закодированный encode_array.

    Raises:
        ValueError: Повреждённые данные.
    """
    values = np.array([float.fromhex(x) for x in payload["hex"]], dtype=np.float64)
    return values.reshape(tuple(payload["shape"]))
