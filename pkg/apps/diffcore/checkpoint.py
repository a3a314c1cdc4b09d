"""
Чекпоинт: JSON-контейнер параметров, состояния оптимизатора, RNG и произвольного состояния запуска.

Вещественные числа хранятся через float.hex, поэтому запись и чтение побитно точны.
"""

import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from loguru import logger as log

from apps.common.exceptions import DatasetIOError
from apps.common.types import FloatArray
from apps.common.utils.serialization import decode_array, encode_array
from apps.diffcore.layers import Model, build_model
from apps.diffcore.types import ModelConfig

SCHEMA_VERSION = 1


@dataclass
class Checkpoint:
    """
    Содержимое чекпоинта.

    Attributes:
        model_config (ModelConfig): Архитектура.
        params (dict[str, FloatArray]): Значения параметров.
        first_moments (dict[str, FloatArray]): Первые моменты Adam.
        second_moments (dict[str, FloatArray]): Вторые моменты Adam.
        steps (dict[str, int]): Счётчики шагов по параметрам.
        epoch (int): Число завершённых эпох.
        config_hash (str): Хеш конфигурации запуска.
        state (dict[str, Any]): Состояние запуска (RNG, таблица, журнал, план).
    """

    model_config: ModelConfig
    params: dict[str, FloatArray]
    first_moments: dict[str, FloatArray]
    second_moments: dict[str, FloatArray]
    steps: dict[str, int]
    epoch: int
    config_hash: str = ""
    state: dict[str, Any] = field(default_factory=dict)

    @classmethod
    def capture(cls, model: Model, epoch: int, config_hash: str = "", state: dict[str, Any] | None = None) -> "Checkpoint":
        """Снимок модели (копии массивов)."""
        store = model.params
        return cls(
            model_config=model.config,
            params=store.values(),
            first_moments={name: store.first_moments[name].copy() for name in store},
            second_moments={name: store.second_moments[name].copy() for name in store},
            steps=dict(store.steps),
            epoch=epoch,
            config_hash=config_hash,
            state=state or {},
        )

    def restore_model(self) -> Model:
        """
        Пересобирает модель и загружает в неё параметры и состояние оптимизатора.

        Returns:
            Model: Модель, побитно совпадающая с сохранённой.
        """
        model = build_model(self.model_config)
        model.params.load_values(self.params)

        for name in model.params:
            model.params.first_moments[name] = self.first_moments[name].copy()
            model.params.second_moments[name] = self.second_moments[name].copy()
            model.params.steps[name] = self.steps[name]

        return model


def save_checkpoint(checkpoint: Checkpoint, path: Path) -> None:
    """
    Атомарно записывает чекпоинт в JSON.

    Raises:
        DatasetIOError: Ошибка записи.
    """
    payload = {
        "schema_version": SCHEMA_VERSION,
        "config_hash": checkpoint.config_hash,
        "epoch": checkpoint.epoch,
        "model_config": checkpoint.model_config.model_dump(mode="json"),
        "params": {name: encode_array(value) for name, value in checkpoint.params.items()},
        "optimizer": {
            "first_moments": {name: encode_array(value) for name, value in checkpoint.first_moments.items()},
            "second_moments": {name: encode_array(value) for name, value in checkpoint.second_moments.items()},
            "steps": checkpoint.steps,
        },
        "state": checkpoint.state,
    }

    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, separators=(",", ":"))
        os.replace(tmp_name, path)
    except OSError as exc:
        log.error(f"Error writing checkpoint {path}: {exc}")
        raise DatasetIOError(f"Cannot write checkpoint {path}: {exc}") from exc

    log.info(f"Checkpoint saved: {path} (epoch {checkpoint.epoch})")


def load_checkpoint(path: Path) -> Checkpoint:
    """
    Читает чекпоинт.

    Raises:
        DatasetIOError: Файл отсутствует, повреждён или другой версии схемы.

    Returns:
        Checkpoint: Содержимое.
    """
    if not path.exists():
        raise DatasetIOError(f"Checkpoint not found: {path}")

    try:
        payload = json.loads(path.read_text(encoding="utf-8"))

        if payload.get("schema_version") != SCHEMA_VERSION:
            raise DatasetIOError(f"Unsupported checkpoint schema: {payload.get('schema_version')}")

        optimizer = payload["optimizer"]
        return Checkpoint(
            model_config=ModelConfig.model_validate(payload["model_config"]),
            params={name: decode_array(value) for name, value in payload["params"].items()},
            first_moments={name: decode_array(value) for name, value in optimizer["first_moments"].items()},
            second_moments={name: decode_array(value) for name, value in optimizer["second_moments"].items()},
            steps={name: int(step) for name, step in optimizer["steps"].items()},
            epoch=int(payload["epoch"]),
            config_hash=str(payload.get("config_hash", "")),
            state=payload.get("state", {}),
        )
    except (json.JSONDecodeError, KeyError, ValueError, TypeError) as exc:
        raise DatasetIOError(f"Corrupted checkpoint {path}: {exc}") from exc
