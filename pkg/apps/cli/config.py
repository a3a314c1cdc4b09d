"""
Конфигурация эксперимента CLI: JSON-файл плюс переопределения флагами.
"""

import json
from pathlib import Path
from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from apps.common.exceptions import ConfigError, DatasetIOError
from apps.common.utils.hashing import stable_hash
from apps.diffcore.types import LayerType, ModelConfig, Readout
from apps.graphs.types import Dataset, Task
from apps.synthdata.types import GeneratorSpec
from apps.training.types import TrainPlan

# Флаг CLI -> поле TrainPlan
PLAN_OVERRIDES = {
    "variant": "variant",
    "p": "p",
    "S": "S",
    "segments_cap": "max_segment_nodes",
    "epochs": "epochs",
    "finetune_epochs": "finetune_epochs",
    "seed": "seed",
    "partition_method": "partition_method",
    "budget_nodes": "budget_nodes",
}


class Architecture(BaseModel):
    """Архитектура модели без ширин входа и выхода (они берутся из датасета)."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    hidden_width: int = Field(default=32, ge=1)
    pre_layers: int = Field(default=1, ge=0)
    mp_layers: int = Field(default=2, ge=0)
    post_layers: int = Field(default=1, ge=0)
    layer_type: LayerType = LayerType.SAGE
    head_hidden_layers: int = Field(default=1, ge=0)

    def build(self, dataset: Dataset, seed: int) -> ModelConfig:
        """
        ModelConfig под датасет: классификация - логиты по классам и mean-readout,
        ранжирование - скаляр и sum-readout.
        """
        classification = dataset.task is Task.CLASSIFICATION
        return ModelConfig(
            in_width=dataset.feature_width or 1,
            out_width=(dataset.num_classes or 2) if classification else 1,
            readout=Readout.MEAN if classification else Readout.SUM,
            seed=seed,
            **self.model_dump(),
        )


class ExperimentConfig(BaseModel):
    """
    Конфигурация эксперимента.

    Attributes:
        dataset (Path | None): Файл датасета (JSON-lines).
        generator (GeneratorSpec | None): Спецификация генератора (если датасета нет).
        partition_seed (int): Сид разбиения.
        plan (TrainPlan): План обучения.
        architecture (Architecture): Архитектура модели.
        output_dir (Path): Директория артефактов.
        checkpoint_every (int): Период чекпоинтов в эпохах (0 - только финальный).
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    dataset: Path | None = None
    generator: GeneratorSpec | None = None
    partition_seed: int = 0
    plan: TrainPlan = Field(default_factory=TrainPlan)
    architecture: Architecture = Field(default_factory=Architecture)
    output_dir: Path = Path("runs/default")
    checkpoint_every: int = Field(default=1, ge=0)

    @model_validator(mode="after")
    def check_source(self) -> Self:
        if self.dataset is None and self.generator is None:
            raise ValueError("either 'dataset' or 'generator' must be set")
        if self.dataset is not None and not self.dataset.exists():
            raise ValueError(f"dataset file {self.dataset} does not exist")
        return self

    @property
    def config_hash(self) -> str:
        """SHA-256 канонического JSON конфигурации."""
        return stable_hash(self.model_dump(mode="json"))


def validation_error(exc: ValidationError, what: str) -> ConfigError:
    """Приводит ошибку pydantic к ConfigError со списком полей в details."""
    return ConfigError(
        f"Invalid {what}: {exc.error_count()} validation error(s)",
        details=exc.errors(include_url=False, include_context=False, include_input=False),
    )


def read_json(path: Path) -> dict[str, Any]:
    """
    Raises:
        DatasetIOError: Файл не читается или не JSON-объект.
    """
    try:
        payload = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise DatasetIOError(f"Cannot read config {path}: {exc}") from exc

    if not isinstance(payload, dict):
        raise DatasetIOError(f"Config {path} must hold a JSON object")
    return payload


def load_experiment(path: Path | None, overrides: dict[str, Any]) -> ExperimentConfig:
    """
    Конфигурация из файла (или по умолчанию) с переопределениями флагами.

    Переопределения применяются к словарю и валидируются заново целиком.

    Args:
        path (Path | None): JSON-файл конфигурации.
        overrides (dict[str, Any]): Значения флагов (None - не задан).

    Raises:
        ConfigError: Конфигурация невалидна.
        DatasetIOError: Файл не читается.

    Returns:
        ExperimentConfig: Итоговая конфигурация.
    """
    payload = read_json(path) if path is not None else {}

    plan = dict(payload.get("plan", {}))
    for flag, field_name in PLAN_OVERRIDES.items():
        if overrides.get(flag) is not None:
            plan[field_name] = overrides[flag]
    payload["plan"] = plan

    for key in ("dataset", "output_dir"):
        if overrides.get(key) is not None:
            payload[key] = str(overrides[key])

    try:
        return ExperimentConfig.model_validate(payload)
    except ValidationError as exc:
        raise validation_error(exc, "experiment config") from exc
