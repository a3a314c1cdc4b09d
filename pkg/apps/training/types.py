"""
Типы движка обучения: варианты, план обучения, назначение весов SED, журнал запуска.
"""

from dataclasses import dataclass, field
from enum import StrEnum
from typing import Any, Self

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from apps.common.exceptions import ConfigError
from apps.common.types import Probability
from apps.diffcore.optim import OptimizerConfig, OptimizerKind, Schedule
from apps.diffcore.types import ForwardCounts, Readout
from apps.graphs.types import Dataset, Task
from apps.metrics.types import LossKind, PredictionBatch
from apps.partition.types import PartitionMethod, SegmentedGraph


class Variant(StrEnum):
    """Варианты обучения."""

    FULL = "full"
    GST_ONE = "gst-one"
    GST = "gst"
    GST_E = "gst-e"
    GST_EFD = "gst-efd"

    @property
    def uses_table(self) -> bool:
        return self in (Variant.GST_E, Variant.GST_EFD)

    @property
    def segmented(self) -> bool:
        return self is not Variant.FULL


class EvalMode(StrEnum):
    """Режим оценки."""

    FRESH_SEGMENTS = "fresh-segments"  # все сегменты grad-disabled текущими параметрами
    FULL_GRAPH = "full-graph"  # граф целиком, без разбиения
    TABLE = "table"  # агрегирование записей таблицы


class Phase(StrEnum):
    TRAIN = "train"
    FINETUNE = "finetune"


class TrainPlan(BaseModel):
    """
    План обучения.

    Attributes:
        variant (Variant): Вариант обучения.
        S (int): Число сегментов с градиентом на граф.
        p (float): Вероятность сохранить устаревший эмбеддинг (SED).
        max_segment_nodes (int): Ограничение размера сегмента.
        partition_method (PartitionMethod): Метод разбиения.
        batch_size (int): Число графов в пакете.
        epochs (int): Эпохи основного обучения T0.
        finetune_epochs (int): Эпохи дообучения головы T1 - T0.
        lr (float): Базовая скорость обучения.
        finetune_lr (float | None): Скорость обучения головы (None - как lr).
        weight_decay (float): Затухание весов.
        optimizer (OptimizerKind): Adam (L2) или AdamW.
        schedule (Schedule): Расписание скорости обучения.
        seed (int): Сид порядка, выбора сегментов и SED.
        loss (LossKind | None): Функция потерь (None - по задаче датасета).
        aggregation (Readout | None): Агрегирование сегментов (None - по задаче: mean для классификации,
            sum для ранжирования).
        budget_nodes (int | None): Бюджет удерживаемых активаций (None - batch_size * S * max_segment_nodes).
        shuffle (bool): Перемешивать порядок графов каждую эпоху.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    variant: Variant = Variant.GST_EFD
    S: int = Field(default=1, ge=1)
    p: Probability = 0.5
    max_segment_nodes: int = Field(default=200, ge=1)
    partition_method: PartitionMethod = PartitionMethod.LOCALITY_EDGE_CUT
    batch_size: int = Field(default=4, ge=1)
    epochs: int = Field(default=10, ge=0)
    finetune_epochs: int = Field(default=0, ge=0)
    lr: float = Field(default=1e-3, gt=0.0)
    finetune_lr: float | None = Field(default=None, gt=0.0)
    weight_decay: float = Field(default=1e-4, ge=0.0)
    optimizer: OptimizerKind = OptimizerKind.ADAM
    schedule: Schedule = Schedule.CONSTANT
    seed: int = 0
    loss: LossKind | None = None
    aggregation: Readout | None = None
    budget_nodes: int | None = Field(default=None, ge=1)
    shuffle: bool = True

    @model_validator(mode="after")
    def check_loss(self) -> Self:
        if self.loss is LossKind.PAIRWISE_HINGE and self.batch_size < 2:
            raise ValueError("pairwise-hinge loss needs batch_size >= 2")
        return self

    def for_task(self, task: Task) -> Self:
        """
        План с потерей и агрегированием, выбранными по задаче датасета.

        Незаданные поля заполняются: классификация - cross-entropy и mean,
        ранжирование - pairwise hinge и sum.

        Args:
            task (Task): Задача датасета.

        Raises:
            ConfigError: Заданная потеря не подходит задаче или hinge с batch_size < 2.

        Returns:
            Self: План без пустых полей loss и aggregation.
        """
        classification = task is Task.CLASSIFICATION
        loss = self.loss or (LossKind.CROSS_ENTROPY if classification else LossKind.PAIRWISE_HINGE)
        aggregation = self.aggregation or (Readout.MEAN if classification else Readout.SUM)

        expected = LossKind.CROSS_ENTROPY if classification else LossKind.PAIRWISE_HINGE
        if loss is not expected:
            raise ConfigError(
                f"Loss '{loss.value}' does not fit the '{task.value}' task, use '{expected.value}'",
                details={"task": task.value, "loss": loss.value},
            )
        if loss is LossKind.PAIRWISE_HINGE and self.batch_size < 2:
            raise ConfigError("pairwise-hinge loss needs batch_size >= 2", details={"batch_size": self.batch_size})

        if loss is self.loss and aggregation is self.aggregation:
            return self
        return self.model_copy(update={"loss": loss, "aggregation": aggregation})

    @property
    def effective_budget(self) -> int:
        """Бюджет активаций в узлах."""
        if self.budget_nodes is not None:
            return self.budget_nodes
        return self.batch_size * self.S * self.max_segment_nodes

    @property
    def total_epochs(self) -> int:
        return self.epochs + self.finetune_epochs

    def optimizer_config(self) -> OptimizerConfig:
        return OptimizerConfig(kind=self.optimizer, weight_decay=self.weight_decay)


@dataclass(frozen=True, slots=True)
class SedAssignment:
    """
    Веса сегментов одного графа.

    Attributes:
        weights (tuple[float, ...]): Вес каждого сегмента.
        selected (tuple[int, ...]): Сегменты с градиентом.
    """

    weights: tuple[float, ...]
    selected: tuple[int, ...]

    @property
    def dropped(self) -> tuple[int, ...]:
        return tuple(j for j, w in enumerate(self.weights) if w == 0.0 and j not in self.selected)


@dataclass(frozen=True)
class TrainingData:
    """
    Датасет и его разложения (индекс списка = graph_id).
    """

    dataset: Dataset
    segmented: list[SegmentedGraph]

    def __post_init__(self) -> None:
        if len(self.segmented) != len(self.dataset):
            raise ValueError(f"{len(self.segmented)} segmentations for {len(self.dataset)} graphs")

    def split(self, name: str) -> list[SegmentedGraph]:
        return [self.segmented[i] for i in self.dataset.split.get(name)]


@dataclass
class StepResult:
    """Итог одного шага обучения."""

    loss: float
    predictions: PredictionBatch
    counts: ForwardCounts
    peak_retained_nodes: int
    lookup_nodes: int = 0
    skipped_lookup_nodes: int = 0


class EpochRecord(BaseModel):
    """Запись журнала по эпохе."""

    epoch: int
    phase: Phase
    iteration: int
    lr: float
    loss: float
    train_metric: float | None = None
    train_fresh_metric: float | None = None
    val_metric: float | None = None
    test_metric: float | None = None
    grad_enabled_nodes: int = 0
    grad_disabled_nodes: int = 0
    lookup_nodes: int = 0
    skipped_lookup_nodes: int = 0
    peak_retained_nodes: int = 0
    staleness: dict[str, Any] | None = None
    wall_time: float = 0.0


@dataclass
class RunLog:
    """Журнал запуска: записи по эпохам и потери по шагам."""

    records: list[EpochRecord] = field(default_factory=list)
    step_losses: list[float] = field(default_factory=list)

    def dump(self) -> dict[str, Any]:
        return {
            "records": [record.model_dump(mode="json") for record in self.records],
            "step_losses": [float(x).hex() for x in self.step_losses],
        }

    @classmethod
    def load(cls, payload: dict[str, Any]) -> "RunLog":
        return cls(
            records=[EpochRecord.model_validate(item) for item in payload.get("records", [])],
            step_losses=[float.fromhex(x) for x in payload.get("step_losses", [])],
        )


@dataclass
class TrainRngs:
    """
    Три независимых потока случайности: порядок графов, выбор сегментов, дропаут SED.

    Разделение потоков гарантирует, что варианты, не тратящие поток дропаута,
    видят те же порядок и выбор сегментов, что и gst-efd.
    """

    order: np.random.Generator
    select: np.random.Generator
    dropout: np.random.Generator

    @classmethod
    def from_seed(cls, seed: int) -> "TrainRngs":
        order, select, dropout = (np.random.default_rng(child) for child in np.random.SeedSequence(seed).spawn(3))
        return cls(order=order, select=select, dropout=dropout)

    def state(self) -> dict[str, Any]:
        return {name: getattr(self, name).bit_generator.state for name in ("order", "select", "dropout")}

    def restore(self, state: dict[str, Any]) -> None:
        for name in ("order", "select", "dropout"):
            getattr(self, name).bit_generator.state = state[name]
