"""
Типы метрик и функций потерь.
"""

from dataclasses import dataclass
from enum import StrEnum

import numpy as np

from apps.common.exceptions import ConfigError
from apps.common.types import FloatArray, IntArray


class LossKind(StrEnum):
    CROSS_ENTROPY = "cross-entropy"
    PAIRWISE_HINGE = "pairwise-hinge"


class Reduction(StrEnum):
    SUM = "sum"
    MEAN = "mean"


@dataclass(frozen=True)
class PredictionBatch:
    """
    Предсказания пакета графов и их цели.

    Attributes:
        predictions (FloatArray): Логиты (B, C) или скаляры (B,).
        targets (FloatArray | IntArray): Индексы классов или вещественные цели.
        groups (IntArray | None): Группы (для OPA по графам).
    """

    predictions: FloatArray
    targets: FloatArray | IntArray
    groups: IntArray | None = None

    def __post_init__(self) -> None:
        if self.predictions.shape[0] != self.targets.shape[0]:
            raise ConfigError(f"predictions/targets length mismatch: {self.predictions.shape[0]} != {self.targets.shape[0]}")
        if self.groups is not None and self.groups.shape[0] != self.targets.shape[0]:
            raise ConfigError("groups length mismatch")

    def __len__(self) -> int:
        return int(self.targets.shape[0])

    @classmethod
    def concat(cls, batches: list["PredictionBatch"]) -> "PredictionBatch":
        groups = [b.groups for b in batches]
        return cls(
            predictions=np.concatenate([b.predictions for b in batches]),
            targets=np.concatenate([b.targets for b in batches]),
            groups=None if any(g is None for g in groups) else np.concatenate(groups),  # type: ignore[arg-type]
        )
