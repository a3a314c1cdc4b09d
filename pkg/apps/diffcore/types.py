"""
Типы вычислительного ядра: конфигурация модели и учёт прямых проходов.
"""

import threading
from dataclasses import dataclass
from enum import StrEnum
from typing import Protocol, Self

from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse

from apps.common.types import FloatArray


class LayerType(StrEnum):
    """Тип слоя передачи сообщений."""

    SAGE = "sage"  # [self || mean(neighbors)] @ W
    GCN = "gcn"  # mean(self + neighbors) @ W


class Readout(StrEnum):
    """Пулинг узлов сегмента в эмбеддинг."""

    MEAN = "mean"
    SUM = "sum"


class GradMode(StrEnum):
    """Режим прямого прохода сегмента."""

    ENABLED = "enabled"
    DISABLED = "disabled"


class ModelConfig(BaseModel):
    """
    Архитектура backbone + head.

    Attributes:
        in_width (int): Ширина признаков узла d_in.
        hidden_width (int): Ширина скрытых слоёв и эмбеддинга d_h.
        pre_layers (int): Число линейных слоёв до передачи сообщений.
        mp_layers (int): Число слоёв передачи сообщений.
        post_layers (int): Число линейных слоёв после передачи сообщений.
        layer_type (LayerType): Тип слоя передачи сообщений.
        readout (Readout): Пулинг узлов сегмента.
        head_hidden_layers (int): Скрытые слои головы.
        out_width (int): Число логитов (классы) или 1 (регрессия).
        seed (int): Сид инициализации весов.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    in_width: int = Field(..., ge=1)
    hidden_width: int = Field(default=32, ge=1)
    pre_layers: int = Field(default=1, ge=0)
    mp_layers: int = Field(default=2, ge=0)
    post_layers: int = Field(default=1, ge=0)
    layer_type: LayerType = LayerType.SAGE
    readout: Readout = Readout.MEAN
    head_hidden_layers: int = Field(default=1, ge=0)
    out_width: int = Field(default=1, ge=1)
    seed: int = 0

    @model_validator(mode="after")
    def check_depth(self) -> Self:
        if self.pre_layers + self.mp_layers + self.post_layers == 0:
            raise ValueError("backbone needs at least one layer")
        return self


class NodeBatch(Protocol):
    """Граф или сегмент: всё, что нужно backbone для прямого прохода."""

    @property
    def node_count(self) -> int: ...

    @property
    def feature_width(self) -> int: ...

    @property
    def features(self) -> FloatArray: ...

    @property
    def mean_operator(self) -> sparse.csr_matrix: ...

    @property
    def closed_mean_operator(self) -> sparse.csr_matrix: ...


@dataclass(frozen=True, slots=True)
class ForwardCounts:
    """Число узлов, прогнанных через backbone (с градиентом и без)."""

    grad_enabled_nodes: int = 0
    grad_disabled_nodes: int = 0

    @property
    def total_nodes(self) -> int:
        return self.grad_enabled_nodes + self.grad_disabled_nodes

    def __sub__(self, other: "ForwardCounts") -> "ForwardCounts":
        return ForwardCounts(
            grad_enabled_nodes=self.grad_enabled_nodes - other.grad_enabled_nodes,
            grad_disabled_nodes=self.grad_disabled_nodes - other.grad_disabled_nodes,
        )


class ForwardCounter:
    """Потокобезопасный счётчик прямых проходов (детерминированный прокси времени)."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._enabled = 0
        self._disabled = 0

    def add(self, node_count: int, mode: GradMode) -> None:
        with self._lock:
            if mode is GradMode.ENABLED:
                self._enabled += node_count
            else:
                self._disabled += node_count

    def snapshot(self) -> ForwardCounts:
        with self._lock:
            return ForwardCounts(grad_enabled_nodes=self._enabled, grad_disabled_nodes=self._disabled)
