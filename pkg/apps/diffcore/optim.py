"""
Адаптивный оптимизатор (Adam / AdamW) и расписание скорости обучения.
"""

import math
from collections.abc import Iterable
from enum import StrEnum

import numpy as np
from loguru import logger as log
from pydantic import BaseModel, ConfigDict, Field

from apps.common.exceptions import NumericalError
from apps.diffcore.params import ParamStore


class OptimizerKind(StrEnum):
    ADAM = "adam"  # L2-штраф добавляется к градиенту
    ADAMW = "adamw"  # развязанное затухание весов


class Schedule(StrEnum):
    CONSTANT = "constant"
    COSINE = "cosine"


class OptimizerConfig(BaseModel):
    """Гиперпараметры оптимизатора."""

    model_config = ConfigDict(extra="forbid", frozen=True)

    kind: OptimizerKind = OptimizerKind.ADAM
    beta1: float = Field(default=0.9, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.999, ge=0.0, lt=1.0)
    eps: float = Field(default=1e-8, gt=0.0)
    weight_decay: float = Field(default=0.0, ge=0.0)


def optimizer_step(
    params: ParamStore,
    lr: float,
    config: OptimizerConfig,
    names: Iterable[str] | None = None,
) -> None:
    """
    Шаг Adam по заполненным градиентам, затем очистка градиентов.

    Если указан список имён, обновляются (и очищаются) только эти параметры;
    остальные остаются побитно неизменными.

    Args:
        params (ParamStore): Параметры с градиентами.
        lr (float): Скорость обучения.
        config (OptimizerConfig): Гиперпараметры.
        names (Iterable[str] | None): Обновляемые параметры (None - все).

    Raises:
        NumericalError: NaN/Inf в градиенте или в параметре после шага (параметры не меняются).
    """
    selected = list(params) if names is None else list(names)

    for name in selected:
        grad = params[name].grad
        if grad is None or not np.isfinite(grad).all():
            log.error(f"Non-finite gradient in parameter '{name}'")
            raise NumericalError(f"Non-finite gradient in parameter '{name}'", details={"parameter": name})

    updated: dict[str, tuple[np.ndarray, np.ndarray, np.ndarray, int]] = {}

    for name in selected:
        tensor = params[name]
        assert tensor.grad is not None
        grad = tensor.grad

        if config.kind is OptimizerKind.ADAM and config.weight_decay:
            grad = grad + config.weight_decay * tensor.data

        step = params.steps[name] + 1
        m = config.beta1 * params.first_moments[name] + (1.0 - config.beta1) * grad
        v = config.beta2 * params.second_moments[name] + (1.0 - config.beta2) * grad * grad
        m_hat = m / (1.0 - config.beta1**step)
        v_hat = v / (1.0 - config.beta2**step)

        value = tensor.data - lr * m_hat / (np.sqrt(v_hat) + config.eps)
        if config.kind is OptimizerKind.ADAMW and config.weight_decay:
            value = value - lr * config.weight_decay * tensor.data

        if not np.isfinite(value).all():
            log.error(f"Parameter '{name}' became non-finite after update")
            raise NumericalError(f"Parameter '{name}' became non-finite after update", details={"parameter": name})

        updated[name] = (value, m, v, step)

    for name, (value, m, v, step) in updated.items():
        params[name].data[...] = value
        params[name].zero_grad()
        params.first_moments[name] = m
        params.second_moments[name] = v
        params.steps[name] = step


def learning_rate(base_lr: float, schedule: Schedule | str, epoch: int, total_epochs: int) -> float:
    """
    Скорость обучения эпохи: постоянная или косинусная (от base_lr к 0 за total_epochs).
    """
    if Schedule(schedule) is Schedule.CONSTANT or total_epochs <= 1:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * min(epoch, total_epochs) / total_epochs))
