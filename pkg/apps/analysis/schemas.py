"""
Отчёты анализа (JSON-вывод команды analyze).
"""

from typing import Any

from pydantic import BaseModel, Field


class RelationCheck(BaseModel):
    """Проверка одного соотношения."""

    name: str
    passed: bool
    expected: float | None = None
    observed: float | None = None
    z_score: float | None = Field(default=None, description="Отклонение в стандартных ошибках")
    p_value: float | None = Field(default=None, description="Двусторонний p-value нормального приближения")
    detail: str | None = None


class SchemeSummary(BaseModel):
    """Точные моменты, члены B и R и оценка Монте-Карло по одной схеме."""

    scheme: str
    segment_mean: list[list[float]]
    segment_square: list[list[float]]
    bias_term: float
    regularization_term: float
    estimate: dict[str, float | int]


class BiasReport(BaseModel):
    """Отчёт режима bias."""

    J: int
    S: int
    p: float
    head: str
    schemes: list[SchemeSummary]
    relations: list[RelationCheck]
    precondition: dict[str, float] | None = None

    @property
    def passed(self) -> bool:
        return all(relation.passed for relation in self.relations)


class StalenessTracePoint(BaseModel):
    """Расстояние таблица - свежий эмбеддинг на выборке ключей в конце эпохи."""

    epoch: int
    phase: str
    sampled: int
    max_distance: float
    mean_distance: float
    max_staleness: int


class StalenessSimulation(BaseModel):
    """Итог табличной симуляции устаревания (без модели)."""

    n_graphs: int
    J: int
    S: int
    epochs: int
    per_epoch: list[dict[str, Any]]
    min_staleness: int | None
    mean_staleness: float | None
    max_staleness: int | None
    expected_staleness: float
    relations: list[RelationCheck]


class AblationRow(BaseModel):
    value: float
    seed: int
    metric: float | None


class AblationReport(BaseModel):
    """Результат перебора одного параметра по сидам."""

    parameter: str
    rows: list[AblationRow]
    means: dict[str, float | None]
    interior_maximum: bool | None = None
