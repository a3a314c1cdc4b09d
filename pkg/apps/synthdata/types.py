"""
Спецификация синтетических генераторов.
"""

from enum import StrEnum
from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Family(StrEnum):
    """Семейство синтетических датасетов."""

    CLASSIFICATION = "community-classification"
    RANKING = "weighted-sum-ranking"


class GeneratorSpec(BaseModel):
    """
    Параметры генератора.

    Attributes:
        family (Family): Семейство.
        n_graphs (int): Число графов (для ранжирования - базовых графов).
        min_nodes (int): Минимальное число узлов.
        max_nodes (int): Максимальное число узлов.
        num_classes (int): Число классов (классификация).
        configs_per_graph (int): Конфигураций на базовый граф (ранжирование).
        feature_width (int): Ширина признаков узла.
        community_size (int): Средний размер сообщества стохастической блочной модели.
        avg_in_degree (float): Средняя степень внутри сообщества.
        avg_out_degree (float): Средняя степень между сообществами.
        band_margin (float): Зазор между полосами доли помеченных узлов соседних классов.
        heterogeneity (float): Параметр формы Gamma для весов сообществ (меньше - неоднороднее).
        noise_scale (float): Масштаб шумовых признаков.
        val_fraction (float): Доля валидации.
        test_fraction (float): Доля теста.
        seed (int): Сид.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    family: Family = Family.CLASSIFICATION
    n_graphs: int = Field(default=300, ge=1)
    min_nodes: int = Field(default=200, ge=2)
    max_nodes: int = Field(default=2000, ge=2)
    num_classes: int = Field(default=5, ge=2)
    configs_per_graph: int = Field(default=10, ge=2)
    feature_width: int = Field(default=4, ge=2)
    community_size: int = Field(default=100, ge=2)
    avg_in_degree: float = Field(default=6.0, gt=0.0)
    avg_out_degree: float = Field(default=0.5, ge=0.0)
    band_margin: float = Field(default=0.05, ge=0.0, lt=1.0)
    heterogeneity: float = Field(default=0.5, gt=0.0)
    noise_scale: float = Field(default=1.0, ge=0.0)
    val_fraction: float = Field(default=0.15, ge=0.0, lt=1.0)
    test_fraction: float = Field(default=0.15, ge=0.0, lt=1.0)
    seed: int = 0

    @model_validator(mode="after")
    def check_ranges(self) -> Self:
        if self.min_nodes > self.max_nodes:
            raise ValueError(f"min_nodes {self.min_nodes} > max_nodes {self.max_nodes}")
        if self.val_fraction + self.test_fraction >= 1.0:
            raise ValueError("val_fraction + test_fraction must be < 1")
        return self

    @property
    def band_width(self) -> float:
        """Ширина полосы доли помеченных узлов одного класса."""
        return (1.0 - (self.num_classes - 1) * self.band_margin) / self.num_classes

    def band(self, class_index: int) -> tuple[float, float]:
        """Полоса [lo, hi] доли помеченных узлов класса."""
        lo = class_index * (self.band_width + self.band_margin)
        return lo, min(lo + self.band_width, 1.0)
