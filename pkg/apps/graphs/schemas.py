"""
Pydantic-схемы файлового формата датасета (JSON-lines).

Одна строка - один граф:
{"id": int, "num_nodes": int, "edges": [[u, v], ...], "features": [[...], ...],
 "label": {"class": int} | {"target": float}, "group": int (опционально)}
"""

from typing import Self

from pydantic import BaseModel, ConfigDict, Field, model_validator


class LabelRecord(BaseModel):
    """Метка в файле: либо класс, либо вещественная цель."""

    model_config = ConfigDict(populate_by_name=True, extra="forbid")

    class_index: int | None = Field(default=None, alias="class", ge=0)
    num_classes: int | None = Field(default=None, ge=2)
    target: float | None = Field(default=None, allow_inf_nan=False)

    @model_validator(mode="after")
    def check_kind(self) -> Self:
        """Ровно один вид метки."""
        if (self.class_index is None) == (self.target is None):
            raise ValueError("label must contain exactly one of 'class' or 'target'")
        if self.num_classes is not None and self.class_index is not None and self.class_index >= self.num_classes:
            raise ValueError("class index must be < num_classes")
        return self


class GraphRecord(BaseModel):
    """Запись одного графа в JSON-lines файле."""

    model_config = ConfigDict(extra="forbid")

    id: int = Field(..., ge=0)
    num_nodes: int = Field(..., ge=1)
    edges: list[tuple[int, int]] = Field(default_factory=list)
    features: list[list[float]] = Field(default_factory=list)
    label: LabelRecord
    group: int | None = Field(default=None, ge=0)


class SplitRecord(BaseModel):
    """Файл разбиения: {"train": [...], "val": [...], "test": [...]}."""

    model_config = ConfigDict(extra="forbid")

    train: list[int] = Field(default_factory=list)
    val: list[int] = Field(default_factory=list)
    test: list[int] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_disjoint(self) -> Self:
        """Разбиения не пересекаются."""
        seen: set[int] = set()
        for name in ("train", "val", "test"):
            ids = set(getattr(self, name))
            if seen & ids:
                raise ValueError(f"split '{name}' intersects previous splits: {sorted(seen & ids)[:5]}")
            seen |= ids
        return self
