"""
Pydantic-схемы файла кэша сегментов (JSON-lines, одна строка - один SegmentedGraph).
"""

from pydantic import BaseModel, ConfigDict, Field

from apps.graphs.schemas import LabelRecord


class SegmentRecord(BaseModel):
    """Сегмент: узлы родителя, локальные рёбра, строки признаков."""

    model_config = ConfigDict(extra="forbid")

    segment_id: int = Field(..., ge=0)
    nodes: list[int]
    edges: list[tuple[int, int]] = Field(default_factory=list)
    features: list[list[float]]


class SegmentedGraphRecord(BaseModel):
    """Запись разложения одного графа."""

    model_config = ConfigDict(extra="forbid")

    id: int = Field(..., ge=0)
    num_nodes: int = Field(..., ge=0)
    num_edges: int = Field(..., ge=0)
    method: str
    label: LabelRecord
    group: int | None = None
    segments: list[SegmentRecord]
