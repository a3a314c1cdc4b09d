"""
Тесты иерархии исключений и приведения их к схеме ErrorOut.
"""

import math

import pytest
from pydantic import ValidationError

from apps.common.exceptions import (
    BudgetExceededError,
    ConfigError,
    DatasetIOError,
    EmptyTableError,
    EnumerationBudgetError,
    GraphFormatError,
    MissingEmbeddingError,
    NumericalError,
    SegtrainError,
    TapeError,
    WidthMismatchError,
)
from apps.common.schemas import ErrorOut
from apps.training.types import TrainPlan


class TestErrorCodes:
    """Коды ошибок и коды завершения процесса."""

    @pytest.mark.parametrize(
        ("error_class", "code", "exit_code"),
        [
            (SegtrainError, "segtrain_error", 1),
            (ConfigError, "config_error", 2),
            (BudgetExceededError, "budget_exceeded", 3),
            (DatasetIOError, "io_error", 4),
            (GraphFormatError, "graph_format_error", 4),
            (WidthMismatchError, "width_mismatch", 1),
            (TapeError, "tape_error", 1),
            (NumericalError, "numerical_error", 1),
            (EmptyTableError, "empty_table", 1),
            (MissingEmbeddingError, "missing_embedding", 1),
            (EnumerationBudgetError, "enumeration_budget_exceeded", 1),
        ],
    )
    def test_codes(self, error_class: type[SegtrainError], code: str, exit_code: int) -> None:
        error = error_class("boom")

        assert isinstance(error, SegtrainError)
        assert (error.code, error.exit_code) == (code, exit_code)

    def test_graph_format_is_io_error(self) -> None:
        with pytest.raises(DatasetIOError):
            raise GraphFormatError("edge endpoint out of range")


class TestErrorOut:
    def test_to_error_out(self) -> None:
        error = BudgetExceededError("too big", details={"required_nodes": 11, "budget_nodes": 10})

        out = error.to_error_out()

        assert out == ErrorOut(message="too big", code="budget_exceeded", details={"required_nodes": 11, "budget_nodes": 10})
        assert ErrorOut.model_validate_json(out.model_dump_json()) == out

    def test_details_default_to_none(self) -> None:
        assert ConfigError("bad").to_error_out().details is None


class TestProbabilityField:
    """Поле вероятности в pydantic-моделях."""

    @pytest.mark.parametrize("value", [-0.1, 1.1, math.nan, math.inf])
    def test_rejects_out_of_range(self, value: float) -> None:
        with pytest.raises(ValidationError):
            TrainPlan(p=value)

    @pytest.mark.parametrize("value", [0.0, 0.5, 1.0])
    def test_accepts_closed_interval(self, value: float) -> None:
        assert TrainPlan(p=value).p == value
