"""
Иерархия исключений segtrain.

Каждое исключение несёт машинный код (`code`) и код завершения процесса (`exit_code`),
которые CLI превращает в ErrorOut и exit status.
"""

from typing import Any, ClassVar

from apps.common.schemas import ErrorOut


class SegtrainError(Exception):
    """
    Базовое исключение проекта.

    Attributes:
        code (str): Машинный код ошибки (например: budget_exceeded).
        exit_code (int): Код завершения процесса для CLI.
        details (dict[str, Any] | list[Any] | None): Контекст ошибки.
    """

    code: ClassVar[str] = "segtrain_error"
    exit_code: ClassVar[int] = 1

    def __init__(self, message: str, details: dict[str, Any] | list[Any] | None = None) -> None:
        super().__init__(message)
        self.message = message
        self.details = details

    def to_error_out(self) -> ErrorOut:
        """
        Приводит исключение к единому формату ответа с ошибкой.

        Returns:
            ErrorOut: Сериализуемое описание ошибки.
        """
        return ErrorOut(message=self.message, code=self.code, details=self.details)


class ConfigError(SegtrainError):
    """Невалидный конфиг, спецификация генератора или план обучения."""

    code = "config_error"
    exit_code = 2


class BudgetExceededError(SegtrainError):
    """Превышен бюджет удерживаемых активаций (в узлах)."""

    code = "budget_exceeded"
    exit_code = 3


class DatasetIOError(SegtrainError):
    """Ошибки ввода-вывода: чтение/запись датасета, кэша, чекпоинта."""

    code = "io_error"
    exit_code = 4


class GraphFormatError(DatasetIOError):
    """Запись графа нарушает формат (концы рёбер вне диапазона, ширина признаков)."""

    code = "graph_format_error"


class WidthMismatchError(SegtrainError):
    """Ширина входа не совпадает с ожидаемой шириной слоя или таблицы."""

    code = "width_mismatch"


class TapeError(SegtrainError):
    """Некорректное использование ленты (backward без forward и т.п.)."""

    code = "tape_error"


class NumericalError(SegtrainError):
    """NaN/Inf в градиентах или параметрах."""

    code = "numerical_error"


class EmptyTableError(SegtrainError):
    """Статистика запрошена по пустой таблице эмбеддингов."""

    code = "empty_table"


class MissingEmbeddingError(SegtrainError):
    """В таблице нет записи, которая обязана там быть (например, перед дообучением головы)."""

    code = "missing_embedding"


class EnumerationBudgetError(SegtrainError):
    """Точный перебор превышает допустимый объём."""

    code = "enumeration_budget_exceeded"
