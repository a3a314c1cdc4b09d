"""
Базовый класс команд CLI.
"""

import argparse
import json
import sys
from pathlib import Path
from typing import Any, TextIO

from pydantic import BaseModel

from apps.common.exceptions import DatasetIOError
from apps.common.utils.hashing import canonical_json


class BaseCommand:
    """
    Команда CLI: имя, справка, аргументы и обработчик.

    Обработчик возвращает код завершения; отчёты команда печатает в stdout в виде JSON,
    логи идут в stderr.
    """

    name: str = ""
    help: str = ""

    def __init__(self, stdout: TextIO | None = None) -> None:
        self.stdout = stdout or sys.stdout

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        """Регистрирует аргументы команды."""

    def handle(self, **options: Any) -> int:
        raise NotImplementedError

    def emit(self, payload: BaseModel | dict[str, Any]) -> None:
        """Печатает отчёт в stdout (JSON, ключи отсортированы)."""
        data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
        self.stdout.write(json.dumps(data, indent=2, sort_keys=True, ensure_ascii=False) + "\n")

    @staticmethod
    def write_report(path: Path, payload: BaseModel | dict[str, Any]) -> None:
        """Сохраняет отчёт в канонический JSON (повторный запуск даёт тот же файл)."""
        data = payload.model_dump(mode="json") if isinstance(payload, BaseModel) else payload
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            path.write_text(canonical_json(data) + "\n", encoding="utf-8")
        except OSError as exc:
            raise DatasetIOError(f"Cannot write report {path}: {exc}") from exc
