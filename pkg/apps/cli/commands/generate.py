"""
Команда генерации синтетического датасета.
"""

import argparse
from collections import Counter
from pathlib import Path
from typing import Any

from loguru import logger as log
from pydantic import ValidationError

from apps.cli.base import BaseCommand
from apps.cli.config import read_json, validation_error
from apps.common.utils.hashing import stable_hash
from apps.graphs.services import save_dataset, split_path_for
from apps.graphs.types import ClassLabel
from apps.synthdata.services import generate
from apps.synthdata.types import GeneratorSpec
from config import settings


class Command(BaseCommand):
    name = "generate"
    help = "Генерирует синтетический датасет (JSON-lines графов + файл разбиения)."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--spec", type=Path, default=None, help="JSON со спецификацией генератора")
        parser.add_argument("--family", default=None, help="community-classification | weighted-sum-ranking")
        parser.add_argument("--seed", type=int, default=None, help="Сид генератора")
        parser.add_argument("--out", type=Path, required=True, help="Путь к файлу графов (*.jsonl)")

    def handle(self, **options: Any) -> int:
        payload = read_json(options["spec"]) if options["spec"] else {}
        for key in ("family", "seed"):
            if options[key] is not None:
                payload[key] = options[key]

        try:
            spec = GeneratorSpec.model_validate(payload)
        except ValidationError as exc:
            raise validation_error(exc, "generator spec") from exc

        # Файлы пишутся только после успешной генерации
        dataset = generate(spec, settings.THREADS)
        out: Path = options["out"]
        out.parent.mkdir(parents=True, exist_ok=True)
        save_dataset(dataset, out)

        classes = Counter(g.label.class_index for g in dataset.graphs if isinstance(g.label, ClassLabel))
        summary = {
            "config_hash": stable_hash(spec.model_dump(mode="json")),
            "family": spec.family.value,
            "graphs": len(dataset),
            "task": dataset.task.value,
            "class_histogram": {str(k): v for k, v in sorted(classes.items())},
            "groups": len({g.group_id for g in dataset.graphs if g.group_id is not None}),
            "node_count_range": [
                min(g.node_count for g in dataset.graphs),
                max(g.node_count for g in dataset.graphs),
            ],
            "split": {name: len(dataset.split.get(name)) for name in ("train", "val", "test")},
            "files": [str(out), str(split_path_for(out))],
        }

        log.info(f"Generated {len(dataset)} graphs -> {out}")
        self.emit(summary)
        return 0
