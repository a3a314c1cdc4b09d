"""
Команда оценки чекпоинта на разбиении датасета.
"""

import argparse
from pathlib import Path
from typing import Any

from apps.cli.base import BaseCommand
from apps.cli.config import ExperimentConfig
from apps.cli.pipeline import segment_dataset
from apps.common.exceptions import ConfigError
from apps.diffcore.checkpoint import load_checkpoint
from apps.graphs.selectors import load_dataset
from apps.training.services import Trainer
from apps.training.types import EvalMode, TrainingData
from config import settings


class Command(BaseCommand):
    name = "eval"
    help = "Оценивает модель из чекпоинта (fresh-segments, full-graph или table)."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        parser.add_argument("--checkpoint", type=Path, required=True, help="Файл чекпоинта")
        parser.add_argument("--dataset", type=Path, default=None, help="Файл графов (по умолчанию - из чекпоинта)")
        parser.add_argument("--split", default="test", help="train | val | test")
        parser.add_argument("--mode", default=EvalMode.FRESH_SEGMENTS.value, help="fresh-segments | full-graph | table")

    def handle(self, **options: Any) -> int:
        try:
            mode = EvalMode(options["mode"])
        except ValueError as exc:
            raise ConfigError(f"Unknown eval mode: {options['mode']}") from exc

        checkpoint = load_checkpoint(options["checkpoint"])
        experiment = checkpoint.state.get("experiment")
        if experiment is None:
            raise ConfigError("Checkpoint carries no experiment config")

        config = ExperimentConfig.model_validate(
            {**experiment, "dataset": str(options["dataset"])} if options["dataset"] else experiment
        )
        if config.dataset is None:
            generated = config.output_dir / "dataset" / "graphs.jsonl"
            config = config.model_copy(update={"dataset": generated})
        assert config.dataset is not None

        dataset = load_dataset(config.dataset)
        plan = config.plan
        segmented, _ = segment_dataset(
            dataset, config.dataset, plan.partition_method, plan.max_segment_nodes, config.partition_seed, settings.THREADS
        )
        trainer = Trainer.from_checkpoint(checkpoint, TrainingData(dataset, segmented), settings.THREADS)

        metrics: dict[str, float | None] = {"fresh-segments": trainer.evaluate_split(options["split"])}
        if mode is not EvalMode.FRESH_SEGMENTS:
            metrics[mode.value] = trainer.evaluate_split(options["split"], mode)

        self.emit(
            {
                "config_hash": checkpoint.config_hash,
                "epoch": checkpoint.epoch,
                "split": options["split"],
                "mode": mode.value,
                "metrics": metrics,
            }
        )
        return 0
