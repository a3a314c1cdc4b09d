"""
Команда обучения: T0 эпох основного обучения, затем дообучение головы; чекпоинты и журнал.
"""

import argparse
import json
from pathlib import Path
from typing import Any

from loguru import logger as log

from apps.cli.base import BaseCommand
from apps.cli.config import ExperimentConfig, load_experiment
from apps.cli.pipeline import training_data
from apps.common.exceptions import ConfigError, DatasetIOError
from apps.diffcore.checkpoint import load_checkpoint, save_checkpoint
from apps.diffcore.layers import build_model
from apps.training.services import Trainer, run_training
from apps.training.types import EpochRecord
from config import settings


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    """--config и переопределения полей плана обучения."""
    parser.add_argument("--config", type=Path, default=None, help="JSON с конфигурацией эксперимента")
    parser.add_argument("--dataset", type=Path, default=None, help="Файл графов (переопределяет конфиг)")
    parser.add_argument("--out", dest="output_dir", type=Path, default=None, help="Директория артефактов")
    parser.add_argument("--variant", default=None, help="full | gst-one | gst | gst-e | gst-efd")
    parser.add_argument("--p", type=float, default=None, help="Вероятность сохранения SED")
    parser.add_argument("--S", type=int, default=None, help="Сегментов с градиентом на граф")
    parser.add_argument("--segments-cap", type=int, default=None, help="Ограничение размера сегмента")
    parser.add_argument("--epochs", type=int, default=None, help="Эпохи основного обучения")
    parser.add_argument("--finetune-epochs", type=int, default=None, help="Эпохи дообучения головы")
    parser.add_argument("--seed", type=int, default=None, help="Сид обучения")
    parser.add_argument("--partition-method", default=None, help="Метод разбиения")
    parser.add_argument("--budget-nodes", type=int, default=None, help="Бюджет удерживаемых активаций")


class RunArtifacts:
    """
    Наблюдатель обучения: журнал (JSON-lines) после каждой эпохи
    и чекпоинты с заданной периодичностью.
    """

    def __init__(self, config: ExperimentConfig) -> None:
        self.config = config
        self.directory = config.output_dir

    @property
    def latest_checkpoint(self) -> Path:
        return self.directory / "checkpoint.json"

    def write_runlog(self, trainer: Trainer) -> None:
        lines = [json.dumps({"config_hash": self.config.config_hash, **r.model_dump(mode="json")}) for r in trainer.runlog.records]
        try:
            self.directory.mkdir(parents=True, exist_ok=True)
            (self.directory / "runlog.jsonl").write_text("".join(line + "\n" for line in lines), encoding="utf-8")
        except OSError as exc:
            raise DatasetIOError(f"Cannot write run log to {self.directory}: {exc}") from exc

    def save(self, trainer: Trainer) -> Path:
        checkpoint = trainer.checkpoint(self.config.config_hash)
        checkpoint.state["experiment"] = self.config.model_dump(mode="json")
        save_checkpoint(checkpoint, self.latest_checkpoint)
        return self.latest_checkpoint

    def on_epoch_end(self, trainer: Trainer, record: EpochRecord) -> None:
        self.write_runlog(trainer)
        every = self.config.checkpoint_every
        if every and trainer.epoch % every == 0:
            path = self.save(trainer)
            log.debug(f"Checkpoint after epoch {trainer.epoch}: {path}")


class Command(BaseCommand):
    name = "train"
    help = "Обучает модель по плану эксперимента (с возможностью продолжения из чекпоинта)."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        add_experiment_arguments(parser)
        parser.add_argument("--resume", type=Path, default=None, help="Продолжить из чекпоинта")

    def handle(self, **options: Any) -> int:
        config = load_experiment(options["config"], options)
        threads = settings.THREADS
        data = training_data(config, threads)
        artifacts = RunArtifacts(config)

        if options["resume"] is not None:
            checkpoint = load_checkpoint(options["resume"])
            if checkpoint.config_hash != config.config_hash:
                raise ConfigError(
                    "Checkpoint was produced by a different configuration",
                    details={"checkpoint": checkpoint.config_hash, "config": config.config_hash},
                )
            trainer = Trainer.from_checkpoint(checkpoint, data, threads)
            log.info(f"Resuming from {options['resume']} at epoch {trainer.epoch}")
        else:
            model = build_model(config.architecture.build(data.dataset, config.plan.seed))
            trainer = Trainer(config.plan, model, data, threads=threads)

        run_training(trainer, callbacks=[artifacts])
        artifacts.write_runlog(trainer)
        checkpoint_path = artifacts.save(trainer)

        last = trainer.runlog.records[-1] if trainer.runlog.records else None
        summary = {
            "config_hash": config.config_hash,
            "variant": config.plan.variant.value,
            "epochs": trainer.epoch,
            "checkpoint": str(checkpoint_path),
            "final": last.model_dump(mode="json") if last is not None else None,
        }
        self.write_report(config.output_dir / "summary.json", summary)
        self.emit(summary)
        return 0
