"""
Команда анализа: соотношения устаревания (bias), трасса устаревания (staleness),
абляции по p и по ограничению сегмента.
"""

import argparse
from enum import StrEnum
from pathlib import Path
from typing import Any

import numpy as np

from apps.analysis.heads import MlpHead, QuadraticHead
from apps.analysis.selectors import bias_report
from apps.analysis.services import ablate_cap, ablate_p, simulate_staleness, staleness_trace
from apps.analysis.types import PerturbationModel
from apps.cli.base import BaseCommand
from apps.cli.commands.train import add_experiment_arguments
from apps.cli.config import ExperimentConfig, load_experiment
from apps.cli.pipeline import training_data
from apps.common.exceptions import ConfigError
from apps.common.utils.hashing import stable_hash
from apps.diffcore.layers import build_model
from apps.synthdata.types import GeneratorSpec
from apps.training.services import Trainer
from apps.training.types import TrainPlan, Variant
from config import settings


class AnalyzeMode(StrEnum):
    BIAS = "bias"
    STALENESS = "staleness"
    ABLATE_P = "ablate-p"
    ABLATE_CAP = "ablate-cap"


# Небольшой датасет для трассы устаревания, когда конфигурация не задана
TRACE_GENERATOR = GeneratorSpec(n_graphs=12, min_nodes=60, max_nodes=160, community_size=30, num_classes=2, seed=0)
TRACE_PLAN = TrainPlan(variant=Variant.GST_E, max_segment_nodes=40, batch_size=2, epochs=3)


def _floats(raw: str | None, default: tuple[float, ...]) -> tuple[float, ...]:
    if not raw:
        return default
    try:
        return tuple(float(x) for x in raw.split(","))
    except ValueError as exc:
        raise ConfigError(f"Expected a comma-separated list of numbers, got {raw!r}") from exc


class Command(BaseCommand):
    name = "analyze"
    help = "Анализ устаревания и абляции; печатает JSON-отчёт с результатами проверок."

    def add_arguments(self, parser: argparse.ArgumentParser) -> None:
        add_experiment_arguments(parser)
        parser.add_argument("--mode", required=True, help="bias | staleness | ablate-p | ablate-cap")
        parser.add_argument("--report", type=Path, default=None, help="Куда сохранить отчёт")
        # bias
        parser.add_argument("--J", type=int, default=4, help="Сегментов на граф")
        parser.add_argument("--width", type=int, default=3, help="Ширина эмбеддинга")
        parser.add_argument("--head", default="quadratic", help="quadratic | mlp")
        parser.add_argument("--staleness-scale", type=float, default=0.5, help="Масштаб h~ - h")
        parser.add_argument("--trials", type=int, default=100_000, help="Исходов Монте-Карло")
        # staleness
        parser.add_argument("--n-graphs", type=int, default=20, help="Графов в табличной симуляции")
        parser.add_argument("--sim-epochs", type=int, default=50, help="Эпох табличной симуляции")
        # ablations
        parser.add_argument("--values", default=None, help="Значения параметра через запятую")
        parser.add_argument("--seeds", default=None, help="Сиды через запятую")

    def handle(self, **options: Any) -> int:
        try:
            mode = AnalyzeMode(options["mode"])
        except ValueError as exc:
            raise ConfigError(f"Unknown analyze mode: {options['mode']}") from exc

        if mode is AnalyzeMode.BIAS:
            report = self.bias(options)
        elif mode is AnalyzeMode.STALENESS:
            report = self.staleness(options)
        else:
            report = self.ablation(mode, options)

        if options["report"] is not None:
            self.write_report(options["report"], report)
        self.emit(report)
        return 0

    def bias(self, options: dict[str, Any]) -> dict[str, Any]:
        J, S = options["J"], options["S"] or 1
        p = 0.5 if options["p"] is None else options["p"]
        seed = options["seed"] or 0
        rng = np.random.default_rng(seed)

        fresh = rng.standard_normal((J, options["width"]))
        stale = fresh + options["staleness_scale"] * rng.standard_normal(fresh.shape)
        model = PerturbationModel(J=J, S=S, p=p, fresh=fresh, stale=stale)

        if options["head"] == "quadratic":
            head: QuadraticHead | MlpHead = QuadraticHead.random(options["width"], rng)
        elif options["head"] == "mlp":
            head = MlpHead.random(options["width"], 8, rng)
        else:
            raise ConfigError(f"Unknown test head: {options['head']}")

        result = bias_report(model, head, options["trials"], seed, settings.THREADS)
        parameters = {"J": J, "S": S, "p": p, "width": options["width"], "head": options["head"], "seed": seed}
        return {"config_hash": stable_hash(parameters), "passed": result.passed, **result.model_dump(mode="json")}

    def staleness(self, options: dict[str, Any]) -> dict[str, Any]:
        J, S = options["J"], options["S"] or 1
        simulation = simulate_staleness(options["n_graphs"], J, S, options["sim_epochs"], options["seed"] or 0)

        if options["config"] is not None or options["dataset"] is not None:
            config = load_experiment(options["config"], options)
        else:
            config = ExperimentConfig(
                generator=TRACE_GENERATOR,
                plan=TRACE_PLAN,
                output_dir=options["output_dir"] or Path("runs/staleness-trace"),
            )

        plan = config.plan
        if not plan.variant.uses_table:
            plan = plan.model_copy(update={"variant": Variant.GST_E})

        data = training_data(config, settings.THREADS)
        trainer = Trainer(plan, build_model(config.architecture.build(data.dataset, plan.seed)), data, threads=settings.THREADS)
        trace = staleness_trace(trainer, seed=plan.seed)

        return {
            "config_hash": config.config_hash,
            "simulation": simulation.model_dump(mode="json"),
            "trace": [point.model_dump(mode="json") for point in trace],
            "passed": all(relation.passed for relation in simulation.relations),
        }

    def ablation(self, mode: AnalyzeMode, options: dict[str, Any]) -> dict[str, Any]:
        config = load_experiment(options["config"], options)
        threads = settings.THREADS
        data = training_data(config, threads)
        model_config = config.architecture.build(data.dataset, config.plan.seed)
        seeds = tuple(int(s) for s in _floats(options["seeds"], (0.0, 1.0, 2.0, 3.0, 4.0)))

        if mode is AnalyzeMode.ABLATE_P:
            report = ablate_p(
                config.plan,
                model_config,
                data.dataset,
                data.segmented,
                _floats(options["values"], (0.0, 0.25, 0.5, 0.75, 1.0)),
                seeds,
                threads,
            )
        else:
            caps = tuple(int(c) for c in _floats(options["values"], (50.0, 100.0, 200.0, 400.0)))
            report = ablate_cap(config.plan, model_config, data.dataset, caps, seeds, config.partition_seed, threads)

        return {"config_hash": config.config_hash, **report.model_dump(mode="json")}
