"""
Сервисы анализа устаревания: трассировка расстояния таблица - свежий эмбеддинг,
табличная симуляция устаревания и абляции по p и по ограничению сегмента.
"""

from collections.abc import Sequence

import numpy as np
from loguru import logger as log

from apps.analysis.schemas import (
    AblationReport,
    AblationRow,
    RelationCheck,
    StalenessSimulation,
    StalenessTracePoint,
)
from apps.common.exceptions import ConfigError
from apps.common.types import FloatArray
from apps.common.utils.parallel import parallel_map
from apps.diffcore.layers import Backbone, build_model, forward_segment
from apps.diffcore.types import GradMode, ModelConfig
from apps.embeddings.types import EmbeddingTable, TableKey
from apps.graphs.types import Dataset
from apps.partition.services import partition_dataset
from apps.partition.types import SegmentedGraph
from apps.training.services import Trainer, run_training
from apps.training.types import EpochRecord, TrainingData, TrainPlan, Variant
from apps.training.weights import sample_segments


def trace_distances(
    table: EmbeddingTable,
    backbone: Backbone,
    segmented: Sequence[SegmentedGraph],
    keys: Sequence[TableKey],
    threads: int = 1,
) -> FloatArray:
    """
    ||table - fresh|| для заданных ключей: свежий эмбеддинг - grad-disabled проход текущего backbone.

    Args:
        table (EmbeddingTable): Таблица.
        backbone (Backbone): Текущий backbone.
        segmented (Sequence[SegmentedGraph]): Разложения (индекс = graph_id).
        keys (Sequence[TableKey]): Ключи (graph_id, segment_id), присутствующие в таблице.
        threads (int): Потоки.

    Returns:
        FloatArray: Расстояния в порядке ключей.
    """

    def distance(key: TableKey) -> float:
        graph_id, segment_id = key
        found = table.lookup(graph_id, segment_id)
        if found is None:
            raise ConfigError(f"trace_distances(): key {key} is not in the table")
        fresh = forward_segment(backbone, segmented[graph_id].segments[segment_id], GradMode.DISABLED).data
        return float(np.linalg.norm(found.embedding - fresh))

    return np.array(parallel_map(distance, list(keys), threads), dtype=np.float64)


class StalenessTracer:
    """
    Наблюдатель обучения: в конце каждой эпохи меряет расстояние между записями таблицы
    и свежими эмбеддингами на случайной выборке ключей.

    Собственный генератор выборки не трогает потоки случайности обучения.
    """

    def __init__(self, sample_size: int = 32, seed: int = 0) -> None:
        self.sample_size = sample_size
        self.rng = np.random.default_rng(seed)
        self.points: list[StalenessTracePoint] = []

    def measure(self, trainer: Trainer, epoch: int, phase: str) -> StalenessTracePoint | None:
        table = trainer.table
        if table is None or len(table) == 0:
            return None

        keys = table.keys()
        picked = sorted(self.rng.choice(len(keys), size=min(self.sample_size, len(keys)), replace=False).tolist())
        sample = [keys[i] for i in picked]
        distances = trace_distances(table, trainer.model.backbone, trainer.data.segmented, sample, trainer.threads)
        staleness = table.staleness_values()

        point = StalenessTracePoint(
            epoch=epoch,
            phase=phase,
            sampled=len(sample),
            max_distance=float(distances.max()),
            mean_distance=float(distances.mean()),
            max_staleness=int(staleness.max()),
        )
        self.points.append(point)
        return point

    def on_epoch_end(self, trainer: Trainer, record: EpochRecord) -> None:
        point = self.measure(trainer, record.epoch, record.phase.value)
        if point is not None:
            log.debug(f"Staleness trace epoch {point.epoch}: max={point.max_distance:.3e}, mean={point.mean_distance:.3e}")


def staleness_trace(trainer: Trainer, sample_size: int = 32, seed: int = 0) -> list[StalenessTracePoint]:
    """
    Запуск обучения gst-e / gst-efd с трассировкой расстояния таблица - свежий эмбеддинг.

    Args:
        trainer (Trainer): Движок варианта с таблицей.
        sample_size (int): Размер выборки ключей на эпоху.
        seed (int): Сид выборки.

    Raises:
        ConfigError: Вариант без таблицы.

    Returns:
        list[StalenessTracePoint]: Ряд по эпохам.
    """
    if not trainer.plan.variant.uses_table:
        raise ConfigError(f"staleness trace needs gst-e or gst-efd, got {trainer.plan.variant.value}")

    tracer = StalenessTracer(sample_size=sample_size, seed=seed)
    run_training(trainer, callbacks=[tracer])
    return tracer.points


def simulate_staleness(n_graphs: int, J: int, S: int, epochs: int, seed: int = 0) -> StalenessSimulation:
    """
    Табличная симуляция gst-e без модели: пакет из одного графа, фиксированный порядок графов.

    На каждом шаге выбираются S сегментов графа, остальные читаются из таблицы
    (при первом обращении - прогрев), выбранные перезаписываются, счётчик сдвигается.
    Устаревание невыбранных сегментов фиксируется в момент чтения.

    Проверяемые соотношения: начиная со второй эпохи минимальное устаревание не меньше n,
    а долгосрочное среднее устаревание не больше 2 n J / S.

    Args:
        n_graphs (int): Число графов.
        J (int): Сегментов на граф.
        S (int): Сегментов с градиентом.
        epochs (int): Эпохи (>= 2).
        seed (int): Сид выбора сегментов.

    Raises:
        ConfigError: Некорректные параметры.

    Returns:
        StalenessSimulation: Статистика по эпохам и результаты проверок.
    """
    if n_graphs < 1 or not 1 <= S <= J or epochs < 2:
        raise ConfigError(f"simulate_staleness() needs n >= 1, 1 <= S <= J, epochs >= 2; got n={n_graphs}, J={J}, S={S}, epochs={epochs}")

    rng = np.random.default_rng(seed)
    table = EmbeddingTable(width=1)
    zero = np.zeros(1)
    per_epoch: list[dict[str, float | int | None]] = []
    observed: list[int] = []

    for epoch in range(epochs):
        values: list[int] = []
        for graph_id in range(n_graphs):
            selected = sample_segments(J, S, rng)
            for segment_id in range(J):
                if segment_id in selected:
                    continue
                found = table.lookup(graph_id, segment_id)
                if found is None:
                    table.insert_or_update(graph_id, segment_id, zero)
                else:
                    values.append(found.staleness)
            for segment_id in selected:
                table.insert_or_update(graph_id, segment_id, zero)
            table.advance()

        per_epoch.append(
            {
                "epoch": epoch,
                "lookups": len(values),
                "min": min(values) if values else None,
                "mean": float(np.mean(values)) if values else None,
                "max": max(values) if values else None,
            }
        )
        if epoch > 0:
            observed.extend(values)

    expected = n_graphs * J / S
    min_value = min(observed) if observed else None
    mean_value = float(np.mean(observed)) if observed else None

    relations = [
        RelationCheck(
            name="min_staleness_at_least_n",
            passed=min_value is None or min_value >= n_graphs,
            expected=float(n_graphs),
            observed=None if min_value is None else float(min_value),
        ),
        RelationCheck(
            name="mean_staleness_at_most_twice_nJ_over_S",
            passed=mean_value is None or mean_value <= 2.0 * expected,
            expected=expected,
            observed=mean_value,
        ),
    ]

    return StalenessSimulation(
        n_graphs=n_graphs,
        J=J,
        S=S,
        epochs=epochs,
        per_epoch=per_epoch,
        min_staleness=min_value,
        mean_staleness=mean_value,
        max_staleness=max(observed) if observed else None,
        expected_staleness=expected,
        relations=relations,
    )


def fit_and_score(
    plan: TrainPlan,
    model_config: ModelConfig,
    dataset: Dataset,
    segmented: list[SegmentedGraph],
    threads: int = 1,
) -> float | None:
    """Обучение по плану и метрика на тестовом разбиении."""
    trainer = Trainer(plan, build_model(model_config), TrainingData(dataset, segmented), threads=threads)
    run_training(trainer)
    return trainer.evaluate_split("test")


def _report(parameter: str, rows: list[AblationRow], values: Sequence[float]) -> AblationReport:
    means: dict[str, float | None] = {}
    for value in values:
        metrics = [row.metric for row in rows if row.value == float(value) and row.metric is not None]
        means[str(float(value))] = float(np.mean(metrics)) if metrics else None
    return AblationReport(parameter=parameter, rows=rows, means=means)


def ablate_p(
    plan: TrainPlan,
    model_config: ModelConfig,
    dataset: Dataset,
    segmented: list[SegmentedGraph],
    ps: Sequence[float] = (0.0, 0.25, 0.5, 0.75, 1.0),
    seeds: Sequence[int] = (0, 1, 2, 3, 4),
    threads: int = 1,
) -> AblationReport:
    """
    Перебор вероятности сохранения p для gst-efd по сидам.

    interior_maximum - среднее при p=0.5 строго выше, чем при p=0 и p=1
    (если все три значения есть в переборе).

    Returns:
        AblationReport: Метрика по (p, сид) и средние по p.
    """
    rows = []
    for p in ps:
        for seed in seeds:
            run_plan = plan.model_copy(update={"variant": Variant.GST_EFD, "p": p, "seed": seed})
            metric = fit_and_score(run_plan, model_config.model_copy(update={"seed": seed}), dataset, segmented, threads)
            log.info(f"Ablation p={p}, seed={seed}: test metric={metric}")
            rows.append(AblationRow(value=float(p), seed=seed, metric=metric))

    report = _report("p", rows, ps)
    middle, low, high = report.means.get("0.5"), report.means.get("0.0"), report.means.get("1.0")
    if middle is not None and low is not None and high is not None:
        report.interior_maximum = middle > low and middle > high
    return report


def ablate_cap(
    plan: TrainPlan,
    model_config: ModelConfig,
    dataset: Dataset,
    caps: Sequence[int] = (50, 100, 200, 400),
    seeds: Sequence[int] = (0, 1, 2),
    partition_seed: int = 0,
    threads: int = 1,
) -> AblationReport:
    """
    Перебор ограничения размера сегмента: для каждого ограничения датасет разбивается заново.

    Returns:
        AblationReport: Метрика по (ограничение, сид) и средние по ограничению.
    """
    rows = []
    for cap in caps:
        segmented = partition_dataset(dataset, plan.partition_method, cap, partition_seed, threads)
        for seed in seeds:
            run_plan = plan.model_copy(update={"max_segment_nodes": cap, "seed": seed})
            metric = fit_and_score(run_plan, model_config.model_copy(update={"seed": seed}), dataset, segmented, threads)
            log.info(f"Ablation cap={cap}, seed={seed}: test metric={metric}")
            rows.append(AblationRow(value=float(cap), seed=seed, metric=metric))

    return _report("max_segment_nodes", rows, [float(cap) for cap in caps])
