"""
Сервисы движка обучения: шаг обучения всех вариантов, дообучение головы и оркестрация эпох.
"""

import time
from collections.abc import Sequence
from typing import Protocol

import numpy as np
from loguru import logger as log

from apps.common.exceptions import ConfigError, MissingEmbeddingError
from apps.common.utils.parallel import parallel_map
from apps.diffcore import ops
from apps.diffcore.checkpoint import Checkpoint
from apps.diffcore.layers import Model, forward_segment, head_forward
from apps.diffcore.optim import learning_rate, optimizer_step
from apps.diffcore.tensor import Tape, Tensor, recording
from apps.diffcore.types import ForwardCounts, GradMode, Readout
from apps.embeddings.selectors import staleness_stats
from apps.embeddings.services import lookup_or_warm, refresh_all
from apps.embeddings.types import EmbeddingTable
from apps.graphs.types import ClassLabel, RegressionLabel, Task
from apps.metrics.losses import cross_entropy, pairwise_hinge
from apps.metrics.types import LossKind, PredictionBatch, Reduction
from apps.partition.types import SegmentedGraph
from apps.training.selectors import batch_metric, evaluate
from apps.training.types import (
    EpochRecord,
    EvalMode,
    Phase,
    RunLog,
    StepResult,
    TrainingData,
    TrainPlan,
    TrainRngs,
    Variant,
)
from apps.training.weights import aggregate, sample_segments, sed_weights


def _targets(segmented: Sequence[SegmentedGraph]) -> tuple[np.ndarray, np.ndarray]:
    labels = [sg.label for sg in segmented]
    groups = np.array([sg.group_id if sg.group_id is not None else -1 for sg in segmented], dtype=np.int64)

    if all(isinstance(label, ClassLabel) for label in labels):
        return np.array([label.class_index for label in labels], dtype=np.int64), groups  # type: ignore[union-attr]
    return np.array([label.target for label in labels if isinstance(label, RegressionLabel)], dtype=np.float64), groups


def compute_loss(kind: LossKind, outputs: Tensor, segmented: Sequence[SegmentedGraph]) -> Tensor:
    """
    Потеря пакета, усреднённая по графам пакета.

    Args:
        kind (LossKind): Вид потери.
        outputs (Tensor): Выход головы (B, C) или (B, 1).
        segmented (Sequence[SegmentedGraph]): Графы пакета.

    Returns:
        Tensor: Скаляр.
    """
    targets, groups = _targets(segmented)

    if kind is LossKind.CROSS_ENTROPY:
        return cross_entropy(outputs, targets, reduction=Reduction.MEAN)

    return pairwise_hinge(ops.column(outputs, 0), targets, groups, reduction=Reduction.MEAN)


def _predictions(outputs: Tensor, segmented: Sequence[SegmentedGraph]) -> PredictionBatch:
    targets, groups = _targets(segmented)
    values = outputs.data.copy() if outputs.shape[1] > 1 else outputs.data[:, 0].copy()
    return PredictionBatch(predictions=values, targets=targets, groups=groups)


class TrainingCallback(Protocol):
    """Наблюдатель обучения: вызывается в конце каждой эпохи."""

    def on_epoch_end(self, trainer: "Trainer", record: EpochRecord) -> None: ...


class Trainer:
    """
    Движок обучения одного запуска.

    Владеет параметрами модели на время шага (обратный проход и обновление выполняются
    в вызывающем потоке). Grad-disabled проходы варианта gst раздаются в пул потоков.

    Attributes:
        plan (TrainPlan): План с потерей и агрегированием, выбранными по задаче.
        loss_kind (LossKind): Вид потери.
        aggregation (Readout): Агрегирование сегментов.
        model (Model): Модель.
        data (TrainingData): Датасет и разложения.
        table (EmbeddingTable | None): Таблица эмбеддингов (для gst-e / gst-efd и дообучения).
        rngs (TrainRngs): Потоки случайности.
        threads (int): Потоки для grad-disabled проходов.
    """

    def __init__(
        self,
        plan: TrainPlan,
        model: Model,
        data: TrainingData,
        table: EmbeddingTable | None = None,
        threads: int = 1,
    ) -> None:
        plan = plan.for_task(data.dataset.task)
        assert plan.loss is not None and plan.aggregation is not None

        if plan.variant.uses_table and table is None:
            table = EmbeddingTable(width=model.config.hidden_width)

        self.plan = plan
        self.loss_kind: LossKind = plan.loss
        self.aggregation: Readout = plan.aggregation
        self.model = model
        self.data = data
        self.table = table
        self.threads = threads
        self.rngs = TrainRngs.from_seed(plan.seed)
        self.runlog = RunLog()
        self.epoch = 0

    @property
    def task(self) -> Task:
        return self.data.dataset.task

    # --- Шаг обучения ---

    def _graph_embedding(self, sg: SegmentedGraph, step: StepResult) -> Tensor:
        """Эмбеддинг одного графа пакета по правилам варианта."""
        plan, backbone = self.plan, self.model.backbone

        if plan.variant is Variant.FULL:
            return forward_segment(backbone, self.data.dataset[sg.parent], GradMode.ENABLED)

        J = sg.J
        selected = sample_segments(J, plan.S, self.rngs.select)
        S = len(selected)

        if plan.variant is Variant.GST_EFD:
            weights = list(sed_weights(J, S, selected, plan.p, self.rngs.dropout).weights)
        elif plan.variant is Variant.GST_ONE:
            weights = [J / S if j in selected else 0.0 for j in range(J)]
        else:
            weights = [1.0] * J

        embeddings: list[Tensor | None] = [None] * J
        for j in selected:
            embeddings[j] = forward_segment(backbone, sg.segments[j], GradMode.ENABLED)

        others = [j for j in range(J) if j not in selected]

        if plan.variant is Variant.GST:
            fresh = parallel_map(
                lambda j: forward_segment(backbone, sg.segments[j], GradMode.DISABLED),
                [j for j in others if weights[j] != 0.0],
                self.threads,
            )
            for j, embedding in zip([j for j in others if weights[j] != 0.0], fresh, strict=True):
                embeddings[j] = embedding

        elif plan.variant.uses_table:
            assert self.table is not None
            for j in others:
                segment = sg.segments[j]
                if weights[j] == 0.0:
                    step.skipped_lookup_nodes += segment.node_count
                    continue
                step.lookup_nodes += segment.node_count
                embeddings[j] = Tensor(lookup_or_warm(self.table, backbone, segment).embedding)

        graph_embedding = aggregate(embeddings, weights, J, self.aggregation)

        if plan.variant.uses_table:
            assert self.table is not None
            for j in selected:
                embedding = embeddings[j]
                assert embedding is not None
                self.table.insert_or_update(sg.parent, j, embedding.data)

        return graph_embedding

    def train_step(self, batch: Sequence[SegmentedGraph], lr: float | None = None) -> StepResult:
        """
        Один шаг оптимизатора на пакете графов.

        Args:
            batch (Sequence[SegmentedGraph]): Графы пакета.
            lr (float | None): Скорость обучения (None - plan.lr).

        Raises:
            BudgetExceededError: Удерживаемые активации превышают бюджет.
            NumericalError: NaN в градиентах.

        Returns:
            StepResult: Потеря, предсказания и счётчики шага.
        """
        plan, model = self.plan, self.model
        before = model.counter.snapshot()
        tape = Tape(budget_nodes=plan.effective_budget)
        step = StepResult(
            loss=0.0,
            predictions=PredictionBatch(np.empty(0), np.empty(0)),
            counts=ForwardCounts(),
            peak_retained_nodes=0,
        )

        with recording(tape):
            embeddings = [self._graph_embedding(sg, step) for sg in batch]
            outputs = head_forward(model.head, ops.stack(embeddings))
            loss = compute_loss(self.loss_kind, outputs, batch)

        if loss.requires_grad:
            tape.backward(loss)
        optimizer_step(model.params, plan.lr if lr is None else lr, plan.optimizer_config())

        if self.table is not None and plan.variant.uses_table:
            self.table.advance()

        step.loss = loss.item()
        step.predictions = _predictions(outputs, batch)
        step.counts = model.counter.snapshot() - before
        step.peak_retained_nodes = tape.peak_retained_nodes
        self.runlog.step_losses.append(step.loss)

        log.debug(f"Step loss={step.loss:.6f}, peak={step.peak_retained_nodes} nodes")
        return step

    # --- Порядок обхода ---

    def batches(self, segmented: Sequence[SegmentedGraph], rng: np.random.Generator | None) -> list[list[SegmentedGraph]]:
        """
        Пакеты эпохи.

        Для ранжирования пакеты формируются внутри групп (конфигурации одного графа),
        иначе попарная потеря не имеет пар.
        """
        size = self.plan.batch_size
        order = list(range(len(segmented))) if rng is None else rng.permutation(len(segmented)).tolist()

        if self.task is not Task.RANKING:
            return [[segmented[i] for i in order[k : k + size]] for k in range(0, len(order), size)]

        by_group: dict[int, list[SegmentedGraph]] = {}
        for i in order:
            group_id = segmented[i].group_id
            by_group.setdefault(group_id if group_id is not None else -1, []).append(segmented[i])

        group_order = list(by_group) if rng is None else [list(by_group)[i] for i in rng.permutation(len(by_group))]
        result = []
        for group in group_order:
            members = by_group[group]
            result.extend(members[k : k + size] for k in range(0, len(members), size))
        return result

    # --- Эпохи ---

    def train_epoch(self, epoch: int) -> EpochRecord:
        """Эпоха основного обучения."""
        started = time.perf_counter()
        lr = learning_rate(self.plan.lr, self.plan.schedule, epoch, self.plan.epochs)
        train = self.data.split("train")

        steps = [
            self.train_step(batch, lr)
            for batch in self.batches(train, self.rngs.order if self.plan.shuffle else None)
            if len(batch) > 0
        ]

        return self._record(epoch, Phase.TRAIN, lr, steps, started)

    def finetune_epoch(self, epoch: int, lr: float | None = None) -> EpochRecord:
        """Эпоха дообучения головы на эмбеддингах таблицы."""
        started = time.perf_counter()
        lr = lr or self.plan.finetune_lr or self.plan.lr
        train = self.data.split("train")

        steps = [
            finetune_step(self, batch, lr)
            for batch in self.batches(train, self.rngs.order if self.plan.shuffle else None)
            if len(batch) > 0
        ]

        return self._record(epoch, Phase.FINETUNE, lr, steps, started)

    def _record(self, epoch: int, phase: Phase, lr: float, steps: list[StepResult], started: float) -> EpochRecord:
        train_predictions = PredictionBatch.concat([s.predictions for s in steps]) if steps else None

        record = EpochRecord(
            epoch=epoch,
            phase=phase,
            iteration=self.table.current_iteration if self.table is not None else len(self.runlog.step_losses),
            lr=lr,
            loss=float(np.mean([s.loss for s in steps])) if steps else 0.0,
            train_metric=batch_metric(self.task, train_predictions) if train_predictions is not None else None,
            train_fresh_metric=self.evaluate_split("train"),
            val_metric=self.evaluate_split("val"),
            test_metric=self.evaluate_split("test"),
            grad_enabled_nodes=sum(s.counts.grad_enabled_nodes for s in steps),
            grad_disabled_nodes=sum(s.counts.grad_disabled_nodes for s in steps),
            lookup_nodes=sum(s.lookup_nodes for s in steps),
            skipped_lookup_nodes=sum(s.skipped_lookup_nodes for s in steps),
            peak_retained_nodes=max((s.peak_retained_nodes for s in steps), default=0),
            staleness=staleness_stats(self.table).as_dict() if self.table is not None and len(self.table) else None,
            wall_time=time.perf_counter() - started,
        )

        self.runlog.records.append(record)
        return record

    def evaluate_split(self, split: str, mode: EvalMode = EvalMode.FRESH_SEGMENTS) -> float | None:
        segmented = self.data.split(split)
        if not segmented:
            return None
        return evaluate(self.model, self.data, segmented, mode, self.aggregation, self.table, self.threads).metric

    # --- Чекпоинты ---

    def checkpoint(self, config_hash: str = "") -> Checkpoint:
        """Снимок состояния запуска на границе эпох."""
        return Checkpoint.capture(
            self.model,
            epoch=self.epoch,
            config_hash=config_hash,
            state={
                "plan": self.plan.model_dump(mode="json"),
                "rngs": self.rngs.state(),
                "table": self.table.snapshot() if self.table is not None else None,
                "runlog": self.runlog.dump(),
            },
        )

    @classmethod
    def from_checkpoint(cls, checkpoint: Checkpoint, data: TrainingData, threads: int = 1) -> "Trainer":
        """
        Восстанавливает движок из чекпоинта для продолжения с сохранённой эпохи.

        Raises:
            ConfigError: В чекпоинте нет плана обучения.
        """
        if "plan" not in checkpoint.state:
            raise ConfigError("Checkpoint has no training plan to resume from")

        plan = TrainPlan.model_validate(checkpoint.state["plan"])
        table_state = checkpoint.state.get("table")
        table = EmbeddingTable.restore(table_state) if table_state else None

        trainer = cls(plan, checkpoint.restore_model(), data, table=table, threads=threads)
        trainer.rngs.restore(checkpoint.state["rngs"])
        trainer.runlog = RunLog.load(checkpoint.state.get("runlog", {}))
        trainer.epoch = checkpoint.epoch
        return trainer


def finetune_step(trainer: Trainer, batch: Sequence[SegmentedGraph], lr: float) -> StepResult:
    """
    Шаг дообучения головы: эмбеддинги из таблицы с единичными весами, обновляется только голова.

    Raises:
        MissingEmbeddingError: В таблице нет записи сегмента.
    """
    table, model = trainer.table, trainer.model
    assert table is not None

    tape = Tape()
    with recording(tape):
        embeddings = []
        for sg in batch:
            vectors: list[Tensor | None] = []
            for segment in sg.segments:
                found = table.lookup(sg.parent, segment.segment_id)
                if found is None:
                    raise MissingEmbeddingError(f"No table entry for segment {segment.key}", details={"key": list(segment.key)})
                vectors.append(Tensor(found.embedding))
            embeddings.append(aggregate(vectors, [1.0] * sg.J, sg.J, trainer.aggregation))

        outputs = head_forward(model.head, ops.stack(embeddings))
        loss = compute_loss(trainer.loss_kind, outputs, batch)

    if loss.requires_grad:
        tape.backward(loss)
    optimizer_step(model.params, lr, trainer.plan.optimizer_config(), names=model.head_names)
    trainer.runlog.step_losses.append(loss.item())

    return StepResult(
        loss=loss.item(),
        predictions=_predictions(outputs, batch),
        counts=ForwardCounts(),
        peak_retained_nodes=0,
        lookup_nodes=sum(segment.node_count for sg in batch for segment in sg.segments),
    )


def finetune_head(trainer: Trainer, epochs: int, lr: float | None = None) -> list[EpochRecord]:
    """
    Дообучение только головы на эмбеддингах таблицы.

    Предполагает, что refresh_all выполнен непосредственно перед вызовом.
    Параметры backbone остаются побитно неизменными.

    Args:
        trainer (Trainer): Движок с заполненной таблицей.
        epochs (int): Число эпох (0 - модель не меняется).
        lr (float | None): Скорость обучения головы.

    Raises:
        MissingEmbeddingError: Таблицы нет или в ней не хватает записей.

    Returns:
        list[EpochRecord]: Записи журнала.
    """
    if epochs == 0:
        return []
    if trainer.table is None:
        raise MissingEmbeddingError("finetune_head() requires an embedding table")

    return [trainer.finetune_epoch(trainer.epoch + offset, lr) for offset in range(epochs)]


def run_training(
    trainer: Trainer,
    callbacks: Sequence[TrainingCallback] = (),
) -> RunLog:
    """
    Полный запуск: T0 эпох основного обучения, затем обновление таблицы и дообучение головы.

    Продолжает с trainer.epoch (после восстановления из чекпоинта - с сохранённой эпохи).

    Args:
        trainer (Trainer): Движок.
        callbacks (Sequence[TrainingCallback]): Наблюдатели (вызываются после каждой эпохи).

    Returns:
        RunLog: Журнал запуска.
    """
    plan = trainer.plan
    log.info(
        f"Training: variant={plan.variant.value}, S={plan.S}, p={plan.p}, cap={plan.max_segment_nodes}, "
        f"epochs={plan.epochs}+{plan.finetune_epochs}, budget={plan.effective_budget} nodes"
    )

    while trainer.epoch < plan.total_epochs:
        epoch = trainer.epoch

        if epoch < plan.epochs:
            record = trainer.train_epoch(epoch)
        else:
            if epoch == plan.epochs:
                log.info(f"Epoch {epoch}: finetuning head")
                if trainer.table is None:
                    trainer.table = EmbeddingTable(width=trainer.model.config.hidden_width)
                refresh_all(trainer.table, trainer.model.backbone, trainer.data.segmented, trainer.threads)
            record = trainer.finetune_epoch(epoch)

        trainer.epoch = epoch + 1
        log.info(
            f"Epoch {epoch + 1}/{plan.total_epochs} [{record.phase.value}]: loss={record.loss:.4f}, "
            f"train={record.train_metric}, val={record.val_metric}, test={record.test_metric}"
        )

        for callback in callbacks:
            callback.on_epoch_end(trainer, record)

    return trainer.runlog
