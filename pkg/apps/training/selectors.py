"""
Селекторы (Read Logic) движка обучения: оценка модели без изменения её состояния.
"""

from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from apps.common.exceptions import MissingEmbeddingError
from apps.common.utils.parallel import parallel_map
from apps.diffcore import ops
from apps.diffcore.layers import Model, forward_segment, head_forward
from apps.diffcore.tensor import Tensor, no_grad
from apps.diffcore.types import GradMode, Readout
from apps.embeddings.types import EmbeddingTable
from apps.graphs.types import ClassLabel, Task
from apps.metrics.scores import accuracy, grouped_opa
from apps.metrics.types import PredictionBatch
from apps.partition.types import SegmentedGraph
from apps.training.types import EvalMode, TrainingData
from apps.training.weights import aggregate


@dataclass(frozen=True)
class EvalResult:
    """Итог оценки: метрика и предсказания."""

    metric: float | None
    predictions: PredictionBatch


def batch_metric(task: Task, batch: PredictionBatch) -> float | None:
    """Точность (классификация) или OPA по группам (ранжирование)."""
    if len(batch) == 0:
        return None
    if task is Task.CLASSIFICATION:
        return accuracy(batch.predictions, batch.targets)
    return grouped_opa(batch)


def _graph_embedding(
    model: Model,
    data: TrainingData,
    sg: SegmentedGraph,
    mode: EvalMode,
    aggregation: Readout,
    table: EmbeddingTable | None,
) -> Tensor:
    backbone = model.backbone

    if mode is EvalMode.FULL_GRAPH:
        return forward_segment(backbone, data.dataset[sg.parent], GradMode.DISABLED)

    if mode is EvalMode.TABLE:
        if table is None:
            raise MissingEmbeddingError("table evaluation requires an embedding table")
        vectors: list[Tensor | None] = []
        for segment in sg.segments:
            found = table.lookup(sg.parent, segment.segment_id)
            if found is None:
                raise MissingEmbeddingError(f"No table entry for segment {segment.key}")
            vectors.append(Tensor(found.embedding))
    else:
        vectors = [forward_segment(backbone, segment, GradMode.DISABLED) for segment in sg.segments]

    return aggregate(vectors, [1.0] * sg.J, sg.J, aggregation)


def evaluate(
    model: Model,
    data: TrainingData,
    segmented: Sequence[SegmentedGraph],
    mode: EvalMode | str = EvalMode.FRESH_SEGMENTS,
    aggregation: Readout | str = Readout.MEAN,
    table: EmbeddingTable | None = None,
    threads: int = 1,
) -> EvalResult:
    """
    Оценка модели на наборе графов.

    fresh-segments: все сегменты grad-disabled текущими параметрами, единичные веса
    (без таблицы и дропаута). full-graph: граф целиком. table: агрегирование записей таблицы.
    Оценка детерминирована и не меняет ни параметры, ни таблицу.

    Args:
        model (Model): Модель.
        data (TrainingData): Датасет и разложения.
        segmented (Sequence[SegmentedGraph]): Оцениваемые графы.
        mode (EvalMode | str): Режим.
        aggregation (Readout | str): Агрегирование сегментов.
        table (EmbeddingTable | None): Таблица (для режима table).
        threads (int): Потоки (графы оцениваются независимо).

    Raises:
        MissingEmbeddingError: Режим table без нужных записей.

    Returns:
        EvalResult: Метрика и предсказания.
    """
    eval_mode, readout = EvalMode(mode), Readout(aggregation)

    with no_grad():
        embeddings = parallel_map(
            lambda sg: _graph_embedding(model, data, sg, eval_mode, readout, table).data,
            list(segmented),
            threads,
        )

        if not embeddings:
            return EvalResult(metric=None, predictions=PredictionBatch(np.empty(0), np.empty(0)))

        outputs = head_forward(model.head, ops.stack([Tensor(e) for e in embeddings])).data

    labels = [sg.label for sg in segmented]
    if all(isinstance(label, ClassLabel) for label in labels):
        targets = np.array([label.class_index for label in labels], dtype=np.int64)  # type: ignore[union-attr]
        predictions = outputs
    else:
        targets = np.array([label.target for label in labels], dtype=np.float64)  # type: ignore[union-attr]
        predictions = outputs[:, 0]

    groups = np.array([sg.group_id if sg.group_id is not None else -1 for sg in segmented], dtype=np.int64)
    batch = PredictionBatch(predictions=predictions, targets=targets, groups=groups)

    return EvalResult(metric=batch_metric(data.dataset.task, batch), predictions=batch)
