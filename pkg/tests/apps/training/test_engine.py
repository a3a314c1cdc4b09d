"""
Тесты движка обучения: предельные случаи вариантов, бюджет активаций, счётчики проходов,
дообучение головы, чекпоинты и оценка.
"""

from pathlib import Path

import numpy as np
import pytest

from apps.common.exceptions import BudgetExceededError, ConfigError, MissingEmbeddingError
from apps.diffcore.checkpoint import load_checkpoint, save_checkpoint
from apps.diffcore.layers import build_model
from apps.diffcore.types import ModelConfig, Readout
from apps.embeddings.services import refresh_all
from apps.graphs.services import make_dataset
from apps.graphs.types import ClassLabel, RegressionLabel, Split
from apps.metrics.types import LossKind
from apps.training.selectors import evaluate
from apps.training.services import Trainer, finetune_head, run_training
from apps.training.types import EpochRecord, EvalMode, TrainingData, Variant
from tests.utils.factories import GraphFactory, ModelConfigFactory, TrainPlanFactory, path_graph, training_data_for


def make_trainer(data: TrainingData, config: ModelConfig, **plan: object) -> Trainer:
    return Trainer(TrainPlanFactory(**plan), build_model(config), data)


def run_steps(trainer: Trainer, steps: int) -> list[float]:
    """Шаги оптимизатора по эпохам обучающей выборки, без оценки."""
    losses: list[float] = []
    train = trainer.data.split("train")
    while len(losses) < steps:
        for batch in trainer.batches(train, trainer.rngs.order):
            losses.append(trainer.train_step(batch).loss)
    return losses[:steps]


class TestLimitingCases:
    """gst-efd при p = 1 и p = 0 совпадает с gst-e и gst-one побитно."""

    def test_keep_all_equals_table_variant(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        sed = make_trainer(small_data, model_config, variant=Variant.GST_EFD, p=1.0)
        table = make_trainer(small_data, model_config, variant=Variant.GST_E)

        sed_losses = run_steps(sed, 100)
        table_losses = run_steps(table, 100)

        assert [x.hex() for x in sed_losses] == [x.hex() for x in table_losses]
        assert sed.model.params.fingerprint() == table.model.params.fingerprint()
        assert sed.table is not None and table.table is not None
        assert sed.table.snapshot() == table.table.snapshot()

    def test_drop_all_equals_single_segment_variant(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        sed = make_trainer(small_data, model_config, variant=Variant.GST_EFD, p=0.0)
        one = make_trainer(small_data, model_config, variant=Variant.GST_ONE)

        sed_losses = run_steps(sed, 100)
        one_losses = run_steps(one, 100)

        assert [x.hex() for x in sed_losses] == [x.hex() for x in one_losses]
        assert sed.model.params.fingerprint() == one.model.params.fingerprint()


class TestBudget:
    """Пик удерживаемых активаций не превышает batch_size * S * max_segment_nodes."""

    @pytest.fixture
    def large_data(self) -> TrainingData:
        dataset = make_dataset(
            [
                path_graph(200, graph_id=0, label=ClassLabel(0, 2)),
                path_graph(10_000, graph_id=1, label=ClassLabel(1, 2)),
            ]
        )
        return training_data_for(dataset, max_segment_nodes=50)

    @pytest.mark.parametrize("variant", [Variant.GST_ONE, Variant.GST, Variant.GST_E, Variant.GST_EFD])
    def test_peak_within_budget(self, large_data: TrainingData, model_config: ModelConfig, variant: Variant) -> None:
        trainer = make_trainer(large_data, model_config, variant=variant, S=2, max_segment_nodes=50)

        step = trainer.train_step(large_data.split("train"))

        assert trainer.plan.effective_budget == 200
        assert 0 < step.peak_retained_nodes <= 200
        assert step.counts.grad_enabled_nodes == step.peak_retained_nodes

    def test_full_graph_exceeds_budget(self, large_data: TrainingData, model_config: ModelConfig) -> None:
        trainer = make_trainer(large_data, model_config, variant=Variant.FULL, S=2, max_segment_nodes=50)
        before = trainer.model.params.fingerprint()

        with pytest.raises(BudgetExceededError):
            trainer.train_step(large_data.split("train"))

        assert trainer.model.params.fingerprint() == before


class TestForwardCounts:
    """Учёт проходов по вариантам на одном шаге."""

    def test_variants_share_gradient_segments(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        batch = small_data.split("train")[:2]
        steps = {
            variant: make_trainer(small_data, model_config, variant=variant).train_step(batch)
            for variant in (Variant.GST_ONE, Variant.GST, Variant.GST_E, Variant.GST_EFD)
        }

        enabled = {step.counts.grad_enabled_nodes for step in steps.values()}
        assert len(enabled) == 1

        # gst-efd не читает таблицу для выброшенных сегментов
        e, efd = steps[Variant.GST_E], steps[Variant.GST_EFD]
        assert e.lookup_nodes == efd.lookup_nodes + efd.skipped_lookup_nodes
        assert e.skipped_lookup_nodes == 0

        # gst считает невыбранные сегменты заново, gst-one их не трогает
        total = sum(sg.parent_node_count for sg in batch)
        assert steps[Variant.GST].counts.grad_disabled_nodes == total - steps[Variant.GST].counts.grad_enabled_nodes
        assert steps[Variant.GST_ONE].counts.grad_disabled_nodes == 0

    def test_full_variant_runs_whole_graphs(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        batch = small_data.split("train")[:2]

        step = make_trainer(small_data, model_config, variant=Variant.FULL, max_segment_nodes=20).train_step(batch)

        assert step.counts.grad_enabled_nodes == sum(sg.parent_node_count for sg in batch)
        assert step.counts.grad_disabled_nodes == 0

    def test_table_advances_once_per_step(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        trainer = make_trainer(small_data, model_config, variant=Variant.GST_EFD)

        run_steps(trainer, 5)

        assert trainer.table is not None and trainer.table.current_iteration == 5


class TestFinetune:
    """Дообучение только головы."""

    def test_backbone_is_frozen(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        trainer = make_trainer(small_data, model_config, variant=Variant.GST_EFD)
        run_steps(trainer, 4)
        assert trainer.table is not None
        refresh_all(trainer.table, trainer.model.backbone, small_data.segmented)
        backbone = trainer.model.params.fingerprint(trainer.model.backbone_names)
        head = trainer.model.params.fingerprint(trainer.model.head_names)

        records = finetune_head(trainer, epochs=2)

        assert len(records) == 2
        assert trainer.model.params.fingerprint(trainer.model.backbone_names) == backbone
        assert trainer.model.params.fingerprint(trainer.model.head_names) != head

    def test_zero_epochs_is_a_noop(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        trainer = make_trainer(small_data, model_config, variant=Variant.GST)
        before = trainer.model.params.fingerprint()

        assert finetune_head(trainer, epochs=0) == []
        assert trainer.model.params.fingerprint() == before

    def test_requires_table(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        with pytest.raises(MissingEmbeddingError):
            finetune_head(make_trainer(small_data, model_config, variant=Variant.GST), epochs=1)

    def test_run_training_refreshes_table_before_finetuning(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        trainer = make_trainer(small_data, model_config, variant=Variant.GST, epochs=1, finetune_epochs=1)

        runlog = run_training(trainer)

        assert [record.phase.value for record in runlog.records] == ["train", "finetune"]
        assert trainer.table is not None
        assert len(trainer.table) == sum(sg.J for sg in small_data.segmented)


class CheckpointAt:
    """Сохраняет чекпоинт после заданной эпохи."""

    def __init__(self, epoch: int, path: Path) -> None:
        self.epoch = epoch
        self.path = path

    def on_epoch_end(self, trainer: Trainer, record: EpochRecord) -> None:
        if trainer.epoch == self.epoch:
            save_checkpoint(trainer.checkpoint(config_hash="run"), self.path)


class TestResume:
    def test_resumed_run_matches_uninterrupted(self, small_data: TrainingData, model_config: ModelConfig, tmp_path: Path) -> None:
        """Продолжение с эпохи 2 воспроизводит запуск без остановки побитно."""
        path = tmp_path / "checkpoint.json"
        plan = {"variant": Variant.GST_EFD, "epochs": 3, "finetune_epochs": 1}
        uninterrupted = make_trainer(small_data, model_config, **plan)
        full_log = run_training(uninterrupted, callbacks=[CheckpointAt(2, path)])

        resumed = Trainer.from_checkpoint(load_checkpoint(path), small_data)
        resumed_log = run_training(resumed)

        # --- Проверки ---

        assert resumed.model.params.fingerprint() == uninterrupted.model.params.fingerprint()
        assert [x.hex() for x in resumed_log.step_losses] == [x.hex() for x in full_log.step_losses]
        assert [r.loss for r in resumed_log.records] == [r.loss for r in full_log.records]


class TestEvaluate:
    """Оценка не меняет ни параметры, ни таблицу."""

    @pytest.mark.parametrize("mode", list(EvalMode))
    def test_evaluation_is_read_only(self, small_data: TrainingData, model_config: ModelConfig, mode: EvalMode) -> None:
        trainer = make_trainer(small_data, model_config, variant=Variant.GST_EFD)
        run_steps(trainer, 3)
        assert trainer.table is not None
        refresh_all(trainer.table, trainer.model.backbone, small_data.segmented)
        params, table = trainer.model.params.fingerprint(), trainer.table.snapshot()
        graphs = small_data.split("train")

        first = evaluate(trainer.model, small_data, graphs, mode, table=trainer.table, threads=2)
        second = evaluate(trainer.model, small_data, graphs, mode, table=trainer.table)

        assert trainer.model.params.fingerprint() == params
        assert trainer.table.snapshot() == table
        assert np.array_equal(first.predictions.predictions, second.predictions.predictions)
        assert first.metric is not None and 0.0 <= first.metric <= 1.0

    def test_table_mode_without_entries(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        with pytest.raises(MissingEmbeddingError):
            evaluate(build_model(model_config), small_data, small_data.split("test"), EvalMode.TABLE, table=None)

    def test_empty_split(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        assert evaluate(build_model(model_config), small_data, []).metric is None


class TestRanking:
    """Ранжирование: пакеты внутри групп и попарная потеря."""

    @pytest.fixture
    def ranking_data(self) -> TrainingData:
        graphs = [
            GraphFactory(graph_id=i, node_count=6 + i, label=RegressionLabel(float(i % 3)), group_id=i // 3)
            for i in range(6)
        ]
        return training_data_for(make_dataset(graphs, Split(train=tuple(range(6)))), max_segment_nodes=4)

    def test_batches_stay_within_groups(self, ranking_data: TrainingData) -> None:
        plan = TrainPlanFactory(loss=LossKind.PAIRWISE_HINGE, aggregation=Readout.SUM, batch_size=2)
        trainer = Trainer(plan, build_model(ModelConfigFactory(out_width=1)), ranking_data)

        batches = trainer.batches(ranking_data.split("train"), np.random.default_rng(0))

        assert sorted(len(batch) for batch in batches) == [1, 1, 2, 2]
        assert all(len({sg.group_id for sg in batch}) == 1 for batch in batches)

    def test_training_reports_opa(self, ranking_data: TrainingData) -> None:
        plan = TrainPlanFactory(loss=LossKind.PAIRWISE_HINGE, aggregation=Readout.SUM, batch_size=3, epochs=2)
        trainer = Trainer(plan, build_model(ModelConfigFactory(out_width=1)), ranking_data)

        runlog = run_training(trainer)

        assert len(runlog.records) == 2
        assert all(record.train_metric is not None and 0.0 <= record.train_metric <= 1.0 for record in runlog.records)

    def test_default_plan_picks_hinge_and_sum(self, ranking_data: TrainingData) -> None:
        """План без потери и агрегирования обучается на ранжировании с hinge и суммой сегментов."""
        trainer = Trainer(TrainPlanFactory(batch_size=3), build_model(ModelConfigFactory(out_width=1)), ranking_data)

        step = trainer.train_step(ranking_data.split("train")[:3])

        assert trainer.loss_kind is LossKind.PAIRWISE_HINGE
        assert trainer.aggregation is Readout.SUM
        assert trainer.plan.loss is LossKind.PAIRWISE_HINGE
        assert np.isfinite(step.loss)

    def test_cross_entropy_on_ranking_is_config_error(self, ranking_data: TrainingData) -> None:
        plan = TrainPlanFactory(loss=LossKind.CROSS_ENTROPY)

        with pytest.raises(ConfigError, match="does not fit"):
            Trainer(plan, build_model(ModelConfigFactory(out_width=1)), ranking_data)

    def test_hinge_with_single_graph_batches_is_config_error(self, ranking_data: TrainingData) -> None:
        with pytest.raises(ConfigError, match="batch_size"):
            Trainer(TrainPlanFactory(batch_size=1), build_model(ModelConfigFactory(out_width=1)), ranking_data)

    def test_ungrouped_graphs_do_not_join_group_zero(self) -> None:
        graphs = [
            GraphFactory(graph_id=i, node_count=6, label=RegressionLabel(float(i)), group_id=0 if i < 2 else None)
            for i in range(4)
        ]
        data = training_data_for(make_dataset(graphs, Split(train=tuple(range(4)))), max_segment_nodes=4)
        trainer = Trainer(TrainPlanFactory(batch_size=4), build_model(ModelConfigFactory(out_width=1)), data)

        batches = trainer.batches(data.split("train"), None)

        assert [[sg.parent for sg in batch] for batch in batches] == [[0, 1], [2, 3]]


class TestTaskDefaults:
    """Потеря и агрегирование по задаче датасета."""

    def test_classification_defaults(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        trainer = make_trainer(small_data, model_config)

        assert trainer.loss_kind is LossKind.CROSS_ENTROPY
        assert trainer.aggregation is Readout.MEAN

    def test_hinge_on_classification_is_config_error(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        with pytest.raises(ConfigError):
            make_trainer(small_data, model_config, loss=LossKind.PAIRWISE_HINGE)

    def test_explicit_aggregation_is_kept(self, small_data: TrainingData, model_config: ModelConfig) -> None:
        trainer = make_trainer(small_data, model_config, aggregation=Readout.SUM)

        assert trainer.aggregation is Readout.SUM
