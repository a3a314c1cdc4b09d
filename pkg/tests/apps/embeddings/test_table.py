"""
Тесты таблицы исторических эмбеддингов.
"""

import numpy as np
import pytest

from apps.common.exceptions import DatasetIOError, EmptyTableError, WidthMismatchError
from apps.diffcore.layers import build_model, forward_segment
from apps.diffcore.types import GradMode
from apps.embeddings.selectors import staleness_stats
from apps.embeddings.services import lookup_or_warm, refresh_all
from apps.embeddings.types import EmbeddingTable
from apps.training.types import TrainingData
from tests.utils.factories import ModelConfigFactory


class TestEmbeddingTable:
    """Запись, чтение и устаревание."""

    def test_lookup_missing_key(self) -> None:
        assert EmbeddingTable(width=2).lookup(0, 0) is None

    def test_staleness_counts_iterations_since_write(self) -> None:
        table = EmbeddingTable(width=2)
        table.insert_or_update(0, 1, np.array([1.0, 2.0]))
        table.advance(3)

        found = table.lookup(0, 1)

        assert found is not None
        assert found.embedding.tolist() == [1.0, 2.0]
        assert found.staleness == 3

    def test_update_resets_staleness(self) -> None:
        table = EmbeddingTable(width=1)
        table.insert_or_update(0, 0, np.zeros(1))
        table.advance(5)
        table.insert_or_update(0, 0, np.ones(1))

        found = table.lookup(0, 0)

        assert found is not None and found.staleness == 0 and found.embedding.tolist() == [1.0]

    def test_stored_vector_is_a_frozen_copy(self) -> None:
        table = EmbeddingTable(width=2)
        vector = np.array([1.0, 2.0])
        table.insert_or_update(0, 0, vector)
        vector[0] = 9.0

        found = table.lookup(0, 0)

        assert found is not None and found.embedding.tolist() == [1.0, 2.0]
        with pytest.raises(ValueError):
            found.embedding[0] = 0.0

    def test_width_mismatch(self) -> None:
        with pytest.raises(WidthMismatchError):
            EmbeddingTable(width=3).insert_or_update(0, 0, np.zeros(2))

    def test_snapshot_restore_is_exact(self) -> None:
        table = EmbeddingTable(width=2)
        table.insert_or_update(1, 0, np.array([0.1, 1 / 3]))
        table.advance(2)
        table.insert_or_update(0, 2, np.array([np.pi, -0.0]))

        restored = EmbeddingTable.restore(table.snapshot())

        assert restored.keys() == [(0, 2), (1, 0)]
        assert restored.current_iteration == 2
        assert restored.staleness_values().tolist() == [0, 2]
        for key in table.keys():
            assert table.lookup(*key).embedding.tobytes() == restored.lookup(*key).embedding.tobytes()  # type: ignore[union-attr]

    def test_restore_corrupted_snapshot(self) -> None:
        with pytest.raises(DatasetIOError):
            EmbeddingTable.restore({"width": 2})


class TestStalenessStats:
    def test_empty_table(self) -> None:
        with pytest.raises(EmptyTableError):
            staleness_stats(EmbeddingTable(width=1))

    def test_histogram(self) -> None:
        table = EmbeddingTable(width=1)
        table.insert_or_update(0, 0, np.zeros(1))
        table.advance()
        table.insert_or_update(0, 1, np.zeros(1))
        table.insert_or_update(0, 2, np.zeros(1))

        stats = staleness_stats(table)

        assert (stats.max, stats.histogram) == (1, {0: 2, 1: 1})
        assert stats.mean == pytest.approx(1 / 3)


class TestRefresh:
    """Полное обновление и ленивый прогрев."""

    def test_refresh_all_writes_fresh_embeddings(self, small_data: TrainingData) -> None:
        model = build_model(ModelConfigFactory())
        table = EmbeddingTable(width=model.config.hidden_width)
        table.advance(4)

        refresh_all(table, model.backbone, small_data.segmented, threads=3)

        assert len(table) == sum(sg.J for sg in small_data.segmented)
        assert set(table.staleness_values().tolist()) == {0}
        for sg in small_data.segmented:
            for segment in sg.segments:
                expected = forward_segment(model.backbone, segment, GradMode.DISABLED).data
                assert np.array_equal(table.lookup(*segment.key).embedding, expected)  # type: ignore[union-attr]

    def test_lookup_or_warm_fills_missing_key_once(self, small_data: TrainingData) -> None:
        model = build_model(ModelConfigFactory())
        table = EmbeddingTable(width=model.config.hidden_width)
        segment = small_data.segmented[0].segments[0]

        first = lookup_or_warm(table, model.backbone, segment)
        table.advance()
        second = lookup_or_warm(table, model.backbone, segment)

        assert first.staleness == 0 and second.staleness == 1
        assert np.array_equal(first.embedding, second.embedding)
        assert model.counter.snapshot().grad_disabled_nodes == segment.node_count
