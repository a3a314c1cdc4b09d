"""
Тесты выбора сегментов, весов SED и агрегирования.
"""

import numpy as np
import pytest

from apps.common.exceptions import ConfigError, WidthMismatchError
from apps.diffcore.tensor import Tensor
from apps.diffcore.types import Readout
from apps.training.weights import aggregate, sample_segments, sed_weights


class TestSampleSegments:
    def test_distinct_sorted_indices(self) -> None:
        selected = sample_segments(10, 4, np.random.default_rng(0))

        assert len(set(selected)) == 4
        assert list(selected) == sorted(selected)
        assert all(0 <= j < 10 for j in selected)

    def test_uniform_over_segments(self) -> None:
        """J = 5, S = 1: частота каждого индекса 0.2 +- 0.02 на 10 000 выборках."""
        rng = np.random.default_rng(11)

        counts = np.bincount([sample_segments(5, 1, rng)[0] for _ in range(10_000)], minlength=5)

        assert np.all(np.abs(counts / 10_000 - 0.2) < 0.02)

    def test_s_larger_than_j_takes_every_segment(self) -> None:
        assert sample_segments(3, 5, np.random.default_rng(0)) == (0, 1, 2)

    def test_invalid_counts(self) -> None:
        with pytest.raises(ConfigError):
            sample_segments(0, 1, np.random.default_rng(0))


class TestSedWeights:
    """Веса Stale Embedding Dropout."""

    def test_selected_weight(self) -> None:
        assignment = sed_weights(4, 1, (2,), 0.5, np.random.default_rng(0))

        assert assignment.weights[2] == 2.5
        assert assignment.selected == (2,)
        assert all(assignment.weights[j] in (0.0, 1.0) for j in (0, 1, 3))

    def test_one_draw_per_unselected_segment(self) -> None:
        """Каждый невыбранный сегмент тратит ровно одно число потока, по возрастанию индекса."""
        rng = np.random.default_rng(5)
        draws = np.random.default_rng(5).random(3)

        assignment = sed_weights(5, 2, (0, 3), 0.4, rng)

        expected = [1.0 if draw < 0.4 else 0.0 for draw in draws]
        assert [assignment.weights[j] for j in (1, 2, 4)] == expected
        reference = np.random.default_rng(5)
        reference.random(3)
        assert rng.random() == reference.random()

    def test_keep_everything(self) -> None:
        assignment = sed_weights(6, 2, (1, 4), 1.0, np.random.default_rng(1))

        assert assignment.weights == (1.0,) * 6
        assert assignment.dropped == ()

    def test_drop_everything_stale(self) -> None:
        assignment = sed_weights(6, 2, (1, 4), 0.0, np.random.default_rng(1))

        assert assignment.weights == (0.0, 3.0, 0.0, 0.0, 3.0, 0.0)
        assert assignment.dropped == (0, 2, 3, 5)

    def test_expected_total_weight_is_j(self) -> None:
        """Сумма весов в среднем равна J: S * (p + (1 - p) J / S) + p (J - S)."""
        rng = np.random.default_rng(3)
        J, S, p = 7, 2, 0.3

        totals = [sum(sed_weights(J, S, sample_segments(J, S, rng), p, rng).weights) for _ in range(4000)]

        # Стандартная ошибка: sqrt(p (1 - p) (J - S)) / sqrt(4000)
        assert np.mean(totals) == pytest.approx(J, abs=4 * np.sqrt(p * (1 - p) * (J - S) / 4000))

    @pytest.mark.parametrize(
        ("J", "S", "selected", "p"),
        [(4, 1, (0,), 1.5), (4, 1, (0,), -0.1), (4, 2, (1, 1), 0.5), (4, 1, (4,), 0.5), (4, 2, (0,), 0.5)],
    )
    def test_invalid_arguments(self, J: int, S: int, selected: tuple[int, ...], p: float) -> None:
        with pytest.raises(ConfigError):
            sed_weights(J, S, selected, p, np.random.default_rng(0))


class TestAggregate:
    def test_mean_and_sum(self) -> None:
        vectors = [Tensor(np.array([1.0, 2.0])), Tensor(np.array([3.0, 4.0]))]

        assert aggregate(vectors, [1.0, 1.0], 2).data.tolist() == [2.0, 3.0]
        assert aggregate(vectors, [1.0, 1.0], 2, Readout.SUM).data.tolist() == [4.0, 6.0]

    def test_dropped_segment_needs_no_embedding(self) -> None:
        result = aggregate([Tensor(np.array([2.0])), None], [3.0, 0.0], 2)

        assert result.data.tolist() == [3.0]

    def test_missing_embedding_with_weight(self) -> None:
        with pytest.raises(WidthMismatchError):
            aggregate([Tensor(np.array([2.0])), None], [1.0, 1.0], 2)

    def test_length_mismatch(self) -> None:
        with pytest.raises(WidthMismatchError):
            aggregate([Tensor(np.array([2.0]))], [1.0, 1.0], 2)
