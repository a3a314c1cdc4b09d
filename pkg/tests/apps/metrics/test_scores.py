"""
Тесты метрик качества: accuracy и OPA.
"""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from apps.common.exceptions import ConfigError
from apps.metrics.scores import accuracy, grouped_opa, opa
from apps.metrics.types import PredictionBatch

small_floats = st.floats(min_value=-100.0, max_value=100.0, allow_nan=False).map(lambda x: round(x, 1))


class TestAccuracy:
    def test_ties_go_to_lower_index(self) -> None:
        logits = np.array([[1.0, 1.0], [0.0, 2.0], [3.0, 0.0]])

        assert accuracy(logits, [0, 1, 1]) == pytest.approx(2 / 3)

    def test_empty_batch(self) -> None:
        with pytest.raises(ConfigError):
            accuracy(np.zeros((0, 2)), [])


class TestOpa:
    """Доля правильно упорядоченных пар."""

    @pytest.mark.parametrize(
        ("predictions", "targets", "expected"),
        [
            ([3.0, 2.0, 1.0], [3.0, 2.0, 1.0], 1.0),
            ([1.0, 2.0, 3.0], [3.0, 2.0, 1.0], 0.0),
            ([1.0, 1.0, 0.0], [2.0, 1.0, 0.0], 2 / 3),
            ([0.1, 0.9, 0.5, 0.2], [1.0, 4.0, 3.0, 2.0], 1.0),
        ],
    )
    def test_known_values(self, predictions: list[float], targets: list[float], expected: float) -> None:
        assert opa(predictions, targets) == pytest.approx(expected)

    def test_prediction_ties_count_as_wrong(self) -> None:
        assert opa([0.5, 0.5], [1.0, 0.0]) == 0.0

    def test_undefined_without_ordered_pairs(self) -> None:
        assert opa([0.1, 0.7, 0.3], [2.0, 2.0, 2.0]) is None

    def test_grouped_mean_skips_undefined_groups(self) -> None:
        batch = PredictionBatch(
            predictions=np.array([1.0, 0.0, 0.0, 1.0, 0.4]),
            targets=np.array([1.0, 0.0, 1.0, 0.0, 7.0]),
            groups=np.array([0, 0, 1, 1, 2]),
        )

        assert grouped_opa(batch) == pytest.approx(0.5)

    def test_grouped_all_undefined(self) -> None:
        batch = PredictionBatch(predictions=np.array([0.2]), targets=np.array([1.0]), groups=np.array([0]))

        assert grouped_opa(batch) is None

    def test_batch_length_mismatch(self) -> None:
        with pytest.raises(ConfigError):
            PredictionBatch(predictions=np.zeros(3), targets=np.zeros(2))


class TestOpaProperties:
    """Свойства OPA на случайных пакетах."""

    @settings(max_examples=60, deadline=None)
    @given(pairs=st.lists(st.tuples(small_floats, small_floats), min_size=2, max_size=12))
    def test_matches_pair_enumeration(self, pairs: list[tuple[float, float]]) -> None:
        predictions, targets = [p for p, _ in pairs], [y for _, y in pairs]
        ordered = [(i, j) for i, j in itertools.permutations(range(len(pairs)), 2) if targets[i] > targets[j]]

        value = opa(predictions, targets)

        if not ordered:
            assert value is None
        else:
            assert value == sum(predictions[i] > predictions[j] for i, j in ordered) / len(ordered)

    @settings(max_examples=60, deadline=None)
    @given(pairs=st.lists(st.tuples(small_floats, small_floats), min_size=2, max_size=12))
    def test_invariant_to_prediction_scaling(self, pairs: list[tuple[float, float]]) -> None:
        """Умножение на 2 точно сохраняет порядок предсказаний."""
        predictions, targets = np.array([p for p, _ in pairs]), np.array([y for _, y in pairs])

        assert opa(2.0 * predictions, targets) == opa(predictions, targets)
