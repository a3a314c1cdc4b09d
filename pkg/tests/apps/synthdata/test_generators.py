"""
Тесты синтетических генераторов: оракулы, баланс классов, детерминизм, группы ранжирования.
"""

from collections import Counter

import numpy as np
import pytest
from pydantic import ValidationError

from apps.common.exceptions import ConfigError
from apps.graphs.types import ClassLabel, Dataset, RegressionLabel, Task
from apps.partition.services import partition_dataset
from apps.partition.types import PartitionMethod
from apps.synthdata.selectors import marked_fraction, node_cost, oracle_label, ranking_target, segment_oracle_label
from apps.synthdata.services import generate
from apps.synthdata.types import Family, GeneratorSpec
from tests.utils.factories import GeneratorSpecFactory


def same_dataset(left: Dataset, right: Dataset) -> bool:
    return left.split == right.split and all(
        a.label == b.label
        and np.array_equal(a.features, b.features)
        and np.array_equal(a.indices, b.indices)
        and np.array_equal(a.indptr, b.indptr)
        for a, b in zip(left.graphs, right.graphs, strict=True)
    )


class TestClassification:
    """Классификация по глобальной доле помеченных узлов."""

    @pytest.fixture(scope="class")
    def spec(self) -> GeneratorSpec:
        return GeneratorSpecFactory(num_classes=3, n_graphs=14)

    @pytest.fixture(scope="class")
    def dataset(self, spec: GeneratorSpec) -> Dataset:
        return generate(spec)

    def test_oracle_recovers_every_label(self, dataset: Dataset, spec: GeneratorSpec) -> None:
        for graph in dataset.graphs:
            assert isinstance(graph.label, ClassLabel)
            assert oracle_label(graph.features, spec) == graph.label.class_index
            lo, hi = spec.band(graph.label.class_index)
            assert lo - 1e-12 <= marked_fraction(graph.features) <= hi + 1e-12

    def test_classes_are_balanced(self, dataset: Dataset) -> None:
        counts = Counter(graph.label.class_index for graph in dataset.graphs)  # type: ignore[union-attr]

        assert sorted(counts.values()) == [4, 5, 5]

    def test_sizes_and_split(self, dataset: Dataset, spec: GeneratorSpec) -> None:
        assert dataset.task is Task.CLASSIFICATION
        assert all(spec.min_nodes <= graph.node_count <= spec.max_nodes for graph in dataset.graphs)
        ids = sorted(dataset.split.train + dataset.split.val + dataset.split.test)
        assert ids == list(range(spec.n_graphs))
        assert (len(dataset.split.val), len(dataset.split.test)) == (2, 2)

    def test_same_seed_same_dataset(self, spec: GeneratorSpec, dataset: Dataset) -> None:
        assert same_dataset(generate(spec, threads=3), dataset)

    def test_seed_changes_dataset(self, spec: GeneratorSpec, dataset: Dataset) -> None:
        assert not same_dataset(generate(spec.model_copy(update={"seed": 1})), dataset)

    def test_bands_do_not_fit(self) -> None:
        with pytest.raises(ConfigError):
            generate(GeneratorSpecFactory(num_classes=3, band_margin=0.5))

    def test_node_range_too_narrow(self) -> None:
        """При 2 узлах полоса второго из 5 классов не содержит ни одного целого числа пометок."""
        with pytest.raises(ConfigError):
            generate(GeneratorSpecFactory(num_classes=5, min_nodes=2, max_nodes=40))

    def test_invalid_node_range(self) -> None:
        with pytest.raises(ValidationError):
            GeneratorSpecFactory(min_nodes=50, max_nodes=40)


class TestRanking:
    """Ранжирование конфигураций базовых графов."""

    @pytest.fixture(scope="class")
    def spec(self) -> GeneratorSpec:
        return GeneratorSpecFactory(family=Family.RANKING, n_graphs=6, configs_per_graph=3)

    @pytest.fixture(scope="class")
    def dataset(self, spec: GeneratorSpec) -> Dataset:
        return generate(spec)

    def test_target_is_sum_of_node_costs(self, dataset: Dataset) -> None:
        assert dataset.task is Task.RANKING
        for graph in dataset.graphs:
            assert isinstance(graph.label, RegressionLabel)
            assert graph.label.target == ranking_target(graph.features)

    def test_configurations_share_structure(self, dataset: Dataset, spec: GeneratorSpec) -> None:
        by_group: dict[int, list[int]] = {}
        for graph in dataset.graphs:
            assert graph.group_id is not None
            by_group.setdefault(graph.group_id, []).append(graph.graph_id)

        assert sorted(len(ids) for ids in by_group.values()) == [spec.configs_per_graph] * spec.n_graphs
        for ids in by_group.values():
            first = dataset[ids[0]]
            assert all(np.array_equal(dataset[i].indices, first.indices) for i in ids)
            assert all(np.array_equal(dataset[i].features[:, 0], first.features[:, 0]) for i in ids)

    def test_groups_never_straddle_splits(self, dataset: Dataset) -> None:
        owner = {}
        for name in ("train", "val", "test"):
            for graph_id in dataset.split.get(name):
                group = dataset[graph_id].group_id
                assert owner.setdefault(group, name) == name

    def test_node_cost(self) -> None:
        features = np.array([[1.0, 0.5], [0.0, 1.0], [2.0, 0.0]])

        assert node_cost(features).tolist() == [1.0 + 0.125, 0.5, 4.0]


@pytest.mark.slow
class TestSegmentOracle:
    """Один сегмент не определяет класс: метка требует информации со всего графа."""

    def test_single_segment_is_worse_than_whole_graph(self) -> None:
        whole, single = [], []

        for seed in range(20):
            spec = GeneratorSpecFactory(num_classes=5, n_graphs=10, min_nodes=200, max_nodes=400, community_size=50, seed=seed)
            dataset = generate(spec)
            for sg in partition_dataset(dataset, PartitionMethod.LOCALITY_EDGE_CUT, 50, seed):
                label = sg.label.class_index  # type: ignore[union-attr]
                whole.append(oracle_label(dataset[sg.parent].features, spec) == label)
                single.extend(segment_oracle_label(segment.features, spec) == label for segment in sg.segments)

        assert np.mean(whole) == 1.0
        assert np.mean(single) < np.mean(whole)
