"""
Сеяные генераторы синтетических датасетов.

Классификация: графы стохастической блочной модели, класс задаётся полосой доли
помеченных узлов на всём графе. Пометки распределены по сообществам неоднородно,
поэтому отдельный сегмент - ненадёжный предиктор класса.

Ранжирование: базовые графы с латентной стоимостью узлов, каждая конфигурация
меняет признак-параметр; цель - сумма нелинейной стоимости по всем узлам.
"""

import math

import networkx as nx
import numpy as np
from loguru import logger as log

from apps.common.exceptions import ConfigError
from apps.common.utils.parallel import parallel_map
from apps.graphs.services import graph_from_arrays, make_dataset
from apps.graphs.types import ClassLabel, Dataset, Graph, RegressionLabel, Split
from apps.synthdata.selectors import ranking_target
from apps.synthdata.types import Family, GeneratorSpec


def _community_sizes(node_count: int, spec: GeneratorSpec) -> list[int]:
    blocks = max(1, round(node_count / spec.community_size))
    return [len(part) for part in np.array_split(np.arange(node_count), blocks)]


def _sbm_edges(node_count: int, spec: GeneratorSpec, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Рёбра графа стохастической блочной модели и номер сообщества каждого узла.
    """
    sizes = _community_sizes(node_count, spec)
    blocks = len(sizes)

    probs = [
        [
            min(1.0, spec.avg_in_degree / max(sizes[a] - 1, 1))
            if a == b
            else min(1.0, spec.avg_out_degree / max(node_count - sizes[a], 1))
            for b in range(blocks)
        ]
        for a in range(blocks)
    ]

    nx_graph = nx.stochastic_block_model(sizes, probs, seed=seed, sparse=True)
    edges = np.array(list(nx_graph.edges()), dtype=np.int64).reshape(-1, 2)
    communities = np.repeat(np.arange(blocks), sizes)

    return edges, communities


def _split(ids: list[int], spec: GeneratorSpec, rng: np.random.Generator) -> tuple[list[int], list[int], list[int]]:
    order = [ids[i] for i in rng.permutation(len(ids))]
    n_test = int(round(spec.test_fraction * len(order)))
    n_val = int(round(spec.val_fraction * len(order)))
    test, val, train = order[:n_test], order[n_test : n_test + n_val], order[n_test + n_val :]
    return sorted(train), sorted(val), sorted(test)


def _check_classification(spec: GeneratorSpec) -> None:
    if spec.band_width <= 0:
        raise ConfigError(
            f"{spec.num_classes} classes with band_margin {spec.band_margin} leave no room for class bands",
            details={"band_width": spec.band_width},
        )

    # Каждая полоса должна содержать хотя бы одно целое число помеченных узлов
    for k in range(spec.num_classes):
        lo, hi = spec.band(k)
        if math.ceil(lo * spec.min_nodes) > math.floor(hi * spec.min_nodes):
            raise ConfigError(
                f"node range too narrow: class {k} band [{lo:.3f}, {hi:.3f}] holds no marked count for {spec.min_nodes} nodes",
            )


def _classification_graph(graph_id: int, class_index: int, node_count: int, seed: int, spec: GeneratorSpec) -> Graph:
    rng = np.random.default_rng(seed)
    edges, communities = _sbm_edges(node_count, spec, int(rng.integers(2**31 - 1)))

    lo, hi = spec.band(class_index)
    marked_count = int(rng.integers(math.ceil(lo * node_count), math.floor(hi * node_count) + 1))

    # Неоднородные веса сообществ: пометки скапливаются в части сообществ
    weights = rng.gamma(spec.heterogeneity, size=communities.max() + 1)[communities] + 1e-12
    marked = rng.choice(node_count, size=marked_count, replace=False, p=weights / weights.sum())

    features = np.zeros((node_count, spec.feature_width))
    features[marked, 0] = 1.0
    features[:, 1:] = spec.noise_scale * rng.standard_normal((node_count, spec.feature_width - 1))

    return graph_from_arrays(
        graph_id=graph_id,
        edges=edges,
        features=features,
        label=ClassLabel(class_index=class_index, num_classes=spec.num_classes),
    )


def generate_classification(spec: GeneratorSpec, threads: int = 1) -> Dataset:
    """
    Датасет классификации по глобальной доле помеченных узлов.

    Классы сбалансированы (с точностью до одного графа); метка восстанавливается
    подсчётом помеченных узлов на всём графе.

    Args:
        spec (GeneratorSpec): Параметры.
        threads (int): Потоки (графы генерируются независимо).

    Raises:
        ConfigError: Полосы классов не помещаются или диапазон узлов слишком узок.

    Returns:
        Dataset: Датасет с разбиением.
    """
    _check_classification(spec)
    log.info(f"Generating classification dataset: {spec.n_graphs} graphs, {spec.num_classes} classes, seed={spec.seed}")

    rng = np.random.default_rng(spec.seed)
    classes = rng.permutation(np.arange(spec.n_graphs) % spec.num_classes)
    node_counts = rng.integers(spec.min_nodes, spec.max_nodes + 1, size=spec.n_graphs)
    seeds = rng.integers(2**31 - 1, size=spec.n_graphs)

    graphs = parallel_map(
        lambda i: _classification_graph(i, int(classes[i]), int(node_counts[i]), int(seeds[i]), spec),
        list(range(spec.n_graphs)),
        threads,
    )

    train, val, test = _split(list(range(spec.n_graphs)), spec, rng)
    return make_dataset(graphs, Split(train=tuple(train), val=tuple(val), test=tuple(test)))


def _ranking_group(base_id: int, node_count: int, seed: int, spec: GeneratorSpec) -> list[tuple[np.ndarray, np.ndarray]]:
    """Базовый граф и признаки всех его конфигураций."""
    rng = np.random.default_rng(seed)
    edges, _ = _sbm_edges(node_count, spec, int(rng.integers(2**31 - 1)))

    latent = rng.uniform(0.0, 1.0, size=node_count)
    noise = spec.noise_scale * rng.standard_normal((node_count, spec.feature_width - 2))

    configs = []
    for _ in range(spec.configs_per_graph):
        knob = np.clip(rng.uniform(0.0, 1.0) + 0.05 * rng.standard_normal(node_count), 0.0, 1.0)
        features = np.column_stack([latent, knob, noise])
        configs.append((edges, features))

    return configs


def generate_ranking(spec: GeneratorSpec, threads: int = 1) -> Dataset:
    """
    Датасет ранжирования: n_graphs базовых графов по configs_per_graph конфигураций.

    Цель - сумма по всем узлам фиксированной нелинейной функции признаков, поэтому
    суммирующий пулинг сегментов - правильное индуктивное смещение. Конфигурации
    одного базового графа имеют общий group_id и попадают в одно разбиение.

    Args:
        spec (GeneratorSpec): Параметры.
        threads (int): Потоки.

    Returns:
        Dataset: Датасет с разбиением по группам.
    """
    log.info(f"Generating ranking dataset: {spec.n_graphs} x {spec.configs_per_graph} configs, seed={spec.seed}")

    rng = np.random.default_rng(spec.seed)
    node_counts = rng.integers(spec.min_nodes, spec.max_nodes + 1, size=spec.n_graphs)
    seeds = rng.integers(2**31 - 1, size=spec.n_graphs)

    groups = parallel_map(
        lambda b: _ranking_group(b, int(node_counts[b]), int(seeds[b]), spec),
        list(range(spec.n_graphs)),
        threads,
    )

    graphs: list[Graph] = []
    members: dict[int, list[int]] = {}
    for base_id, configs in enumerate(groups):
        for edges, features in configs:
            graph_id = len(graphs)
            members.setdefault(base_id, []).append(graph_id)
            graphs.append(
                graph_from_arrays(
                    graph_id=graph_id,
                    edges=edges,
                    features=features,
                    label=RegressionLabel(target=ranking_target(features)),
                    group_id=base_id,
                )
            )

    train_groups, val_groups, test_groups = _split(list(range(spec.n_graphs)), spec, rng)
    split = Split(
        train=tuple(i for g in train_groups for i in members[g]),
        val=tuple(i for g in val_groups for i in members[g]),
        test=tuple(i for g in test_groups for i in members[g]),
    )

    return make_dataset(graphs, split)


def generate(spec: GeneratorSpec, threads: int = 1) -> Dataset:
    """Генерация по семейству спецификации."""
    if spec.family is Family.CLASSIFICATION:
        return generate_classification(spec, threads)
    return generate_ranking(spec, threads)
