"""
Сервисы разбиения графов на сегменты с жёстким ограничением числа узлов.

Edge-cut методы назначают каждый узел ровно одному сегменту и отбрасывают межсегментные рёбра.
Vertex-cut методы назначают каждое ребро ровно одному сегменту и реплицируют концы.
"""

import heapq
import math
from collections.abc import Sequence

import numpy as np
from loguru import logger as log
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from apps.common.exceptions import ConfigError
from apps.common.utils.parallel import parallel_map
from apps.graphs.services import normalize_adjacency
from apps.graphs.types import Dataset, Graph, freeze
from apps.partition.types import PartitionMethod, Segment, SegmentedGraph


def target_segment_count(node_count: int, max_segment_nodes: int) -> int:
    """J_target = ceil(n / cap), не меньше 1."""
    return max(1, math.ceil(node_count / max_segment_nodes))


def _build_segment(graph: Graph, segment_id: int, nodes: np.ndarray, edges: np.ndarray) -> Segment:
    """
    Собирает сегмент из набора узлов родителя и рёбер между ними.

    Args:
        graph (Graph): Родитель.
        segment_id (int): Номер сегмента.
        nodes (np.ndarray): Индексы узлов родителя.
        edges (np.ndarray): Рёбра родителя (m, 2), оба конца внутри nodes.

    Returns:
        Segment: Неизменяемый сегмент с локальной CSR-смежностью.
    """
    local_nodes = np.unique(np.asarray(nodes, dtype=np.int64))
    local_edges = np.searchsorted(local_nodes, np.asarray(edges, dtype=np.int64).reshape(-1, 2))
    indptr, indices = normalize_adjacency(local_nodes.shape[0], local_edges)

    return Segment(
        parent_graph_id=graph.graph_id,
        segment_id=segment_id,
        local_nodes=freeze(local_nodes),
        indptr=freeze(indptr),
        indices=freeze(indices),
        features=freeze(graph.features[local_nodes].copy()),
    )


def _edge_array(graph: Graph) -> np.ndarray:
    return np.asarray(graph.edge_list(), dtype=np.int64).reshape(-1, 2)


def _segments_from_assignment(graph: Graph, assignment: np.ndarray) -> list[Segment]:
    """Edge-cut: сегменты по назначению узлов, межсегментные рёбра отбрасываются."""
    edges = _edge_array(graph)
    same = assignment[edges[:, 0]] == assignment[edges[:, 1]]
    inner, owner = edges[same], assignment[edges[same, 0]]

    segment_ids = np.unique(assignment)
    return [
        _build_segment(graph, new_id, np.flatnonzero(assignment == old_id), inner[owner == old_id])
        for new_id, old_id in enumerate(segment_ids.tolist())
    ]


def random_edge_cut(graph: Graph, max_segment_nodes: int, rng: np.random.Generator) -> list[Segment]:
    """
    Случайное сбалансированное разбиение узлов: перестановка, нарезанная на J_target частей.
    """
    parts = np.array_split(rng.permutation(graph.node_count), target_segment_count(graph.node_count, max_segment_nodes))

    assignment = np.empty(graph.node_count, dtype=np.int64)
    for segment_id, part in enumerate(parts):
        assignment[part] = segment_id

    return _segments_from_assignment(graph, assignment)


def locality_edge_cut(graph: Graph, max_segment_nodes: int, rng: np.random.Generator) -> list[Segment]:
    """
    Жадный рост связных сегментов (graph growing) с ограничением размера.

    Сегменты растут по одному до сбалансированного целевого размера, который пересчитывается
    по оставшимся узлам: ceil(r / ceil(r / cap)). Затравка - неназначенный узел с наименьшим
    числом неназначенных соседей (периферия). Из фронтира берётся узел с наибольшим выигрышем:
    (соседей в сегменте) - (неназначенных соседей); ничьи решает сеяная случайная перестановка.

    Фронтир пустеет в двух случаях. Если компонента затравки исчерпана, сегмент продолжает
    расти с новой затравки (малые компоненты упаковываются вместе). Если в компоненте остались
    узлы, отрезанные другими сегментами, сегмент закрывается, и число сегментов может
    превысить ceil(n / cap).

    Args:
        graph (Graph): Исходный граф.
        max_segment_nodes (int): Ограничение размера сегмента.
        rng (np.random.Generator): Генератор для разрешения ничьих.

    Returns:
        list[Segment]: Сегменты; пересечение сегмента с каждой компонентой родителя связно.
    """
    n = graph.node_count
    adjacency = sparse.csr_matrix((np.ones(graph.indices.shape[0]), graph.indices, graph.indptr), shape=(n, n))
    _, component = connected_components(adjacency, directed=False)
    component_left = np.bincount(component, minlength=int(component.max()) + 1)

    rank = rng.permutation(n)
    assignment = np.full(n, -1, dtype=np.int64)
    unassigned_degree = graph.degrees.copy()

    def periphery_seed() -> int:
        free = np.flatnonzero(assignment == -1)
        return int(free[np.lexsort((rank[free], unassigned_degree[free]))[0]])

    segment_id, remaining = 0, n
    while remaining:
        target = math.ceil(remaining / target_segment_count(remaining, max_segment_nodes))
        in_segment: dict[int, int] = {}
        frontier: list[tuple[int, int, int]] = []
        size, seed_component = 0, -1

        while size < target:
            node = -1
            while frontier:
                negative_gain, _, candidate = heapq.heappop(frontier)
                # Ленивая инвалидация: устаревшие записи пропускаем
                if assignment[candidate] == -1 and -negative_gain == in_segment[candidate] - unassigned_degree[candidate]:
                    node = candidate
                    break

            if node == -1:
                if seed_component != -1 and component_left[seed_component]:
                    break
                node = periphery_seed()
                seed_component = int(component[node])

            assignment[node] = segment_id
            component_left[component[node]] -= 1
            size += 1

            for neighbor in graph.neighbors(node).tolist():
                if assignment[neighbor] != -1:
                    continue
                unassigned_degree[neighbor] -= 1
                in_segment[neighbor] = in_segment.get(neighbor, 0) + 1
                gain = in_segment[neighbor] - unassigned_degree[neighbor]
                heapq.heappush(frontier, (-int(gain), int(rank[neighbor]), neighbor))

        if size < target:
            log.debug(f"Graph {graph.graph_id}: segment {segment_id} closed at {size}/{target} nodes (enclosed)")
        segment_id += 1
        remaining -= size

    return _segments_from_assignment(graph, assignment)


class _VertexCutBuilder:
    """Накопитель назначения рёбер для vertex-cut методов."""

    def __init__(self, graph: Graph, max_segment_nodes: int) -> None:
        if max_segment_nodes < 2 and graph.edge_count > 0:
            raise ConfigError(
                "vertex-cut partitioning needs max_segment_nodes >= 2 to place an edge",
                details={"graph_id": graph.graph_id, "max_segment_nodes": max_segment_nodes},
            )

        self.graph = graph
        self.cap = max_segment_nodes
        self.nodes: list[set[int]] = [set() for _ in range(target_segment_count(graph.node_count, max_segment_nodes))]
        self.edges: list[list[tuple[int, int]]] = [[] for _ in self.nodes]

    def _fits(self, segment: int, endpoints: set[int]) -> bool:
        return len(self.nodes[segment] | endpoints) <= self.cap

    def place_edge(self, u: int, v: int, preferred: int) -> None:
        """Кладёт ребро в предпочтительный сегмент, иначе в следующий с местом, иначе в новый."""
        endpoints = {u, v}
        count = len(self.nodes)

        for offset in range(count):
            segment = (preferred + offset) % count
            if self._fits(segment, endpoints):
                break
        else:
            self.nodes.append(set())
            self.edges.append([])
            segment = count

        self.nodes[segment] |= endpoints
        self.edges[segment].append((u, v))

    def place_isolated(self) -> None:
        """Узлы без рёбер - в наименьший сегмент с местом."""
        covered = set().union(*self.nodes)

        for node in range(self.graph.node_count):
            if node in covered:
                continue
            candidates = [s for s in range(len(self.nodes)) if len(self.nodes[s]) < self.cap]
            if candidates:
                segment = min(candidates, key=lambda s: (len(self.nodes[s]), s))
            else:
                self.nodes.append(set())
                self.edges.append([])
                segment = len(self.nodes) - 1
            self.nodes[segment].add(node)

    def build(self) -> list[Segment]:
        self.place_isolated()
        non_empty = [s for s in range(len(self.nodes)) if self.nodes[s]]
        return [
            _build_segment(
                self.graph,
                new_id,
                np.fromiter(sorted(self.nodes[old_id]), dtype=np.int64),
                np.asarray(self.edges[old_id], dtype=np.int64).reshape(-1, 2),
            )
            for new_id, old_id in enumerate(non_empty)
        ]


def random_vertex_cut(graph: Graph, max_segment_nodes: int, rng: np.random.Generator) -> list[Segment]:
    """
    Рёбра в сеяном порядке получают случайный сегмент; при переполнении - следующий или новый.
    """
    builder = _VertexCutBuilder(graph, max_segment_nodes)
    edges = _edge_array(graph)

    for u, v in edges[rng.permutation(edges.shape[0])].tolist():
        builder.place_edge(u, v, preferred=int(rng.integers(len(builder.nodes))))

    return builder.build()


def degree_hash_vertex_cut(graph: Graph, max_segment_nodes: int, rng: np.random.Generator) -> list[Segment]:
    """
    Ребро уходит в сегмент hash(конец с меньшей степенью) mod J_target.

    Хеш - сеяная перестановка идентификаторов узлов. Высокостепенные узлы реплицируются,
    низкостепенные остаются вместе со своими рёбрами.
    """
    builder = _VertexCutBuilder(graph, max_segment_nodes)
    J_target = len(builder.nodes)
    hashed = rng.permutation(graph.node_count)
    degrees = graph.degrees

    for u, v in _edge_array(graph).tolist():
        key = u if (degrees[u], u) <= (degrees[v], v) else v
        builder.place_edge(u, v, preferred=int(hashed[key] % J_target))

    return builder.build()


_PARTITIONERS = {
    PartitionMethod.RANDOM_EDGE_CUT: random_edge_cut,
    PartitionMethod.LOCALITY_EDGE_CUT: locality_edge_cut,
    PartitionMethod.RANDOM_VERTEX_CUT: random_vertex_cut,
    PartitionMethod.DEGREE_HASH_VERTEX_CUT: degree_hash_vertex_cut,
}


def partition(
    graph: Graph,
    method: PartitionMethod | str,
    max_segment_nodes: int,
    seed: int,
) -> SegmentedGraph:
    """
    Разбивает граф на сегменты не больше max_segment_nodes узлов.

    Результат детерминирован по (graph, method, cap, seed): генератор сеется парой (seed, graph_id).
    Граф не больше ограничения даёт J=1 с сегментом, совпадающим с родителем.

    Args:
        graph (Graph): Исходный граф.
        method (PartitionMethod | str): Метод разбиения.
        max_segment_nodes (int): Ограничение размера сегмента (>= 1).
        seed (int): Сид.

    Raises:
        ConfigError: Ограничение < 1 или неизвестный метод.

    Returns:
        SegmentedGraph: Разложение графа.
    """
    if max_segment_nodes < 1:
        raise ConfigError(f"max_segment_nodes must be >= 1, got {max_segment_nodes}")

    try:
        method = PartitionMethod(method)
    except ValueError as exc:
        raise ConfigError(f"Unknown partition method: {method}") from exc

    if graph.node_count <= max_segment_nodes:
        segments = [_build_segment(graph, 0, np.arange(graph.node_count), _edge_array(graph))]
    else:
        rng = np.random.default_rng([seed, graph.graph_id])
        segments = _PARTITIONERS[method](graph, max_segment_nodes, rng)

    return SegmentedGraph(
        parent=graph.graph_id,
        parent_node_count=graph.node_count,
        parent_edge_count=graph.edge_count,
        method=method,
        segments=tuple(segments),
        label=graph.label,
        group_id=graph.group_id,
    )


def partition_graphs(
    graphs: Sequence[Graph],
    method: PartitionMethod | str,
    max_segment_nodes: int,
    seed: int,
    threads: int = 1,
) -> list[SegmentedGraph]:
    """
    Разбивает набор графов (параллельно по графам, порядок результата - порядок входа).

    Args:
        graphs (Sequence[Graph]): Графы.
        method (PartitionMethod | str): Метод разбиения.
        max_segment_nodes (int): Ограничение размера сегмента.
        seed (int): Сид.
        threads (int): Число потоков.

    Returns:
        list[SegmentedGraph]: Разложения в порядке входа.
    """
    log.info(f"Partitioning {len(graphs)} graphs: method={method}, cap={max_segment_nodes}, seed={seed}")
    return parallel_map(lambda graph: partition(graph, method, max_segment_nodes, seed), graphs, threads)


def partition_dataset(
    dataset: Dataset,
    method: PartitionMethod | str,
    max_segment_nodes: int,
    seed: int,
    threads: int = 1,
) -> list[SegmentedGraph]:
    """Разбивает все графы датасета; индекс списка совпадает с graph_id."""
    return partition_graphs(dataset.graphs, method, max_segment_nodes, seed, threads)
