"""
Тесты дискового кэша разбиений.
"""

from pathlib import Path

import numpy as np
import pytest

from apps.common.exceptions import DatasetIOError
from apps.graphs.selectors import dataset_fingerprint
from apps.graphs.types import Dataset
from apps.partition.cache import cache_key, load_or_partition, read_segments
from apps.partition.types import PartitionMethod


class TestSegmentCache:
    """Кэш по ключу (хеш датасета, метод, ограничение, сид)."""

    def test_second_call_hits_cache(self, small_dataset: Dataset, dataset_file: Path, tmp_path: Path) -> None:
        """Повторный вызов читает кэш и возвращает те же сегменты."""
        fingerprint = dataset_fingerprint(dataset_file)
        cache_dir = tmp_path / "cache"

        computed, first_hit = load_or_partition(small_dataset, fingerprint, PartitionMethod.LOCALITY_EDGE_CUT, 5, 0, cache_dir)
        cached, second_hit = load_or_partition(small_dataset, fingerprint, PartitionMethod.LOCALITY_EDGE_CUT, 5, 0, cache_dir)

        # --- Проверки ---

        assert (first_hit, second_hit) == (False, True)
        assert len(list(cache_dir.glob("segments-*.jsonl"))) == 1

        for left, right in zip(computed, cached, strict=True):
            assert (left.parent, left.J, left.label, left.method) == (right.parent, right.J, right.label, right.method)
            for a, b in zip(left.segments, right.segments, strict=True):
                assert np.array_equal(a.local_nodes, b.local_nodes)
                assert np.array_equal(a.features, b.features)
                assert a.edge_list() == b.edge_list()

    def test_key_depends_on_every_component(self) -> None:
        base = cache_key("abc", PartitionMethod.LOCALITY_EDGE_CUT, 5, 0)

        assert base == cache_key("abc", "locality-edge-cut", 5, 0)
        assert base != cache_key("abd", PartitionMethod.LOCALITY_EDGE_CUT, 5, 0)
        assert base != cache_key("abc", PartitionMethod.RANDOM_EDGE_CUT, 5, 0)
        assert base != cache_key("abc", PartitionMethod.LOCALITY_EDGE_CUT, 6, 0)
        assert base != cache_key("abc", PartitionMethod.LOCALITY_EDGE_CUT, 5, 1)

    def test_without_cache_dir_nothing_is_written(self, small_dataset: Dataset, tmp_path: Path) -> None:
        segmented, hit = load_or_partition(small_dataset, "x", PartitionMethod.RANDOM_EDGE_CUT, 5, 0, None)

        assert hit is False
        assert len(segmented) == len(small_dataset)
        assert list(tmp_path.iterdir()) == []

    def test_corrupted_cache_file(self, tmp_path: Path) -> None:
        path = tmp_path / "segments-bad.jsonl"
        path.write_text('{"id": 0}\n', encoding="utf-8")

        with pytest.raises(DatasetIOError) as exc_info:
            read_segments(path)

        assert exc_info.value.details == {"line": 1}
