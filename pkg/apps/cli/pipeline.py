"""
Общие шаги команд: получение датасета и его разложений.
"""

from pathlib import Path

from loguru import logger as log

from apps.cli.config import ExperimentConfig
from apps.graphs.selectors import dataset_fingerprint, load_dataset
from apps.graphs.services import save_dataset
from apps.graphs.types import Dataset
from apps.partition.cache import load_or_partition
from apps.partition.types import PartitionMethod, SegmentedGraph
from apps.synthdata.services import generate
from apps.training.types import TrainingData
from config import settings


def resolve_dataset(config: ExperimentConfig, threads: int) -> tuple[Dataset, Path]:
    """
    Датасет эксперимента: файл из конфигурации или сгенерированный
    (сохраняется в output_dir/dataset/graphs.jsonl).

    Returns:
        tuple[Dataset, Path]: Датасет и путь к его файлу.
    """
    if config.dataset is not None:
        return load_dataset(config.dataset), config.dataset

    assert config.generator is not None
    path = config.output_dir / "dataset" / "graphs.jsonl"
    if path.exists():
        log.info(f"Reusing generated dataset {path}")
        return load_dataset(path), path

    dataset = generate(config.generator, threads)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_dataset(dataset, path)
    return dataset, path


def segment_dataset(
    dataset: Dataset,
    path: Path,
    method: PartitionMethod | str,
    max_segment_nodes: int,
    seed: int,
    threads: int,
    cache_dir: Path | None = None,
) -> tuple[list[SegmentedGraph], bool]:
    """Разложения через кэш сегментов (по умолчанию SEGTRAIN_CACHE_DIR)."""
    return load_or_partition(
        dataset,
        dataset_fingerprint(path),
        method,
        max_segment_nodes,
        seed,
        cache_dir or settings.CACHE_DIR,
        threads,
    )


def training_data(config: ExperimentConfig, threads: int) -> TrainingData:
    """Датасет и разложения по плану эксперимента."""
    dataset, path = resolve_dataset(config, threads)
    segmented, _ = segment_dataset(
        dataset,
        path,
        config.plan.partition_method,
        config.plan.max_segment_nodes,
        config.partition_seed,
        threads,
    )
    return TrainingData(dataset=dataset, segmented=segmented)
