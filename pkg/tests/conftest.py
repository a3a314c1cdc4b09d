"""
Общие фикстуры для всех тестов проекта.
"""

from pathlib import Path

import numpy as np
import pytest

from apps.diffcore.types import ModelConfig
from apps.graphs.services import save_dataset
from apps.graphs.types import Dataset, Graph, Split
from apps.training.types import TrainingData
from tests.utils.factories import ModelConfigFactory, classification_dataset, path_graph, training_data_for


@pytest.fixture
def rng() -> np.random.Generator:
    """
    Сеяный генератор для тестовых данных.

    Returns:
        np.random.Generator: Генератор с сидом 0.
    """
    return np.random.default_rng(0)


@pytest.fixture
def path10() -> Graph:
    """
    Путь из 10 узлов.

    Returns:
        Graph: Граф 0 - 1 - ... - 9.
    """
    return path_graph(10)


@pytest.fixture
def small_dataset() -> Dataset:
    """
    Шесть случайных графов (7-20 узлов), два класса, train/val/test = 4/1/1.

    Returns:
        Dataset: Датасет.
    """
    return classification_dataset(
        [12, 9, 15, 7, 20, 11],
        split=Split(train=(0, 1, 2, 3), val=(4,), test=(5,)),
    )


@pytest.fixture
def model_config() -> ModelConfig:
    """
    Небольшая модель под признаки ширины 3 и два класса.

    Returns:
        ModelConfig: Конфигурация.
    """
    return ModelConfigFactory()


@pytest.fixture
def small_data(small_dataset: Dataset) -> TrainingData:
    """
    Датасет, разбитый locality edge-cut с ограничением 5 узлов.

    Args:
        small_dataset (Dataset): Фикстура датасета.

    Returns:
        TrainingData: Датасет и разложения.
    """
    return training_data_for(small_dataset, max_segment_nodes=5)


@pytest.fixture
def dataset_file(small_dataset: Dataset, tmp_path: Path) -> Path:
    """
    Датасет, сохранённый в JSON-lines.

    Args:
        small_dataset (Dataset): Фикстура датасета.
        tmp_path (Path): Временная директория pytest.

    Returns:
        Path: Путь к файлу графов.
    """
    path = tmp_path / "data" / "graphs.jsonl"
    save_dataset(small_dataset, path)
    return path
