"""
Хранилище именованных параметров модели.
"""

from collections.abc import Iterable, Iterator

import numpy as np

from apps.common.types import FloatArray
from apps.common.utils.hashing import arrays_hash
from apps.diffcore.tensor import Tensor


def glorot_uniform(rng: np.random.Generator, fan_in: int, fan_out: int) -> FloatArray:
    """Равномерная инициализация в ±sqrt(6 / (fan_in + fan_out))."""
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


class ParamStore:
    """
    Именованные параметры, их градиенты и состояние адаптивного оптимизатора.

    Порядок параметров - порядок регистрации; он фиксирует порядок расхода RNG
    при инициализации и порядок записи в чекпоинт.

    Attributes:
        first_moments (dict[str, FloatArray]): Первые моменты Adam.
        second_moments (dict[str, FloatArray]): Вторые моменты Adam.
        steps (dict[str, int]): Число шагов оптимизатора по каждому параметру.
    """

    def __init__(self) -> None:
        self._params: dict[str, Tensor] = {}
        self.first_moments: dict[str, FloatArray] = {}
        self.second_moments: dict[str, FloatArray] = {}
        self.steps: dict[str, int] = {}

    def add(self, name: str, value: FloatArray) -> Tensor:
        if name in self._params:
            raise KeyError(f"Parameter '{name}' is already registered")

        tensor = Tensor(np.array(value, dtype=np.float64), requires_grad=True, name=name)
        self._params[name] = tensor
        self.first_moments[name] = np.zeros_like(tensor.data)
        self.second_moments[name] = np.zeros_like(tensor.data)
        self.steps[name] = 0
        return tensor

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: object) -> bool:
        return name in self._params

    def __iter__(self) -> Iterator[str]:
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def names(self, prefix: str | None = None) -> list[str]:
        return [name for name in self._params if prefix is None or name.startswith(prefix)]

    def items(self) -> Iterable[tuple[str, Tensor]]:
        return self._params.items()

    def zero_grad(self, names: Iterable[str] | None = None) -> None:
        for name in self._params if names is None else names:
            self._params[name].zero_grad()

    def values(self, names: Iterable[str] | None = None) -> dict[str, FloatArray]:
        """Копии значений параметров."""
        return {name: self._params[name].data.copy() for name in (self._params if names is None else names)}

    def gradients(self) -> dict[str, FloatArray]:
        """Копии градиентных буферов."""
        return {name: p.grad.copy() for name, p in self._params.items() if p.grad is not None}

    def load_values(self, values: dict[str, FloatArray]) -> None:
        """
        Записывает значения параметров на место (формы должны совпадать).

        Raises:
            KeyError: Неизвестный или отсутствующий параметр.
            ValueError: Несовпадение формы.
        """
        if set(values) != set(self._params):
            raise KeyError(f"Parameter set mismatch: {sorted(set(values) ^ set(self._params))}")

        for name, value in values.items():
            tensor = self._params[name]
            if tensor.data.shape != value.shape:
                raise ValueError(f"Shape mismatch for '{name}': {value.shape} != {tensor.data.shape}")
            tensor.data[...] = value

    def fingerprint(self, names: Iterable[str] | None = None) -> str:
        """Хеш значений параметров (побитовая неизменность)."""
        return arrays_hash({name: self._params[name].data for name in (self._params if names is None else names)})
