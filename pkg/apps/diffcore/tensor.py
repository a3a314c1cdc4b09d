"""
Тензор и лента обратного режима дифференцирования.

Операции записываются на ленту, только если лента активна в текущем контексте
и хотя бы один вход требует градиент. Активная лента хранится в ContextVar,
поэтому прямые проходы в рабочих потоках ничего не записывают.
"""

from collections.abc import Callable, Iterator, Sequence
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass

import numpy as np
from loguru import logger as log

from apps.common.exceptions import BudgetExceededError, TapeError
from apps.common.types import FloatArray

BackwardFn = Callable[[FloatArray], Sequence[FloatArray | None]]


class Tensor:
    """
    Массив float64 с буфером градиента.

    Attributes:
        data (FloatArray): Значение.
        grad (FloatArray | None): Накопленный градиент (только у листьев с requires_grad).
        requires_grad (bool): Участвует ли тензор в дифференцировании.
        is_leaf (bool): Создан пользователем (параметр/константа), а не операцией.
        name (str | None): Имя параметра.
    """

    __slots__ = ("data", "grad", "requires_grad", "is_leaf", "name")

    def __init__(
        self,
        data: FloatArray | float,
        requires_grad: bool = False,
        name: str | None = None,
        is_leaf: bool = True,
    ) -> None:
        self.data: FloatArray = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        self.is_leaf = is_leaf
        self.name = name
        self.grad: FloatArray | None = np.zeros_like(self.data) if requires_grad and is_leaf else None

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(self.data.shape)

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0.0)

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        label = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"


@dataclass(frozen=True, slots=True)
class TapeEntry:
    """Записанная операция: входы, выход и функция обратного прохода."""

    op: str
    inputs: tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """
    Лента одного прямого прохода (одного шага обучения).

    Ведёт учёт удерживаемых активаций в узлах: каждый grad-enabled проход сегмента
    резервирует его число узлов. Бюджет проверяется до прямого прохода.

    Attributes:
        budget_nodes (int | None): Ограничение удерживаемых активаций (None - без ограничения).
    """

    def __init__(self, budget_nodes: int | None = None) -> None:
        self.budget_nodes = budget_nodes
        self.entries: list[TapeEntry] = []
        self.retained_nodes = 0
        self.peak_retained_nodes = 0
        self.backward_done = False

    def record(self, entry: TapeEntry) -> None:
        if self.backward_done:
            raise TapeError("Cannot record onto a tape that has already been backpropagated")
        self.entries.append(entry)

    def reserve(self, node_count: int) -> None:
        """
        Резервирует активации под grad-enabled проход из node_count узлов.

        Raises:
            BudgetExceededError: Если резерв превысит бюджет.
        """
        required = self.retained_nodes + node_count

        if self.budget_nodes is not None and required > self.budget_nodes:
            log.error(f"Activation budget exceeded: {required} > {self.budget_nodes} nodes")
            raise BudgetExceededError(
                f"Retained activations would reach {required} nodes, budget is {self.budget_nodes}",
                details={"required_nodes": required, "budget_nodes": self.budget_nodes, "segment_nodes": node_count},
            )

        self.retained_nodes = required
        self.peak_retained_nodes = max(self.peak_retained_nodes, required)

    def backward(self, loss: Tensor) -> None:
        """
        Обратный проход: каждая запись посещается ровно один раз, в обратном порядке.

        Градиенты накапливаются в .grad листьев с requires_grad. После прохода
        лента освобождает активации.

        Args:
            loss (Tensor): Скалярный выход grad-enabled прохода.

        Raises:
            TapeError: Пустая лента, повторный backward или loss не записан на ленте.
        """
        if self.backward_done:
            raise TapeError("backward() called twice on the same tape")
        if not self.entries or not loss.requires_grad:
            raise TapeError("backward() without a grad-enabled forward pass")
        if loss.data.size != 1:
            raise TapeError(f"loss must be a scalar, got shape {loss.shape}")

        grads: dict[int, FloatArray] = {id(loss): np.ones_like(loss.data)}

        for entry in reversed(self.entries):
            upstream = grads.pop(id(entry.output), None)
            if upstream is None:
                continue

            for tensor, grad in zip(entry.inputs, entry.backward(upstream), strict=True):
                if grad is None or not tensor.requires_grad:
                    continue
                if tensor.is_leaf:
                    assert tensor.grad is not None
                    tensor.grad += grad
                elif id(tensor) in grads:
                    grads[id(tensor)] = grads[id(tensor)] + grad
                else:
                    grads[id(tensor)] = grad

        self.backward_done = True
        self.release()

    def release(self) -> None:
        """Освобождает записанные операции и активации (пик сохраняется)."""
        self.entries.clear()
        self.retained_nodes = 0


_active_tape: ContextVar[Tape | None] = ContextVar("segtrain_active_tape", default=None)


def current_tape() -> Tape | None:
    return _active_tape.get()


@contextmanager
def recording(tape: Tape) -> Iterator[Tape]:
    """Делает ленту активной в текущем контексте."""
    token = _active_tape.set(tape)
    try:
        yield tape
    finally:
        _active_tape.reset(token)


@contextmanager
def no_grad() -> Iterator[None]:
    """Отключает запись операций в текущем контексте."""
    token = _active_tape.set(None)
    try:
        yield
    finally:
        _active_tape.reset(token)


def make_result(op: str, data: FloatArray, inputs: Sequence[Tensor], backward: BackwardFn) -> Tensor:
    """
    Создаёт выход операции и, если нужно, записывает её на активную ленту.

    Args:
        op (str): Имя операции.
        data (FloatArray): Вычисленное значение.
        inputs (Sequence[Tensor]): Входы.
        backward (BackwardFn): Градиенты по входам из градиента выхода.

    Returns:
        Tensor: Выход (requires_grad=True, только если операция записана).
    """
    tape = current_tape()

    if tape is None or not any(tensor.requires_grad for tensor in inputs):
        return Tensor(data)

    output = Tensor(data, requires_grad=True, is_leaf=False)
    tape.record(TapeEntry(op=op, inputs=tuple(inputs), output=output, backward=backward))
    return output
