"""
Дифференцируемые операции над Tensor.

Все операции явно проверяют формы: автоматического broadcasting нет,
кроме прибавления вектора смещения к строкам матрицы.
"""

from collections.abc import Sequence

import numpy as np
from scipy import sparse

from apps.common.exceptions import WidthMismatchError
from apps.common.types import FloatArray
from apps.diffcore.tensor import Tensor, make_result


def _check_width(actual: int, expected: int, where: str) -> None:
    if actual != expected:
        raise WidthMismatchError(f"{where}: width {actual} != expected {expected}")


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """
    Аффинное преобразование строк: x @ W + b.

    Args:
        x (Tensor): Матрица (n, d_in) или вектор (d_in,).
        weight (Tensor): Матрица (d_in, d_out).
        bias (Tensor | None): Вектор (d_out,).

    Raises:
        WidthMismatchError: Если d_in не совпадает.

    Returns:
        Tensor: (n, d_out) или (d_out,).
    """
    _check_width(x.shape[-1], weight.shape[0], "linear")

    out = x.data @ weight.data
    if bias is not None:
        out = out + bias.data

    def backward(g: FloatArray) -> list[FloatArray | None]:
        x2 = x.data.reshape(-1, x.shape[-1])
        g2 = g.reshape(-1, g.shape[-1])
        grads: list[FloatArray | None] = [(g @ weight.data.T).reshape(x.shape), x2.T @ g2]
        if bias is not None:
            grads.append(g2.sum(axis=0))
        return grads

    inputs = (x, weight) if bias is None else (x, weight, bias)
    return make_result("linear", out, inputs, backward)


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return make_result("relu", np.where(mask, x.data, 0.0), (x,), lambda g: [g * mask])


def concat_columns(left: Tensor, right: Tensor) -> Tensor:
    """[left || right] по второй оси."""
    if left.shape[0] != right.shape[0]:
        raise WidthMismatchError(f"concat: row counts {left.shape[0]} != {right.shape[0]}")

    split = left.shape[1]
    return make_result(
        "concat",
        np.concatenate([left.data, right.data], axis=1),
        (left, right),
        lambda g: [g[:, :split], g[:, split:]],
    )


def propagate(operator: sparse.csr_matrix, x: Tensor) -> Tensor:
    """
    Умножение постоянной разреженной матрицы на тензор: M @ x.

    Используется для среднего по соседям; градиент - M^T @ g.
    """
    _check_width(x.shape[0], operator.shape[1], "propagate")
    return make_result("propagate", np.asarray(operator @ x.data), (x,), lambda g: [np.asarray(operator.T @ g)])


def mean_rows(x: Tensor) -> Tensor:
    """Среднее по строкам: (n, d) -> (d,)."""
    n = x.shape[0]
    return make_result("mean_rows", x.data.mean(axis=0), (x,), lambda g: [np.broadcast_to(g / n, x.shape).copy()])


def sum_rows(x: Tensor) -> Tensor:
    """Сумма по строкам: (n, d) -> (d,)."""
    return make_result("sum_rows", x.data.sum(axis=0), (x,), lambda g: [np.broadcast_to(g, x.shape).copy()])


def sum_all(x: Tensor) -> Tensor:
    """Сумма всех элементов -> скаляр."""
    return make_result("sum_all", np.asarray(x.data.sum()), (x,), lambda g: [np.full(x.shape, float(g))])


def add(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise WidthMismatchError(f"add: shapes {a.shape} != {b.shape}")
    return make_result("add", a.data + b.data, (a, b), lambda g: [g, g])


def scale(x: Tensor, factor: float) -> Tensor:
    return make_result("scale", x.data * factor, (x,), lambda g: [g * factor])


def stack(vectors: Sequence[Tensor]) -> Tensor:
    """Складывает векторы одинаковой ширины в матрицу (k, d)."""
    widths = {v.shape for v in vectors}
    if len(widths) != 1:
        raise WidthMismatchError(f"stack: inconsistent shapes {sorted(widths)}")

    return make_result("stack", np.stack([v.data for v in vectors]), tuple(vectors), lambda g: list(g))


def column(x: Tensor, index: int = 0) -> Tensor:
    """Столбец матрицы (k, d) -> (k,)."""

    def backward(g: FloatArray) -> list[FloatArray | None]:
        full = np.zeros_like(x.data)
        full[:, index] = g
        return [full]

    return make_result("column", x.data[:, index].copy(), (x,), backward)


def weighted_sum(vectors: Sequence[Tensor], weights: Sequence[float], divisor: float | None = None) -> Tensor:
    """
    Взвешенная сумма векторов в порядке индексов, с необязательным делением.

    Нулевые веса пропускаются (вектор может отсутствовать), поэтому результат
    побитно совпадает с суммой только по ненулевым слагаемым.

    Args:
        vectors (Sequence[Tensor]): Векторы одинаковой ширины.
        weights (Sequence[float]): Веса.
        divisor (float | None): Делитель результата (J для среднего).

    Raises:
        WidthMismatchError: Разная ширина или длины.

    Returns:
        Tensor: Вектор.
    """
    if len(vectors) != len(weights):
        raise WidthMismatchError(f"weighted_sum: {len(vectors)} vectors vs {len(weights)} weights")

    active = [(v, float(w)) for v, w in zip(vectors, weights, strict=True) if w != 0.0]
    if not active:
        raise WidthMismatchError("weighted_sum: all weights are zero")

    width = active[0][0].shape
    for v, _ in active:
        if v.shape != width:
            raise WidthMismatchError(f"weighted_sum: shape {v.shape} != {width}")

    total = active[0][1] * active[0][0].data
    for v, w in active[1:]:
        total = total + w * v.data

    if divisor is not None:
        total = total / divisor

    def backward(g: FloatArray) -> list[FloatArray | None]:
        upstream = g / divisor if divisor is not None else g
        return [w * upstream for _, w in active]

    return make_result("weighted_sum", total, tuple(v for v, _ in active), backward)
