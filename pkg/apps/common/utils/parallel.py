"""
Пул потоков для чистых (read-only) вычислений.
"""

from collections.abc import Callable, Sequence
from concurrent.futures import ThreadPoolExecutor


def parallel_map[T, R](func: Callable[[T], R], items: Sequence[T], threads: int) -> list[R]:
    """
    Применяет функцию к элементам, при threads > 1 - в пуле потоков.

    Результаты возвращаются в порядке входа, поэтому итог не зависит от планировщика.
    Функция не должна мутировать общее состояние.

    Args:
        func (Callable[[T], R]): Чистая функция.
        items (Sequence[T]): Входные элементы.
        threads (int): Максимальное число потоков.

    Returns:
        list[R]: Результаты в порядке `items`.
    """
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]

    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as pool:
        return list(pool.map(func, items))
