"""
Дважды дифференцируемые тестовые головы для разложения потерь вокруг чистого эмбеддинга.

Каждая голова - композиция F' и функции потерь: скаляр от эмбеддинга графа.
"""

from dataclasses import dataclass
from typing import Protocol

import numpy as np

from apps.common.exceptions import ConfigError
from apps.common.types import FloatArray


class LossHead(Protocol):
    """L(F'(z)) как функция эмбеддинга z."""

    def value(self, z: FloatArray) -> FloatArray: ...

    def gradient(self, z: FloatArray) -> FloatArray: ...

    def hessian(self, z: FloatArray) -> FloatArray: ...


@dataclass(frozen=True)
class QuadraticHead:
    """
    L(z) = z^T A z / 2 + b^T z + c.

    Разложение второго порядка для неё точное, поэтому оценка Монте-Карло
    обязана совпасть с B + R из точных моментов.
    """

    A: FloatArray
    b: FloatArray
    c: float = 0.0

    def __post_init__(self) -> None:
        A = np.asarray(self.A)
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != np.asarray(self.b).shape[0]:
            raise ConfigError(f"QuadraticHead needs A (d, d) and b (d,), got {A.shape} and {np.shape(self.b)}")
        if not np.array_equal(A, A.T):
            raise ConfigError("QuadraticHead needs a symmetric A")

    @classmethod
    def random(cls, width: int, rng: np.random.Generator) -> "QuadraticHead":
        """Случайная выпуклая квадратичная голова."""
        M = rng.standard_normal((width, width))
        A = M @ M.T / width + np.eye(width)
        return cls(A=(A + A.T) / 2.0, b=rng.standard_normal(width), c=float(rng.standard_normal()))

    def value(self, z: FloatArray) -> FloatArray:
        """Значение в точке или в пачке точек (..., d)."""
        return 0.5 * np.einsum("...i,ij,...j->...", z, self.A, z) + z @ self.b + self.c

    def gradient(self, z: FloatArray) -> FloatArray:
        return self.A @ z + self.b

    def hessian(self, z: FloatArray) -> FloatArray:
        return np.array(self.A, dtype=np.float64)


@dataclass(frozen=True)
class MlpHead:
    """
    L(z) = (w2 . tanh(W1 z + b1) + b2 - target)^2 / 2.

    Производные - центральные разности. Используется только для качественных проверок:
    здесь разложение второго порядка приближённое.
    """

    W1: FloatArray
    b1: FloatArray
    w2: FloatArray
    b2: float = 0.0
    target: float = 0.0
    step: float = 1e-5

    @classmethod
    def random(cls, width: int, hidden: int, rng: np.random.Generator) -> "MlpHead":
        return cls(
            W1=rng.standard_normal((hidden, width)) / np.sqrt(width),
            b1=np.zeros(hidden),
            w2=rng.standard_normal(hidden) / np.sqrt(hidden),
            target=float(rng.standard_normal()),
        )

    def value(self, z: FloatArray) -> FloatArray:
        residual = np.tanh(z @ self.W1.T + self.b1) @ self.w2 + self.b2 - self.target
        return 0.5 * residual**2

    def gradient(self, z: FloatArray) -> FloatArray:
        eye = np.eye(z.shape[0]) * self.step
        return np.array([(self.value(z + e) - self.value(z - e)) / (2.0 * self.step) for e in eye])

    def hessian(self, z: FloatArray) -> FloatArray:
        eye = np.eye(z.shape[0]) * self.step
        H = np.array([(self.gradient(z + e) - self.gradient(z - e)) / (2.0 * self.step) for e in eye])
        return (H + H.T) / 2.0

    def precondition_norms(self, fresh: FloatArray, stale: FloatArray) -> dict[str, float]:
        """
        Средние нормы ||W1 h~|| и ||W1 h|| первого линейного слоя.

        Предпосылка разложения (W h~ близко к нулю) только сообщается, но не проверяется.
        """
        return {
            "stale_norm": float(np.linalg.norm(stale @ self.W1.T, axis=1).mean()),
            "fresh_norm": float(np.linalg.norm(fresh @ self.W1.T, axis=1).mean()),
        }
