from abc import ABC, abstractmethod
from typing import Optional

import numpy as np

from ..errors import EvaluationDomainError, UnsupportedDimensionError
from ..models import FunctionSpec
from ..numerics.spectral import LacunarySpectrum


class BaseFunction(ABC):
    """
    Базовый класс вычислимой функции на R^d.

    Включает:
    - Векторизованное вычисление в массиве точек (N, d) или (N,) при d = 1
    - Производные с контролем допустимого порядка
    - Спектральное представление для лакунарных рядов (если есть)
    - Точки излома для разбиения квадратур на панели
    """

    # Максимальный порядок производной; None означает без ограничения
    MAX_DERIVATIVE_ORDER: Optional[int] = 0

    def __init__(self, spec: FunctionSpec):
        """
        Инициализация функции по описанию.

        Args:
            spec: Описание функции (вид, параметры, заявленный класс, eval_tol)
        """
        self.spec = spec
        self.dim = spec.dim
        self.scale = float(spec.scale)
        self.eval_tol = spec.eval_tol
        if spec.direction:
            self.direction = np.asarray(spec.direction, dtype=float)
        else:
            self.direction = np.eye(self.dim)[0]

    def __call__(self, points) -> np.ndarray:
        return self.evaluate(points)

    def _as_points(self, points) -> tuple[np.ndarray, tuple[int, ...]]:
        arr = np.asarray(points, dtype=float)
        if self.dim == 1:
            if arr.ndim >= 1 and arr.shape[-1] == 1 and arr.ndim > 1:
                shape = arr.shape[:-1]
            else:
                shape = arr.shape
            return arr.reshape(-1, 1), shape
        if arr.shape[-1] != self.dim:
            raise EvaluationDomainError(
                f"Точки формы {arr.shape} не согласованы с размерностью d={self.dim}"
            )
        return arr.reshape(-1, self.dim), arr.shape[:-1]

    def ridge(self, points: np.ndarray) -> np.ndarray:
        """Переменная ⟨direction, x⟩ для одномерных семейств."""
        return points @ self.direction

    def evaluate(self, points) -> np.ndarray:
        """Значения функции в точках."""
        flat, shape = self._as_points(points)
        return (self.scale * self._evaluate(flat)).reshape(shape)

    def derivative(self, points, order: int) -> np.ndarray:
        """
        Производная порядка order (d = 1).

        Raises:
            UnsupportedDimensionError: при d > 1
            EvaluationDomainError: если порядок превышает допустимую гладкость
        """
        if self.dim != 1:
            raise UnsupportedDimensionError(f"Производные определены только при d=1, получено d={self.dim}")
        if order < 0:
            raise EvaluationDomainError(f"Порядок производной должен быть ≥ 0: {order}")
        limit = self.max_derivative_order
        if limit is not None and order > limit:
            raise EvaluationDomainError(
                f"Порядок {order} превышает допустимую гладкость {limit} для {self.spec.kind.value}"
            )
        if order == 0:
            return self.evaluate(points)
        flat, shape = self._as_points(points)
        return (self.scale * self._derivative(flat[:, 0], order)).reshape(shape)

    @property
    def max_derivative_order(self) -> Optional[int]:
        return self.MAX_DERIVATIVE_ORDER

    @abstractmethod
    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        """Значения в точках (N, d) без учёта множителя scale."""

    def _derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        raise EvaluationDomainError(f"Производные для {self.spec.kind.value} не реализованы")

    def spectrum(self, tol: Optional[float] = None) -> Optional[LacunarySpectrum]:
        """Косинусный спектр (только у лакунарных рядов)."""
        return None

    def top_frequency(self) -> Optional[float]:
        """Наибольшая учитываемая частота; None для нелакунарных функций."""
        return None

    def breakpoints(self) -> tuple[float, ...]:
        """Точки излома (d = 1), в которых производная разрывна."""
        return ()
