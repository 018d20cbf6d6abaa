import numpy as np
from scipy.interpolate import CubicSpline

from ..errors import EvaluationDomainError, UnsupportedDimensionError
from ..models import FunctionSpec
from .base import BaseFunction


class SampledFunction(BaseFunction):
    """
    Функция, заданная значениями на сетке, с кубической интерполяцией.

    Вне [grid[0], grid[-1]] не вычисляется; производные выше первой
    у интерполянта ненадёжны и не выдаются.
    """

    MAX_DERIVATIVE_ORDER = 1

    def __init__(self, spec: FunctionSpec):
        super().__init__(spec)
        if self.dim != 1:
            raise UnsupportedDimensionError(f"Сеточная функция поддерживает только d=1, получено d={self.dim}")
        grid = np.asarray(spec.grid, dtype=float)
        order = np.argsort(grid)
        self.grid = grid[order]
        self.spline = CubicSpline(self.grid, np.asarray(spec.values, dtype=float)[order])

    def _check_domain(self, x: np.ndarray) -> None:
        lo, hi = self.grid[0], self.grid[-1]
        outside = (x < lo) | (x > hi)
        if np.any(outside):
            raise EvaluationDomainError(
                f"Точка {float(x[outside][0]):g} вне сетки [{lo:g}, {hi:g}]",
                {"lo": float(lo), "hi": float(hi)},
            )

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        x = points[:, 0]
        self._check_domain(x)
        return self.spline(x)

    def _derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        self._check_domain(x)
        return self.spline(x, nu=order)

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(float(g) for g in self.grid)
