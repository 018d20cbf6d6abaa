"""
Гладкая «шапочка» ψ(y) = exp(1 − 1/(1 − |y|²)), y = (x − c)/w, ψ = 0 вне шара.

Производные при d = 1 имеют вид ψ^{(n)}(y) = N_n(y)·ψ(y)/(1 − y²)^{2n}
с многочленами N_{n+1} = N_n′(1 − y²)² + 4n·y·N_n(1 − y²) − 2y·N_n.
"""

from functools import lru_cache
from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from ..models import FunctionSpec
from .base import BaseFunction

_ONE_MINUS_Y2 = Polynomial([1.0, 0.0, -1.0])
_Y = Polynomial([0.0, 1.0])


@lru_cache(maxsize=32)
def bump_numerator(order: int) -> Polynomial:
    """Многочлен N_n из формулы для n-й производной."""
    if order == 0:
        return Polynomial([1.0])
    prev = bump_numerator(order - 1)
    n = order - 1
    return (
        prev.deriv() * _ONE_MINUS_Y2 ** 2
        + 4 * n * _Y * prev * _ONE_MINUS_Y2
        - 2 * _Y * prev
    )


class BumpFunction(BaseFunction):
    """Радиальная гладкая функция с носителем в шаре радиуса width."""

    MAX_DERIVATIVE_ORDER: Optional[int] = None

    def __init__(self, spec: FunctionSpec):
        super().__init__(spec)
        center = spec.center or (0.0,) * self.dim
        self.center = np.asarray(center, dtype=float)
        self.width = float(spec.width)

    def _profile(self, y2: np.ndarray, order: int = 0, y: Optional[np.ndarray] = None) -> np.ndarray:
        out = np.zeros_like(y2)
        inside = y2 < 1.0
        gap = 1.0 - y2[inside]
        # exp(g − 2n·log(1−y²)) без переполнения у края носителя
        log_factor = 1.0 - 1.0 / gap - 2 * order * np.log(gap)
        if order == 0:
            out[inside] = np.exp(log_factor)
        else:
            out[inside] = bump_numerator(order)(y[inside]) * np.exp(log_factor)
        return out

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        y = (points - self.center) / self.width
        return self._profile(np.sum(y * y, axis=1))

    def _derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        y = (x - self.center[0]) / self.width
        return self._profile(y * y, order, y) / self.width ** order

    def breakpoints(self) -> tuple[float, ...]:
        c = float(self.center[0])
        return (c - self.width, c + self.width)
