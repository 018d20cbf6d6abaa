from typing import Optional

import numpy as np
from numpy.polynomial import Polynomial

from ..models import FunctionSpec
from .base import BaseFunction


class PolynomialFunction(BaseFunction):
    """Многочлен Σ c_j s^j; коэффициенты по возрастанию степени."""

    MAX_DERIVATIVE_ORDER: Optional[int] = None

    def __init__(self, spec: FunctionSpec):
        super().__init__(spec)
        self.poly = Polynomial(list(spec.coeffs) or [0.0])

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.poly(self.ridge(points))

    def _derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        scale = self.direction[0]
        return self.poly.deriv(order)(scale * x) * scale ** order
