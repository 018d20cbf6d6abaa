import numpy as np

from ..models import FunctionSpec
from .base import BaseFunction


class HatFunction(BaseFunction):
    """
    Кусочно-линейная «шапочка» max(0, 1 − |s − c|/w).

    Липшицева; производная определена почти всюду, в изломах полагается 0.
    """

    MAX_DERIVATIVE_ORDER = 1

    def __init__(self, spec: FunctionSpec):
        super().__init__(spec)
        self.center = float(spec.center[0]) if spec.center else 0.0
        self.width = float(spec.width)

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        s = self.ridge(points)
        return np.maximum(0.0, 1.0 - np.abs(s - self.center) / self.width)

    def _derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        offset = x - self.center
        inside = np.abs(offset) < self.width
        return np.where(inside, -np.sign(offset) / self.width, 0.0)

    def breakpoints(self) -> tuple[float, ...]:
        return (self.center - self.width, self.center, self.center + self.width)

    def lipschitz_constant(self) -> float:
        """‖f′‖_∞ = 1/w (без множителя scale)."""
        return 1.0 / self.width
