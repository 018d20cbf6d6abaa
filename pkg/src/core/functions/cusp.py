import numpy as np

from ..models import FunctionSpec
from .base import BaseFunction


class CuspFunction(BaseFunction):
    """|s|^α·sign(s) на переменной s = ⟨direction, x⟩."""

    def __init__(self, spec: FunctionSpec):
        super().__init__(spec)
        self.alpha = float(spec.alpha)

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        s = self.ridge(points)
        return np.sign(s) * np.abs(s) ** self.alpha

    def breakpoints(self) -> tuple[float, ...]:
        return (0.0,)
