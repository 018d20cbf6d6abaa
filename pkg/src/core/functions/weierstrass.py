"""
Лакунарные ряды типа Вейерштрасса.

f(x) = scale · Σ_{k≥k₀} b^{−βk} cos(b^k⟨u, x⟩ + φ). Усечение выбирается так,
чтобы хвост Σ_{k>K} b^{−βk} не превосходил допуск.
"""

import math
from typing import Optional

import numpy as np

from ..errors import EvaluationDomainError
from ..models import FunctionSpec
from ..numerics.spectral import LacunarySpectrum
from .base import BaseFunction

# Предел b^k без переполнения двойной точности
MAX_LOG_FREQUENCY = 700.0


class LacunaryFunction(BaseFunction):
    """Общий лакунарный косинусный ряд."""

    def __init__(self, spec: FunctionSpec, decay: float, first_index: int, phase: float):
        """
        Args:
            spec: Описание функции
            decay: Показатель убывания амплитуд β
            first_index: Номер первого члена k₀
            phase: Общая фаза φ всех членов
        """
        super().__init__(spec)
        self.b = float(spec.b)
        self.decay = float(decay)
        self.first_index = first_index
        self.phase = phase
        self._eval_spectrum: Optional[LacunarySpectrum] = None

    def truncation_index(self, tol: float, order: int = 0) -> int:
        """Наименьшее K с хвостом Σ_{k>K} b^{−(β−order)k} ≤ tol."""
        gamma = self.decay - order
        if gamma <= 0:
            raise EvaluationDomainError(
                f"Ряд производной порядка {order} расходится (показатель {self.decay:g})"
            )
        log_b = math.log(self.b)
        k = max(self.first_index, math.ceil(math.log(1.0 / tol) / (gamma * log_b)))
        while math.exp(-gamma * (k + 1) * log_b) / (1.0 - math.exp(-gamma * log_b)) > tol:
            k += 1
        return k

    def max_terms(self) -> int:
        """Число членов, частоты которых ещё представимы в двойной точности."""
        return int(MAX_LOG_FREQUENCY / math.log(self.b)) - self.first_index

    def terms(self, count: int, scaled: bool = True) -> LacunarySpectrum:
        """Первые count членов ряда (по умолчанию с множителем scale)."""
        if count > self.max_terms():
            raise EvaluationDomainError(
                f"Требуется {count} членов ряда, частоты b^k выходят за двойную точность",
                {"b": self.b, "terms": count},
            )
        k = np.arange(self.first_index, self.first_index + count, dtype=float)
        log_b = math.log(self.b)
        amplitudes = np.exp(-self.decay * k * log_b)
        if scaled:
            amplitudes = self.scale * amplitudes
        frequencies = np.exp(k * log_b)[:, None] * self.direction[None, :]
        phases = np.full(count, self.phase)
        return LacunarySpectrum(amplitudes, frequencies, phases)

    def count_for(self, tol: float, order: int = 0) -> int:
        """Число членов k₀..K с хвостом не больше tol."""
        return self.truncation_index(tol, order) - self.first_index + 1

    def spectrum(self, tol: Optional[float] = None) -> LacunarySpectrum:
        if tol is None or tol == self.eval_tol:
            if self._eval_spectrum is None:
                self._eval_spectrum = self.terms(self.count_for(self.eval_tol))
            return self._eval_spectrum
        return self.terms(self.count_for(tol))

    def top_frequency(self) -> float:
        return float(self.b ** self.truncation_index(self.eval_tol))

    def _evaluate(self, points: np.ndarray) -> np.ndarray:
        return self.terms(self.count_for(self.eval_tol), scaled=False).evaluate(points)

    def _derivative(self, x: np.ndarray, order: int) -> np.ndarray:
        spectrum = self.terms(self.count_for(self.eval_tol, order), scaled=False)
        frequencies = spectrum.frequencies[:, 0]
        amplitudes = spectrum.amplitudes * frequencies ** order
        phases = spectrum.phases + order * math.pi / 2.0
        return np.cos(np.outer(x, frequencies) + phases) @ amplitudes


class WeierstrassFunction(LacunaryFunction):
    """Σ_{k≥0} b^{−αk} cos(b^k x)."""

    def __init__(self, spec: FunctionSpec):
        super().__init__(spec, decay=float(spec.alpha), first_index=0, phase=0.0)


class ZygmundWeierstrassFunction(LacunaryFunction):
    """Σ_{k≥1} b^{−k} cos(b^k x), класс Зигмунда."""

    def __init__(self, spec: FunctionSpec):
        super().__init__(spec, decay=1.0, first_index=1, phase=0.0)


class SmoothedWeierstrassFunction(LacunaryFunction):
    """m-кратная почленная первообразная: Σ b^{−(α+m)k} cos(b^k x − mπ/2) ∈ C^{m,α}."""

    def __init__(self, spec: FunctionSpec):
        super().__init__(
            spec,
            decay=float(spec.alpha) + spec.order,
            first_index=0,
            phase=-spec.order * math.pi / 2.0,
        )

    @property
    def max_derivative_order(self) -> int:
        return self.spec.order
