"""
Спектральный движок для лакунарных рядов f(x) = Σ_k A_k cos(ω_k·x + φ_k).

Обобщённая разность такого ряда выражается через преобразование Фурье меры:
Δ_σ f(x,h) = Σ_k A_k Re(e^{i(ω_k·x+φ_k)} σ̂(hω_k)). Поэтому любой интеграл по h
сводится к не зависящим от x величинам ∫ σ̂(hω_k) h^{−q} dh, которые считаются
по диадическим панелям: рядом по моментам при |hω|M ≤ 1 и осцилляционными
весами QUADPACK дальше.
"""

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy import special

from ..errors import PreconditionError
from ..models import SignedMeasure
from .budget import EvaluationBudget
from .moments import directional_sphere_moment
from .quadrature import dyadic_edges, quad_checked


@dataclass(frozen=True)
class LacunarySpectrum:
    """Амплитуды A_k, частоты ω_k (K, d) и фазы φ_k."""

    amplitudes: np.ndarray
    frequencies: np.ndarray
    phases: np.ndarray

    def __len__(self) -> int:
        return int(self.amplitudes.size)

    def truncated(self, count: int) -> "LacunarySpectrum":
        return LacunarySpectrum(
            self.amplitudes[:count], self.frequencies[:count], self.phases[:count]
        )

    @property
    def norms(self) -> np.ndarray:
        return np.linalg.norm(self.frequencies, axis=1)

    def phase_at(self, points: np.ndarray) -> np.ndarray:
        """ω_k·x + φ_k для точек (N, d), форма (N, K)."""
        points = np.asarray(points, dtype=float)
        return points @ self.frequencies.T + self.phases

    def evaluate(self, points: np.ndarray) -> np.ndarray:
        return np.cos(self.phase_at(points)) @ self.amplitudes

    def combine(self, points: np.ndarray, coefficients: np.ndarray) -> np.ndarray:
        """Σ_k A_k Re(e^{i(ω_k·x+φ_k)} c_k); coefficients формы (K,) или (N, K)."""
        phase = self.phase_at(points)
        values = np.real(np.exp(1j * phase) * coefficients)
        return values @ self.amplitudes


def tail_start(bounds: np.ndarray, tol: float) -> int:
    """Наименьшее K, при котором хвост Σ_{k≥K} bounds[k] ≤ tol."""
    bounds = np.nan_to_num(np.asarray(bounds, dtype=float), nan=np.inf, posinf=np.inf)
    suffix = np.cumsum(bounds[::-1])[::-1]
    below = np.nonzero(suffix <= tol)[0]
    if below.size == 0:
        return int(bounds.size)
    return int(below[0])


class MeasureTransform:
    """σ̂(t) = ∫ e^{i t·w} dσ(w) с разложением по моментам вблизи нуля."""

    SERIES_TERMS = 30

    def __init__(self, sigma: SignedMeasure, vanishing_order: int):
        self.sigma = sigma
        self.dim = sigma.dim
        self.points = sigma.points_array()
        self.weights = sigma.weights_array()
        self.radius = sigma.radius or 1.0
        self.vanishing_order = vanishing_order
        if sigma.sphere is not None:
            self.sphere_radius = float(sigma.sphere.radius)
            self.sphere_weight = float(sigma.sphere.weight)
        else:
            self.sphere_radius = 0.0
            self.sphere_weight = 0.0
        self._j = np.arange(self.SERIES_TERMS + 1)
        self._sphere_moments = np.array(
            [directional_sphere_moment(self.dim, int(j)) for j in self._j]
        )
        self.series_factors = (1j ** self._j) / np.array(
            [math.factorial(int(j)) for j in self._j], dtype=float
        )

    def scaled_moments(self, direction: np.ndarray) -> np.ndarray:
        """
        μ̃_j = ∫ (u·w / M)^j dσ(w) для единичного u, j = 0..J.

        Моменты до порядка зануления обнуляются точно; |μ̃_j| ≤ ‖σ‖.
        """
        unit = np.asarray(direction, dtype=float)
        mu = np.zeros(self._j.size)
        if self.points.size:
            projections = (self.points @ unit) / self.radius
            mu += (projections[:, None] ** self._j[None, :]).T @ self.weights
        if self.sphere_weight:
            mu += self.sphere_weight * (self.sphere_radius / self.radius) ** self._j * self._sphere_moments
        mu[: self.vanishing_order + 1] = 0.0
        return mu

    def sphere_char(self, s: np.ndarray) -> np.ndarray:
        """Преобразование нормированной меры на сфере как функция |t|·r."""
        s = np.asarray(s, dtype=float)
        if self.dim == 1:
            return np.cos(s)
        if self.dim == 2:
            return special.j0(s)
        return np.sinc(s / np.pi)

    def __call__(self, t: np.ndarray) -> np.ndarray:
        t = np.atleast_2d(np.asarray(t, dtype=float))
        norms = np.linalg.norm(t, axis=1)
        out = np.zeros(t.shape[0], dtype=complex)
        if self.points.size:
            out += np.exp(1j * (t @ self.points.T)) @ self.weights
        if self.sphere_weight:
            out += self.sphere_weight * self.sphere_char(norms * self.sphere_radius)

        for idx in np.nonzero((norms * self.radius <= 1.0) & (norms > 0))[0]:
            mu = self.scaled_moments(t[idx] / norms[idx])
            scaled = norms[idx] * self.radius
            out[idx] = np.sum(self.series_factors * mu * scaled ** self._j)
        return out


class SpectralIntegrator:
    """
    Интегралы ∫_lo^hi σ̂(hω) h^{−q} dh для частот ω лакунарного ряда.

    q = m + α + 1. Результаты кешируются по (ω, lo, hi).
    """

    def __init__(
        self,
        transform: MeasureTransform,
        exponent: float,
        epsabs: float,
        limit: int = 500,
        budget: Optional[EvaluationBudget] = None,
    ):
        self.transform = transform
        self.q = exponent + 1.0
        self.epsabs = epsabs
        self.limit = limit
        self.budget = budget
        self.evaluations = 0
        self._cache: dict[tuple, tuple[complex, float]] = {}

    def cutoff(self, omega: np.ndarray) -> float:
        """h*, ниже которого ряд по моментам сходится быстро (|hω|M ≤ 1)."""
        scale = float(np.linalg.norm(omega)) * self.transform.radius
        return math.inf if scale == 0 else 1.0 / scale

    def segment(self, omega: np.ndarray, lo: float, hi: float) -> tuple[complex, float]:
        """∫_lo^hi σ̂(hω) h^{−q} dh и оценка ошибки."""
        if hi <= lo:
            return 0j, 0.0
        key = (tuple(np.asarray(omega, dtype=float).tolist()), lo, hi)
        cached = self._cache.get(key)
        if cached is not None:
            return cached

        h_star = self.cutoff(omega)
        value, error = 0j, 0.0
        if lo < h_star:
            value += self._near(omega, lo, min(hi, h_star))
        if hi > h_star:
            far_value, far_error = self._far(omega, max(lo, h_star), hi)
            value += far_value
            error += far_error
        self._cache[key] = (value, error)
        return value, error

    @staticmethod
    def _power_integral(p: float, lo: float, hi: float) -> float:
        """∫_lo^hi u^{p−1} du."""
        if p == 0:
            return math.log(hi / lo)
        return (hi ** p - lo ** p) / p

    def _near(self, omega: np.ndarray, lo: float, hi: float) -> complex:
        # Замена u = h·|ω|M переводит отрезок в [0, 1] и убирает переполнение
        norm = float(np.linalg.norm(omega))
        if norm == 0.0:
            return 0j
        scale = norm * self.transform.radius
        mu = self.transform.scaled_moments(np.asarray(omega, dtype=float) / norm)
        u_lo, u_hi = lo * scale, hi * scale
        total = 0j
        for j in np.nonzero(mu)[0]:
            p = j - self.q + 1.0
            if u_lo == 0.0 and p <= 0:
                raise PreconditionError(
                    "Интеграл расходится в h → 0: момент порядка "
                    f"{j} не зануляется при показателе {self.q - 1:g}",
                    {"moment_degree": int(j)},
                )
            total += self.transform.series_factors[j] * mu[j] * self._power_integral(p, u_lo, u_hi)
        return complex(total * scale ** (self.q - 1.0))

    def _oscillatory(self, func, lo: float, hi: float, frequency: float, kind: str) -> tuple[float, float]:
        value, error, neval = quad_checked(
            func, lo, hi, self.epsabs, limit=self.limit, weight=kind, wvar=frequency,
            context={"frequency": frequency},
        )
        self.evaluations += neval
        if self.budget is not None:
            self.budget.consume(neval, {"stage": "spectral"})
        return value, error

    def _exp_power(self, c: float, lo: float, hi: float) -> tuple[complex, float]:
        """∫_lo^hi e^{ich} h^{−q} dh."""
        q = self.q
        if c == 0.0:
            return complex(self._power_integral(1.0 - q, lo, hi)), 0.0
        cos_part, cos_err = self._oscillatory(lambda h: h ** -q, lo, hi, abs(c), "cos")
        sin_part, sin_err = self._oscillatory(lambda h: h ** -q, lo, hi, abs(c), "sin")
        return complex(cos_part, math.copysign(1.0, c) * sin_part), cos_err + sin_err

    def _far(self, omega: np.ndarray, lo: float, hi: float) -> tuple[complex, float]:
        transform = self.transform
        value, error = 0j, 0.0
        if transform.points.size:
            projections = transform.points @ np.asarray(omega, dtype=float)
            for c, w in zip(projections, transform.weights):
                part, part_err = self._exp_power(float(c), lo, hi)
                value += w * part
                error += abs(w) * part_err
        if transform.sphere_weight:
            s = float(np.linalg.norm(omega)) * transform.sphere_radius
            part, part_err = self._sphere_far(s, lo, hi)
            value += transform.sphere_weight * part
            error += abs(transform.sphere_weight) * part_err
        return value, error

    def _sphere_far(self, s: float, lo: float, hi: float) -> tuple[float, float]:
        q = self.q
        dim = self.transform.dim
        if s == 0.0:
            return self._power_integral(1.0 - q, lo, hi), 0.0
        if dim == 1:
            return self._oscillatory(lambda h: h ** -q, lo, hi, s, "cos")
        if dim == 3:
            value, err = self._oscillatory(lambda h: h ** (-q - 1.0), lo, hi, s, "sin")
            return value / s, err / s
        # J₀(z) = Re(e^{iz}·g(z)), g = hankel1e медленно меняется
        re_part, re_err = self._oscillatory(
            lambda h: float(np.real(special.hankel1e(0, h * s))) * h ** -q, lo, hi, s, "cos"
        )
        im_part, im_err = self._oscillatory(
            lambda h: float(np.imag(special.hankel1e(0, h * s))) * h ** -q, lo, hi, s, "sin"
        )
        return re_part - im_part, re_err + im_err

    def panels(self, omega: np.ndarray, lo: float, hi: float) -> list[tuple[float, float]]:
        """Диадические панели [lo, hi]; при lo = 0 первая панель целиком в ближней зоне."""
        if lo > 0.0:
            edges = dyadic_edges(lo, hi)
        else:
            h_star = self.cutoff(omega)
            start = hi if not math.isfinite(h_star) else min(hi, 2.0 ** math.floor(math.log2(h_star)))
            edges = [0.0] + (dyadic_edges(start, hi) if start < hi else [hi])
        return list(zip(edges[:-1], edges[1:]))

    def integral(self, omega: np.ndarray, lo: float, hi: float) -> tuple[complex, float]:
        total, error = 0j, 0.0
        for a, b in self.panels(omega, lo, hi):
            value, err = self.segment(omega, a, b)
            total += value
            error += err
        return total, error

    def cumulative_table(
        self, spectrum: LacunarySpectrum, eps_levels: list[float]
    ) -> tuple[np.ndarray, np.ndarray]:
        """
        T_k(ε) = ∫_ε^1 σ̂(hω_k) h^{−q} dh для всех ε (по убыванию) и k.

        Returns:
            (T формы (n_eps, K), накопленные ошибки формы (n_eps, K))
        """
        levels = [float(e) for e in eps_levels]
        if levels != sorted(levels, reverse=True):
            raise ValueError("Уровни ε должны идти по убыванию")
        table = np.zeros((len(levels), len(spectrum)), dtype=complex)
        errors = np.zeros((len(levels), len(spectrum)))
        for k in range(len(spectrum)):
            omega = spectrum.frequencies[k]
            running, running_err = 0j, 0.0
            upper = 1.0
            for i, eps in enumerate(levels):
                if eps < upper:
                    value, err = self.integral(omega, eps, upper)
                    running += value
                    running_err += err
                    upper = eps
                table[i, k] = running
                errors[i, k] = running_err
        return table, errors

    def full_integrals(self, spectrum: LacunarySpectrum) -> tuple[np.ndarray, np.ndarray]:
        """G_k = ∫_0^1 σ̂(hω_k) h^{−q} dh (несобственный в нуле, сходится при занулённых моментах)."""
        values = np.zeros(len(spectrum), dtype=complex)
        errors = np.zeros(len(spectrum))
        for k in range(len(spectrum)):
            values[k], errors[k] = self.integral(spectrum.frequencies[k], 0.0, 1.0)
        return values, errors
