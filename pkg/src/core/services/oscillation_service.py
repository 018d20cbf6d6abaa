import math
import threading
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd

from ..config import config
from ..errors import BudgetExhaustedError, ConfigurationError, PreconditionError
from ..functions import BaseFunction, LacunaryFunction, build_function
from ..models import (
    CorollaryForm,
    FunctionSpec,
    MeasureName,
    OscillationRequest,
    OscillationResult,
    SignedMeasure,
    moment_order,
)
from ..numerics.budget import EvaluationBudget
from ..numerics.quadrature import limit_for_budget, quad_vec_checked
from ..numerics.spectral import LacunarySpectrum, MeasureTransform, SpectralIntegrator, tail_start
from .logger_service import LoggerService, default_logger
from .measure_service import MeasureService

# Узлов сферической квадратуры для нелакунарных функций
SPHERE_NODES = 64


def _power_integral(q: float, lo: float, hi: float) -> float:
    """∫_lo^hi h^{−q} dh."""
    if q == 1.0:
        return math.log(hi / lo)
    return (lo ** (1.0 - q) - hi ** (1.0 - q)) / (q - 1.0)


def check_levels(eps_list: Sequence[float]) -> list[float]:
    """Уровни ε по убыванию; допустимы ε ∈ (0, 1]."""
    levels = sorted({float(e) for e in eps_list}, reverse=True)
    if not levels:
        raise ConfigurationError("Сетка ε пуста")
    if any(not 0 < e <= 1 for e in levels):
        raise PreconditionError(f"Все ε должны лежать в (0, 1]: {levels}")
    return levels


class OscillationPlan:
    """
    Подготовленное вычисление Θ_ε^σ f для набора уровней ε.

    Для лакунарных рядов x-независимые интегралы T_k(ε) считаются один раз
    в конструкторе, после чего evaluate(xs) сводится к сумме косинусов.
    Для остальных функций evaluate(xs) интегрирует по u = log h векторно
    по пачке точек.
    """

    def __init__(
        self,
        f: BaseFunction,
        sigma: SignedMeasure,
        levels: list[float],
        m: int,
        alpha: float,
        quad_tol: float,
        vanishing_order: int,
        request_budget: int,
        budget: Optional[EvaluationBudget] = None,
        measures: Optional[MeasureService] = None,
    ):
        self.f = f
        self.sigma = sigma
        self.levels = levels
        self.exponent = m + alpha
        self.quad_tol = quad_tol
        self.budget = budget
        self.limit = limit_for_budget(request_budget)
        self.evaluations = 0
        self._lock = threading.Lock()
        self.spectral = isinstance(f, LacunaryFunction)
        self.truncation_bound = 0.0
        if self.spectral:
            self._prepare_spectral(vanishing_order)
        else:
            self.points, self.weights = (measures or MeasureService()).discretize(sigma, SPHERE_NODES)

    def _count(self, value: int) -> None:
        with self._lock:
            self.evaluations += int(value)

    # ------------------------------------------------------------------
    # Спектральный путь
    # ------------------------------------------------------------------

    def _term_bounds(self, spectrum: LacunarySpectrum, eps: float) -> np.ndarray:
        """Оценка |A_k ∫_ε^1 σ̂(hω_k) h^{−q} dh| через интегрирование по частям."""
        q = self.exponent + 1.0
        full = _power_integral(q, eps, 1.0)
        points = self.sigma.points_array()
        weights = np.abs(self.sigma.weights_array())
        projections = np.abs(spectrum.frequencies @ points.T)
        with np.errstate(divide="ignore"):
            oscillatory = np.where(projections > 0, 2.0 * eps ** -q / projections, np.inf)
        per_atom = np.minimum(oscillatory, full) @ weights
        sphere = abs(float(self.sigma.sphere.weight)) * full if self.sigma.sphere is not None else 0.0
        return np.abs(spectrum.amplitudes) * (per_atom + sphere)

    def _prepare_spectral(self, vanishing_order: int) -> None:
        full = self.f.terms(self.f.max_terms())
        finest = self.levels[-1]
        bounds = self._term_bounds(full, finest)
        count = tail_start(bounds, self.quad_tol / 4.0)
        if count >= len(full):
            raise BudgetExhaustedError(
                "Хвост лакунарного ряда не укладывается в допуск",
                {"eps": finest, "quad_tol": self.quad_tol},
            )
        count = max(count, 1)
        self.spectrum = full.truncated(count)
        self.truncation_bound = float(np.sum(bounds[count:]))

        panels = max(4, math.ceil(-math.log2(finest)) + 2)
        amplitude_sum = float(np.sum(np.abs(self.spectrum.amplitudes)))
        integrator = SpectralIntegrator(
            MeasureTransform(self.sigma, vanishing_order),
            self.exponent,
            epsabs=self.quad_tol / (4.0 * max(amplitude_sum, 1.0) * panels),
            limit=self.limit,
            budget=self.budget,
        )
        self.table, table_errors = integrator.cumulative_table(self.spectrum, self.levels)
        self.table_errors = table_errors @ np.abs(self.spectrum.amplitudes)
        self._count(integrator.evaluations)

    # ------------------------------------------------------------------
    # Общий путь
    # ------------------------------------------------------------------

    def delta(self, xs: np.ndarray, h: float) -> np.ndarray:
        """Δ_σ f(x, h) для пачки точек (N, d)."""
        shifted = xs[:, None, :] + h * self.points[None, :, :]
        values = self.f.evaluate(shifted.reshape(-1, self.f.dim)).reshape(len(xs), len(self.weights))
        return values @ self.weights

    def _kinks(self, xs: np.ndarray, lo: float, hi: float) -> list[float]:
        """log h, при которых точка x + h·a попадает в излом функции."""
        breakpoints = self.f.breakpoints()
        if not breakpoints:
            return []
        ridge_x = self.f.ridge(xs)
        ridge_a = self.points @ self.f.direction
        kinks = set()
        for a in ridge_a[ridge_a != 0]:
            for bp in breakpoints:
                h = (bp - ridge_x) / a
                kinks.update(float(v) for v in h[(h > lo) & (h < hi)])
        return sorted(math.log(h) for h in kinks)

    def _generic(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        values = np.zeros((len(self.levels), len(xs)))
        errors = np.zeros(len(self.levels))
        exponent = self.exponent
        calls = len(xs) * len(self.weights)
        epsabs = self.quad_tol / len(self.levels)

        def integrand(u: float) -> np.ndarray:
            if self.budget is not None:
                self.budget.consume(calls, {"stage": "theta"})
            return self.delta(xs, math.exp(u)) * math.exp(-u * exponent)

        running = np.zeros(len(xs))
        running_err = 0.0
        upper = 1.0
        for i, eps in enumerate(self.levels):
            if eps < upper:
                lo_u, hi_u = math.log(eps), math.log(upper)
                dyadic = [-j * math.log(2.0) for j in range(math.ceil(-math.log2(upper)), math.floor(-math.log2(eps)) + 1)]
                points = sorted(set(dyadic + self._kinks(xs, eps, upper)))
                part, err, neval = quad_vec_checked(
                    integrand, lo_u, hi_u, epsabs, self.limit, points=points,
                    context={"eps": eps, "upper": upper},
                )
                running = running + part
                running_err += err
                self._count(neval * calls)
                upper = eps
            values[i] = running
            errors[i] = running_err
        return values, errors

    def evaluate(self, xs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        Значения Θ для точек xs (N, d) на всех уровнях.

        Returns:
            (значения формы (L, N), оценки ошибки формы (L,))
        """
        xs = np.asarray(xs, dtype=float).reshape(-1, self.f.dim)
        if not self.spectral:
            return self._generic(xs)
        values = np.stack([self.spectrum.combine(xs, row) for row in self.table])
        self._count(values.size * len(self.spectrum))
        return values, self.table_errors + self.truncation_bound


class OscillationService:
    """Сервис обобщённых разностей и осцилляционных интегралов Θ_ε^σ f."""

    def __init__(
        self,
        measure_service: Optional[MeasureService] = None,
        logger: Optional[LoggerService] = None,
        budget: Optional[EvaluationBudget] = None,
        request_budget: Optional[int] = None,
    ):
        """
        Инициализация сервиса.

        Args:
            measure_service: Сервис мер (опционально)
            logger: Сервис логов (опционально)
            budget: Общий бюджет вычислений (опционально)
            request_budget: Бюджет одного запроса (по умолчанию из конфигурации)
        """
        self._measures = measure_service or MeasureService()
        self._logger = logger or default_logger
        self.budget = budget
        self.request_budget = request_budget or config.request_budget

    @property
    def measures(self) -> MeasureService:
        return self._measures

    # ------------------------------------------------------------------
    # Δ_σ f
    # ------------------------------------------------------------------

    def delta_sigma(self, spec: FunctionSpec, sigma: SignedMeasure, x, h: float) -> np.ndarray | float:
        """
        Δ_σ f(x, h) = ∫ f(x + hw) dσ(w).

        Атомы суммируются напрямую, сфера фиксированной квадратурой;
        для лакунарного ряда со сферической компонентой используется
        точное преобразование меры.
        """
        if not h > 0:
            raise PreconditionError(f"Шаг h должен быть положительным: {h}")
        f = build_function(spec)
        self._check_dims(f, sigma)
        xs = np.asarray(x, dtype=float)
        single = xs.ndim == 0 or (xs.ndim == 1 and f.dim > 1)
        xs = xs.reshape(-1, f.dim)

        spectrum = f.spectrum()
        if spectrum is not None and sigma.sphere is not None:
            transform = MeasureTransform(sigma, -1)
            values = spectrum.combine(xs, transform(h * spectrum.frequencies))
        else:
            points, weights = self._measures.discretize(sigma, SPHERE_NODES)
            shifted = xs[:, None, :] + h * points[None, :, :]
            values = f.evaluate(shifted.reshape(-1, f.dim)).reshape(len(xs), len(weights)) @ weights
        return float(values[0]) if single else values

    # ------------------------------------------------------------------
    # Θ_ε^σ f
    # ------------------------------------------------------------------

    @staticmethod
    def _check_dims(f: BaseFunction, sigma: SignedMeasure, x: Optional[Sequence[float]] = None) -> None:
        if f.dim != sigma.dim or (x is not None and len(x) != f.dim):
            raise PreconditionError(
                f"Размерности не согласованы: f: {f.dim}, σ: {sigma.dim}"
                + (f", x: {len(x)}" if x is not None else "")
            )

    def plan(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        eps_list: Sequence[float],
        m: int,
        alpha: float,
        quad_tol: Optional[float] = None,
    ) -> OscillationPlan:
        """
        Проверяет предусловия и готовит вычисление Θ на уровнях eps_list.

        Raises:
            PreconditionError: моменты σ не занулены до [m+α], ε вне (0, 1],
                несогласованные размерности
        """
        if m < 0 or not 0 < alpha <= 1:
            raise ConfigurationError(f"Некорректный класс гладкости: m={m}, α={alpha}")
        quad_tol = config.quad_tol if quad_tol is None else quad_tol
        if not quad_tol > 0:
            raise ConfigurationError(f"quad_tol должен быть положительным: {quad_tol}")
        f = build_function(spec)
        self._check_dims(f, sigma)
        levels = check_levels(eps_list)
        order = moment_order(m, alpha)
        self._measures.require_vanishing(sigma, order, f"показатель m+α={m + alpha:g}")
        vanishing = self._measures.vanishing_order(sigma)
        return OscillationPlan(
            f, sigma, levels, m, alpha, quad_tol, vanishing, self.request_budget, self.budget, self._measures
        )

    def theta(self, req: OscillationRequest) -> OscillationResult:
        """
        Θ_ε^σ f(x) = ∫_ε^1 Δ_σ f(x,h) h^{−(m+α)} dh/h.

        Raises:
            BudgetExhaustedError: квадратура не сошлась в пределах бюджета
        """
        f = build_function(req.f)
        self._check_dims(f, req.sigma, req.x)
        plan = self.plan(req.f, req.sigma, [req.eps], req.m, req.alpha, req.quad_tol)
        values, errors = plan.evaluate(np.asarray(req.x, dtype=float)[None, :])
        return OscillationResult(
            value=float(values[0, 0]),
            quad_error_estimate=float(errors[0]),
            evaluations=int(plan.evaluations),
        )

    def theta_at(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        x: float | Sequence[float],
        eps: float,
        m: int = 0,
        alpha: float = 1.0,
        quad_tol: Optional[float] = None,
    ) -> OscillationResult:
        """Удобная обёртка над theta для скалярного или векторного x."""
        point = tuple(float(c) for c in np.atleast_1d(x))
        return self.theta(
            OscillationRequest(
                f=spec, sigma=sigma, x=point, eps=eps, m=m, alpha=alpha,
                quad_tol=config.quad_tol if quad_tol is None else quad_tol,
            )
        )

    def theta_tilde(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        x: float,
        eps: float,
        quad_tol: Optional[float] = None,
    ) -> OscillationResult:
        """Θ̃_ε^σ f(x) = ∫_ε^1 Δ_σ f(x,h) dh/h² (d = 1, моменты до первого порядка)."""
        if sigma.dim != 1:
            raise PreconditionError("Θ̃ определён только при d=1")
        self._measures.require_vanishing(sigma, 1, "Θ̃ требует зануления моментов порядка ≤ 1")
        return self.theta_at(spec, sigma, x, eps, 0, 1.0, quad_tol)

    def corollary_form(
        self,
        form: CorollaryForm | str,
        spec: FunctionSpec,
        x: float | Sequence[float],
        eps: float,
        alpha: float = 0.5,
        points: Optional[Sequence[Sequence[float]]] = None,
        weights: Optional[Sequence[float]] = None,
        quad_tol: Optional[float] = None,
    ) -> OscillationResult:
        """
        Частные формы: Γ_ε (Σμ_i = 0, показатель α), Ω_ε (Σμ_i = Σμ_i a_i = 0,
        показатель 1) и сферическая M_ε (ω − δ₀, показатель α).
        """
        try:
            form = CorollaryForm(form)
        except ValueError as e:
            raise ConfigurationError(f"Неизвестная форма: {form!r}") from e
        dim = spec.dim
        if form == CorollaryForm.SPHERE:
            sigma = self._measures.make_named(MeasureName.SPHERE_MINUS_DELTA, dim)
            return self.theta_at(spec, sigma, x, eps, 0, alpha, quad_tol)

        sigma = self._measures.make_general(dim, points or (), weights or ())
        if form == CorollaryForm.OMEGA:
            self._measures.require_vanishing(sigma, 1, "Ω_ε требует Σμ_i a_i = 0")
            return self.theta_at(spec, sigma, x, eps, 0, 1.0, quad_tol)
        return self.theta_at(spec, sigma, x, eps, 0, alpha, quad_tol)

    # ------------------------------------------------------------------
    # Сетки
    # ------------------------------------------------------------------

    def theta_sweep(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        xs: Sequence[Any],
        eps_list: Sequence[float],
        m: int = 0,
        alpha: float = 1.0,
        quad_tol: Optional[float] = None,
        chunk_size: Optional[int] = None,
    ) -> pd.DataFrame:
        """
        Θ на сетке (x, ε) за один проход: панели между соседними ε
        интегрируются один раз и накапливаются.

        Returns:
            DataFrame со столбцами x, eps, value, error_estimate, evals
        """
        plan = self.plan(spec, sigma, eps_list, m, alpha, quad_tol)
        points = np.asarray(xs, dtype=float).reshape(-1, plan.f.dim)
        chunk_size = chunk_size or config.chunk_size
        chunks = [points[i:i + chunk_size] for i in range(0, len(points), chunk_size)]
        results = [plan.evaluate(chunk) for chunk in chunks]
        return sweep_frame(plan, chunks, results)

    def log_bound_constant(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        xs: Sequence[Any],
        eps_list: Sequence[float],
        m: int = 0,
        alpha: float = 1.0,
        quad_tol: Optional[float] = None,
    ) -> tuple[float, float]:
        """
        Константа C в |Θ_ε| ≤ C·log(1/ε) и наклон регрессии sup_x|Θ_ε| по log(1/ε).
        """
        frame = self.theta_sweep(spec, sigma, xs, [e for e in eps_list if e < 1], m, alpha, quad_tol)
        sups = frame.assign(abs_value=frame["value"].abs()).groupby("eps")["abs_value"].max()
        logs = np.log(1.0 / sups.index.to_numpy())
        constant = float(np.max(sups.to_numpy() / logs))
        slope = float(np.polyfit(logs, sups.to_numpy(), 1)[0]) if len(logs) >= 2 else 0.0
        self._logger.info(f"Логарифмическая оценка: C={constant:.4g}, наклон {slope:.4g}")
        return constant, slope


def sweep_frame(
    plan: OscillationPlan,
    chunks: list[np.ndarray],
    results: list[tuple[np.ndarray, np.ndarray]],
) -> pd.DataFrame:
    """Собирает результаты пачек в таблицу в порядке (x, ε)."""
    rows = []
    evals_per_point = plan.evaluations // max(sum(len(c) for c in chunks), 1)
    for chunk, (values, errors) in zip(chunks, results):
        for j, point in enumerate(chunk):
            for i, eps in enumerate(plan.levels):
                row = {"x": float(point[0])}
                for axis in range(1, len(point)):
                    row[f"x_{axis + 1}"] = float(point[axis])
                row.update(
                    eps=eps,
                    value=float(values[i, j]),
                    error_estimate=float(errors[i]),
                    evals=int(evals_per_point),
                )
                rows.append(row)
    return pd.DataFrame(rows)
