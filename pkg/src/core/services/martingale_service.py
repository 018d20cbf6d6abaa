import math
import threading
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..config import config
from ..errors import BudgetExhaustedError, ConfigurationError, PreconditionError
from ..functions import BaseFunction, LacunaryFunction, build_function
from ..models import (
    DyadicCube,
    DyadicMartingale,
    FunctionSpec,
    LilMode,
    SamplePlan,
    SignedMeasure,
    moment_order,
)
from ..numerics.budget import EvaluationBudget
from ..numerics.quadrature import limit_for_budget, quad_vec_checked, tensor_rule
from ..numerics.spectral import MeasureTransform, SpectralIntegrator, tail_start
from .logger_service import LoggerService, default_logger
from .measure_service import MeasureService
from .oscillation_service import SPHERE_NODES, OscillationPlan, OscillationService

# Максимальное поколение по размерности
MAX_GENERATION = {1: 14, 2: 8, 3: 5}
# Порядки тензорного правила Гаусса–Лежандра для среднего по кубу
BASE_ORDER = 8
REFINED_ORDER = 16
# Предел числа геометрических панелей у h → 0
MAX_TAIL_PANELS = 400
# Панель отбрасывается, когда уровень ошибки округления превышает эту долю предыдущей панели
ROUNDING_SHARE = 1e-3
ROUNDING_FACTOR = 8.0


def cube_corners(n: int, dim: int, indices: np.ndarray) -> np.ndarray:
    """Левые нижние углы кубов поколения n по плоским индексам, форма (C, d)."""
    idx = np.unravel_index(np.asarray(indices, dtype=np.int64), (2 ** n,) * dim)
    return np.stack(idx, axis=-1).astype(float) * 2.0 ** -n


class MartingalePlan:
    """
    Подготовленное вычисление S_Q = ∫_0^1 ⨍_Q Δ_σ f(x,h) dx dh/h^{m+α+1}.

    Лакунарные ряды: интегралы G_k = ∫_0^1 σ̂(hω_k) h^{−q} dh считаются один раз,
    а среднее косинуса по кубу равно произведению sinc. Прочие функции: тензорный
    Гаусс–Лежандр по кубу и квадратура по u = log h с геометрическими панелями
    у h → 0, обрываемыми по мажоранте хвоста. Если панели тонут в ошибках
    округления раньше, остаток хвоста продолжается геометрически от последней
    надёжной панели.
    """

    def __init__(
        self,
        f: BaseFunction,
        sigma: SignedMeasure,
        m: int,
        alpha: float,
        quad_tol: float,
        n_max: int,
        vanishing_order: int,
        request_budget: int,
        budget: Optional[EvaluationBudget] = None,
        measures: Optional[MeasureService] = None,
    ):
        self.f = f
        self.sigma = sigma
        self.dim = sigma.dim
        self.m = m
        self.alpha = alpha
        self.exponent = m + alpha
        self.quad_tol = quad_tol
        self.n_max = n_max
        self.vanishing_order = vanishing_order
        self.budget = budget
        self.limit = limit_for_budget(request_budget)
        self.evaluations = 0
        self._lock = threading.Lock()
        self.spectral = isinstance(f, LacunaryFunction)
        # Показатель геометрического убывания вклада панелей у h → 0
        self.decay = min(vanishing_order + 1 - self.exponent, 1.0)
        if self.spectral:
            self._prepare_spectral()
        else:
            self.points, self.weights = (measures or MeasureService()).discretize(sigma, SPHERE_NODES)

    def _count(self, value: int) -> None:
        with self._lock:
            self.evaluations += int(value)

    # ------------------------------------------------------------------
    # Спектральный путь
    # ------------------------------------------------------------------

    def _prepare_spectral(self) -> None:
        full = self.f.terms(self.f.max_terms())
        q = self.exponent + 1.0
        side = 2.0 ** -self.n_max
        norms = full.norms
        sup_norms = np.max(np.abs(full.frequencies), axis=1)
        scale = norms * self.sigma.radius
        total_variation = float(self.sigma.total_variation)
        near = math.e / (self.vanishing_order + 2.0 - q)
        far = 1.0 / (q - 1.0)
        # В логарифмах: b^{k(m+α)} переполняется раньше, чем убывает амплитуда
        with np.errstate(divide="ignore"):
            log_bounds = (
                np.log(np.abs(full.amplitudes))
                + (q - 1.0) * np.log(scale)
                + np.log(np.minimum(1.0, 2.0 / (sup_norms * side)))
            )
        bounds = total_variation * (near + far) * np.exp(log_bounds)
        count = tail_start(bounds, self.quad_tol / 4.0)
        if count >= len(full):
            raise BudgetExhaustedError(
                "Хвост лакунарного ряда для S_Q не укладывается в допуск",
                {"n_max": self.n_max, "quad_tol": self.quad_tol},
            )
        count = max(count, 1)
        self.spectrum = full.truncated(count)
        self.truncation_bound = float(np.sum(bounds[count:]))

        amplitude_sum = float(np.sum(np.abs(self.spectrum.amplitudes)))
        panels = max(4, math.ceil(math.log2(float(np.max(self.spectrum.norms)) * self.sigma.radius + 2.0)) + 2)
        integrator = SpectralIntegrator(
            MeasureTransform(self.sigma, self.vanishing_order),
            self.exponent,
            epsabs=self.quad_tol / (4.0 * max(amplitude_sum, 1.0) * panels),
            limit=self.limit,
            budget=self.budget,
        )
        self.full_integrals, errors = integrator.full_integrals(self.spectrum)
        self.full_errors = errors * np.abs(self.spectrum.amplitudes)
        self._count(integrator.evaluations)

    def _spectral_values(self, n: int, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        side = 2.0 ** -n
        centers = cube_corners(n, self.dim, indices) + 0.5 * side
        # ⨍_Q cos(ω·x + φ) dx = Re(e^{i(ω·c+φ)}) · Π_j sinc(ω_j ℓ/2)
        factor = np.prod(np.sinc(self.spectrum.frequencies * side / (2.0 * np.pi)), axis=1)
        values = self.spectrum.combine(centers, factor * self.full_integrals)
        error = float(self.full_errors @ np.abs(factor)) + self.truncation_bound
        self._count(len(indices) * len(self.spectrum))
        return values, np.full(len(indices), error)

    # ------------------------------------------------------------------
    # Общий путь
    # ------------------------------------------------------------------

    def _averages(self, corners: np.ndarray, side: float, h: float, order: int) -> np.ndarray:
        nodes, node_weights = tensor_rule(order, self.dim)
        points = (corners[:, None, :] + side * nodes[None, :, :]).reshape(-1, self.dim)
        shifted = points[:, None, :] + h * self.points[None, :, :]
        values = self.f.evaluate(shifted.reshape(-1, self.dim)).reshape(len(points), len(self.weights))
        delta = (values @ self.weights).reshape(len(corners), len(node_weights))
        self._count(values.size)
        return delta @ node_weights

    def _choose_order(self, corners: np.ndarray, side: float) -> int:
        for h in (side / 2.0, 1.0):
            coarse = self._averages(corners, side, h, BASE_ORDER)
            fine = self._averages(corners, side, h, REFINED_ORDER)
            if float(np.max(np.abs(coarse - fine))) * h ** -self.exponent > self.quad_tol / 4.0:
                return REFINED_ORDER
        return BASE_ORDER

    def _rounding_level(self, corners: np.ndarray, side: float) -> float:
        """Оценка абсолютной ошибки округления в Δ_σ f на кубах."""
        offsets = np.array([-1.0, 0.0, 1.0]) * self.sigma.radius
        centers = corners + 0.5 * side
        probes = (centers[:, None, :] + offsets[None, :, None]).reshape(-1, self.dim)
        scale = float(np.max(np.abs(self.f.evaluate(probes)), initial=0.0))
        self._count(len(probes))
        return ROUNDING_FACTOR * np.finfo(float).eps * float(self.sigma.total_variation) * max(scale, 1.0)

    def _generic_values(self, n: int, indices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        side = 2.0 ** -n
        corners = cube_corners(n, self.dim, indices)
        order = self._choose_order(corners, side)
        exponent = self.exponent

        def integrand(u: float) -> np.ndarray:
            h = math.exp(u)
            if self.budget is not None:
                self.budget.consume(len(corners) * order ** self.dim * len(self.weights), {"generation": n})
            return self._averages(corners, side, h, order) * math.exp(-u * exponent)

        context = {"generation": n, "first_cube": int(indices[0])}
        split = side / 2.0
        values = np.zeros(len(corners))
        error = 0.0
        dyadic = [-j * math.log(2.0) for j in range(1, n + 1)]
        part, err, _ = quad_vec_checked(
            integrand, math.log(split), 0.0, self.quad_tol / 4.0, self.limit, points=dyadic, context=context
        )
        values += part
        error += err

        ratio_floor = 2.0 ** -self.decay
        rounding = self._rounding_level(corners, side)
        previous = None
        last_part = None
        observed = ratio_floor
        upper = split
        for j in range(MAX_TAIL_PANELS):
            lower = upper / 2.0
            # ∫ ε_machine·|f| h^{−q} dh по панели: ниже разность Δ_σ f неотличима от шума
            noise = rounding * (lower ** -exponent - upper ** -exponent) / exponent
            if previous is not None and noise > ROUNDING_SHARE * previous:
                tail = last_part * observed / (1.0 - observed)
                return values + tail, np.full(len(corners), error + noise)
            part, err, _ = quad_vec_checked(
                integrand, math.log(lower), math.log(upper), self.quad_tol / 16.0, self.limit, context=context
            )
            values += part
            error += err
            size = float(np.max(np.abs(part)))
            if previous is None or previous == 0.0:
                ratio = ratio_floor
            else:
                ratio = min(max(size / previous, ratio_floor), 0.95)
            majorant = size * ratio / (1.0 - ratio)
            if j >= 1 and size < self.quad_tol / 4.0 and majorant < self.quad_tol / 4.0:
                return values, np.full(len(corners), error + majorant)
            if previous is not None:
                observed = ratio
            previous = size
            last_part = part
            upper = lower
        raise BudgetExhaustedError(
            f"Хвост интеграла S_Q при h → 0 не сошёлся за {MAX_TAIL_PANELS} панелей", context
        )

    def cube_values(self, n: int, indices: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """S_Q для кубов поколения n с плоскими индексами indices."""
        indices = np.asarray(indices, dtype=np.int64)
        if self.spectral:
            return self._spectral_values(n, indices)
        return self._generic_values(n, indices)


class MartingaleService:
    """Сервис диадического мартингала S_n и его диагностик."""

    def __init__(
        self,
        oscillation_service: Optional[OscillationService] = None,
        logger: Optional[LoggerService] = None,
    ):
        """
        Инициализация сервиса.

        Args:
            oscillation_service: Сервис осцилляционных интегралов (опционально)
            logger: Сервис логов (опционально)
        """
        self._oscillation = oscillation_service or OscillationService()
        self._measures = self._oscillation.measures
        self._logger = logger or default_logger

    # ------------------------------------------------------------------
    # Построение
    # ------------------------------------------------------------------

    def plan(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        n_max: int,
        m: int,
        alpha: float,
        quad_tol: Optional[float] = None,
    ) -> MartingalePlan:
        """
        Проверяет предусловия и готовит вычисление S_Q до поколения n_max.

        Raises:
            PreconditionError: моменты σ не занулены, размерности не согласованы
                или 2^{n_max·d} кубов не укладываются в бюджет
        """
        quad_tol = config.quad_tol if quad_tol is None else quad_tol
        f = build_function(spec)
        if f.dim != sigma.dim:
            raise PreconditionError(f"Размерности не согласованы: f: {f.dim}, σ: {sigma.dim}")
        limit = MAX_GENERATION.get(sigma.dim)
        if limit is None or not 0 <= n_max <= limit:
            raise PreconditionError(
                f"Поколение n_max={n_max} вне допустимого диапазона для d={sigma.dim}",
                {"n_max": n_max, "limit": limit},
            )
        if m < 0 or not 0 < alpha <= 1:
            raise ConfigurationError(f"Некорректный класс гладкости: m={m}, α={alpha}")
        self._measures.require_vanishing(sigma, moment_order(m, alpha), "S_Q")
        return MartingalePlan(
            f, sigma, m, alpha, quad_tol, n_max,
            self._measures.vanishing_order(sigma),
            self._oscillation.request_budget,
            self._oscillation.budget,
            self._measures,
        )

    def s_value(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        cube: DyadicCube,
        m: int,
        alpha: float,
        quad_tol: Optional[float] = None,
    ) -> float:
        """S_Q для одного диадического куба."""
        plan = self.plan(spec, sigma, cube.generation, m, alpha, quad_tol)
        values, _ = plan.cube_values(cube.generation, [cube.flat_index])
        return float(values[0])

    @staticmethod
    def chunks(n: int, dim: int, chunk_size: int) -> list[np.ndarray]:
        """Плоские индексы кубов поколения n, разбитые на пачки фиксированного размера."""
        total = 2 ** (n * dim)
        return [np.arange(i, min(i + chunk_size, total)) for i in range(0, total, chunk_size)]

    def assemble(
        self,
        plan: MartingalePlan,
        spec: FunctionSpec,
        results: dict[int, list[tuple[np.ndarray, np.ndarray]]],
    ) -> DyadicMartingale:
        """Собирает таблицы поколений и считает дефект мартингального свойства."""
        martingale = DyadicMartingale(
            f=spec, sigma=plan.sigma, m=plan.m, alpha=plan.alpha, quad_tol=plan.quad_tol
        )
        for n, parts in sorted(results.items()):
            martingale.tables[n] = np.concatenate([values for values, _ in parts])
            martingale.errors[n] = np.concatenate([errors for _, errors in parts])
        dim = plan.dim
        for n in sorted(martingale.tables):
            if n == 0 or n - 1 not in martingale.tables:
                continue
            children = martingale.generation(n)
            # Среднее 2^d детей по каждому родителю
            shape = []
            for _ in range(dim):
                shape.extend([2 ** (n - 1), 2])
            grouped = children.reshape(shape)
            means = grouped.mean(axis=tuple(range(1, 2 * dim, 2)))
            martingale.defects[n] = float(np.max(np.abs(means.ravel() - martingale.tables[n - 1])))
        martingale.evaluations = plan.evaluations
        return martingale

    def build(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        n_max: int,
        m: int,
        alpha: float,
        quad_tol: Optional[float] = None,
        chunk_size: Optional[int] = None,
    ) -> DyadicMartingale:
        """
        Таблицы S_Q для поколений 0..n_max с диагностиками.

        Raises:
            BudgetExhaustedError: с указанием поколения и первого куба пачки
        """
        plan = self.plan(spec, sigma, n_max, m, alpha, quad_tol)
        chunk_size = chunk_size or config.chunk_size
        results = {
            n: [plan.cube_values(n, chunk) for chunk in self.chunks(n, plan.dim, chunk_size)]
            for n in range(n_max + 1)
        }
        martingale = self.assemble(plan, spec, results)
        self._logger.info(
            f"Мартингал построен до n={n_max}: дефект {martingale.martingale_defect:.3g}, "
            f"‖S‖_B={martingale.increment_norm:.4g}"
        )
        return martingale

    # ------------------------------------------------------------------
    # Диагностики
    # ------------------------------------------------------------------

    @staticmethod
    def adjacent_increment_sup(martingale: DyadicMartingale, n: int) -> float:
        """max |S_Q − S_Q′| по соседним (с общей гранью) кубам поколения n."""
        if n not in martingale.tables:
            raise PreconditionError(f"Поколение {n} не построено (n_max={martingale.n_max})")
        table = martingale.generation(n)
        best = 0.0
        for axis in range(martingale.dim):
            if table.shape[axis] > 1:
                best = max(best, float(np.max(np.abs(np.diff(table, axis=axis)))))
        return best

    @staticmethod
    def default_samples(n: int, dim: int, seed: Optional[int] = None) -> np.ndarray:
        """Центры кубов поколения n плюс 8 равномерных точек в каждом (фиксированное зерно)."""
        rng = np.random.default_rng(config.seed if seed is None else seed)
        total = 2 ** (n * dim)
        corners = cube_corners(n, dim, np.arange(total))
        side = 2.0 ** -n
        centers = corners + 0.5 * side
        random_points = corners[:, None, :] + side * rng.random((total, 8, dim))
        return np.concatenate([centers, random_points.reshape(-1, dim)])

    def comparison_plan(self, martingale: DyadicMartingale, generations: Sequence[int]) -> OscillationPlan:
        """Θ-план на уровнях ε = 2^{−n−2} для поколений generations."""
        for n in generations:
            if n not in martingale.tables:
                raise PreconditionError(f"Поколение {n} не построено (n_max={martingale.n_max})")
        levels = [2.0 ** (-n - 2) for n in generations]
        return self._oscillation.plan(
            martingale.f, martingale.sigma, levels, martingale.m, martingale.alpha, martingale.quad_tol
        )

    @staticmethod
    def gaps_from_thetas(
        martingale: DyadicMartingale,
        plan: OscillationPlan,
        generations: Sequence[int],
        xs: np.ndarray,
        thetas: np.ndarray,
    ) -> dict[int, float]:
        """sup_x |S_n(x) − Θ_{2^{−n−2}}(x)| по готовой таблице Θ (уровни × точки)."""
        gaps = {}
        for n in sorted(set(generations)):
            row = plan.levels.index(2.0 ** (-n - 2))
            gaps[n] = float(np.max(np.abs(martingale.values_at(xs, n) - thetas[row])))
        return gaps

    def comparison_gaps(
        self,
        martingale: DyadicMartingale,
        generations: Sequence[int],
        x_samples: Optional[np.ndarray] = None,
    ) -> dict[int, float]:
        """
        sup_x |S_n(x) − Θ_ε^σ f(x)| при ε = 2^{−n−2} для каждого поколения.

        Все уровни ε считаются одним проходом.
        """
        generations = sorted(set(generations))
        plan = self.comparison_plan(martingale, generations)
        if x_samples is None:
            x_samples = self.default_samples(max(generations), martingale.dim)
        xs = np.asarray(x_samples, dtype=float).reshape(-1, martingale.dim)
        chunk = config.chunk_size
        thetas = np.concatenate(
            [plan.evaluate(xs[i:i + chunk])[0] for i in range(0, len(xs), chunk)], axis=1
        )
        return self.gaps_from_thetas(martingale, plan, generations, xs, thetas)

    def comparison_gap(
        self, martingale: DyadicMartingale, n: int, x_samples: Optional[np.ndarray] = None
    ) -> float:
        """sup_x |S_n(x) − Θ_{2^{−n−2}} f(x)|."""
        return self.comparison_gaps(martingale, [n], x_samples)[n]

    @staticmethod
    def lil_ratio(values: pd.DataFrame, mode: LilMode | str, column: str = "value") -> pd.DataFrame:
        """
        Отношения закона повторного логарифма по строкам (x, n, <column>).

        martingale: |S_n(x)|/√(n·log log n), n ≥ 3;
        theta: |Θ_ε(x)|/√(log(1/ε)·log log log(1/ε)), ε = 2^{−n}, n ≥ 4.
        Добавляет столбцы eps, ratio и running_max (накопленный максимум по n для каждого x).
        Без столбца eps он заполняется как 2^{−n−2} (martingale) или 2^{−n} (theta).

        Raises:
            PreconditionError: строки вне области определения нормировки
        """
        mode = LilMode(mode)
        frame = values.copy()
        n = frame["n"].to_numpy(dtype=float)
        if mode == LilMode.MARTINGALE:
            # log log n > 0 при n ≥ 3
            if np.any(n < 3):
                raise PreconditionError("Режим martingale требует n ≥ 3", {"min_n": float(n.min())})
            if "eps" not in frame:
                frame["eps"] = 2.0 ** -(n + 2)
            normalizer = np.sqrt(n * np.log(np.log(n)))
        else:
            if "eps" not in frame:
                frame["eps"] = 2.0 ** -n
            log_inv = -np.log(frame["eps"].to_numpy(dtype=float))
            # log log log(1/ε) > 0 при ε < e^{−e}, то есть n ≥ 4 для ε = 2^{−n}
            if np.any(log_inv <= math.e):
                raise PreconditionError(
                    "Режим theta требует ε < e^{−e} (n ≥ 4 при ε = 2^{−n})",
                    {"max_eps": float(frame["eps"].max())},
                )
            normalizer = np.sqrt(log_inv * np.log(np.log(log_inv)))
        frame["ratio"] = np.abs(frame[column].to_numpy(dtype=float)) / normalizer
        keys = [c for c in frame.columns if c == "x" or c.startswith("x_")]
        frame = frame.sort_values(keys + ["n"], kind="stable").reset_index(drop=True)
        frame["running_max"] = frame.groupby(keys, sort=False)["ratio"].cummax()
        return frame

    # ------------------------------------------------------------------
    # Оценки по кубам и парам точек
    # ------------------------------------------------------------------

    def cube_integral(self, spec: FunctionSpec, sigma: SignedMeasure, cube: DyadicCube, h: float) -> float:
        """∫_Q Δ_σ f(x, h) dx (замкнутая форма для лакунарных рядов, иначе Гаусс–Лежандр 16)."""
        f = build_function(spec)
        if f.dim != sigma.dim or cube.dim != f.dim:
            raise PreconditionError("Размерности функции, меры и куба не согласованы")
        volume = cube.side ** cube.dim
        spectrum = f.spectrum()
        if spectrum is not None:
            factor = np.prod(np.sinc(spectrum.frequencies * cube.side / (2.0 * np.pi)), axis=1)
            transform = MeasureTransform(sigma, self._measures.vanishing_order(sigma))
            coefficients = factor * transform(h * spectrum.frequencies)
            return volume * float(spectrum.combine(cube.center[None, :], coefficients)[0])
        nodes, weights = tensor_rule(REFINED_ORDER, cube.dim)
        points = cube.corner[None, :] + cube.side * nodes
        delta = self._oscillation.delta_sigma(spec, sigma, points, h)
        return volume * float(np.asarray(delta) @ weights)

    def scaling_slope(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        cube: DyadicCube,
        hs: Optional[Sequence[float]] = None,
    ) -> float:
        """Наклон log|∫_Q Δ_σ f| по log h при h < ℓ(Q)/2."""
        if hs is None:
            hs = [cube.side * 2.0 ** -j for j in range(2, 13)]
        hs = np.asarray([h for h in hs if h < cube.side / 2.0], dtype=float)
        if hs.size < 2:
            raise ConfigurationError("Для наклона нужно не меньше двух h < ℓ(Q)/2")
        integrals = np.abs([self.cube_integral(spec, sigma, cube, float(h)) for h in hs])
        significant = integrals > 1e-300
        if np.count_nonzero(significant) < 2:
            return math.inf
        return float(np.polyfit(np.log(hs[significant]), np.log(integrals[significant]), 1)[0])

    def pair_regularity_sup(
        self, spec: FunctionSpec, sigma: SignedMeasure, m: int, alpha: float, plan: SamplePlan
    ) -> float:
        """
        sup |Δ_σ f(x,h) − Δ_σ f(t,h)| по парам |x − t| ≥ h, нормированный на
        |x−t|^α·h^m при α < 1 и на h^{m+1}·log(|x−t|/h + 1) при α = 1.
        """
        if plan.is_empty:
            raise ConfigurationError("План выборки пуст")
        xs = plan.x_points.reshape(-1, sigma.dim)
        distances = np.linalg.norm(xs[:, None, :] - xs[None, :, :], axis=-1)
        best = 0.0
        for h in plan.h_values:
            delta = np.asarray(self._oscillation.delta_sigma(spec, sigma, xs, float(h)))
            differences = np.abs(delta[:, None] - delta[None, :])
            mask = distances >= h
            if not np.any(mask):
                continue
            if alpha < 1:
                normalizer = distances[mask] ** alpha * h ** m
            else:
                normalizer = h ** (m + 1) * np.log(distances[mask] / h + 1.0)
            best = max(best, float(np.max(differences[mask] / normalizer)))
        return best

    @staticmethod
    def bounded_fraction(martingale: DyadicMartingale, threshold: float) -> float:
        """Доля кубов последнего поколения, на которых max_n |S_n| ≤ threshold."""
        finest = martingale.n_max
        dim = martingale.dim
        running = np.zeros((2 ** finest,) * dim)
        for n in range(finest + 1):
            table = np.abs(martingale.generation(n))
            for axis in range(dim):
                table = np.repeat(table, 2 ** (finest - n), axis=axis)
            running = np.maximum(running, table)
        return float(np.mean(running <= threshold))

    def martingale_table(
        self, martingale: DyadicMartingale, gaps: Optional[dict[int, float]] = None
    ) -> pd.DataFrame:
        """Таблица (n, cube_index, S, increment, adjacent_max, comparison_gap)."""
        increments = martingale.increments()
        frames = []
        for n in sorted(martingale.tables):
            values = martingale.tables[n]
            frames.append(
                pd.DataFrame(
                    {
                        "n": n,
                        "cube_index": np.arange(values.size),
                        "S": values,
                        "increment": increments.get(n, np.full(values.size, np.nan)),
                        "adjacent_max": self.adjacent_increment_sup(martingale, n),
                        "comparison_gap": (gaps or {}).get(n, np.nan),
                    }
                )
            )
        return pd.concat(frames, ignore_index=True)
