import math
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..config import config
from ..errors import PreconditionError, UnsupportedDimensionError
from ..functions import BaseFunction, build_function
from ..models import FunctionSpec, KernelPropertyReport, SignedMeasure
from ..numerics.quadrature import dyadic_edges, limit_for_budget, quad_checked
from .logger_service import LoggerService, default_logger
from .measure_service import MeasureService
from .oscillation_service import OscillationService

# Точек логарифмической сетки на [10⁻⁶M, M]
GRID_POINTS = 200
GRID_FLOOR = 1e-6
# Сдвиг узлов сетки с абсцисс атомов, в долях M
COLLISION_SHIFT = 1e-12
# Раздутие M при атоме на границе носителя: носитель должен лежать в (−M, M)
SUPPORT_INFLATION = 1e-9
# Узлов сетки сдвигов y для A₂
SHIFT_POINTS = 40
FD_STEP = 1e-6


class KernelService:
    """
    Ядра K_ε и K₀ одномерной меры и их свойства Кальдерона–Зигмунда.

    K_ε(t) = (1/t)·∫_{−t/ε}^{−t} σ[s, ∞) ds, K₀(t) = (1/t)·∫_{−sign(t)M}^{−t} σ[s, ∞) ds.
    Хвостовая функция σ[s, ∞) ступенчатая, поэтому t·K₀(t) кусочно-линейна
    и все интегралы от ядра берутся точно.
    """

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
        self._measures: MeasureService = self._oscillation.measures
        self._logger = logger or default_logger

    # ------------------------------------------------------------------
    # Ядра
    # ------------------------------------------------------------------

    @staticmethod
    def _require_line(sigma: SignedMeasure) -> None:
        if sigma.dim != 1:
            raise UnsupportedDimensionError(f"Ядра строятся только при d=1, получено d={sigma.dim}")
        if sigma.sphere is not None:
            raise PreconditionError("Одномерная мера должна быть задана атомами")

    @staticmethod
    def effective_radius(sigma: SignedMeasure) -> float:
        """M, слегка увеличенный, если атом лежит ровно на |a| = M."""
        radius = sigma.radius
        points = np.abs(sigma.points_array()[:, 0])
        if points.size and float(np.max(points)) >= radius:
            return radius * (1.0 + SUPPORT_INFLATION)
        return radius

    @staticmethod
    def _as_nonzero(t) -> tuple[np.ndarray, bool]:
        values = np.asarray(t, dtype=float)
        if np.any(values == 0):
            raise PreconditionError("Ядро не определено при t = 0")
        return values, values.ndim == 0

    def _steps(self, sigma: SignedMeasure, s: np.ndarray) -> np.ndarray:
        """σ[s, ∞) для массива s (атом в s включается)."""
        points = sigma.points_array()[:, 0]
        return (points >= s[..., None]) @ sigma.weights_array()

    def k_zero(self, sigma: SignedMeasure, t) -> float | np.ndarray:
        """K₀(t); ноль при |t| ≥ M."""
        self._require_line(sigma)
        values, scalar = self._as_nonzero(t)
        radius = self.effective_radius(sigma)
        kernel = self._measures.integrate_cumulative(sigma, -np.sign(values) * radius, -values) / values
        kernel = np.where(np.abs(values) >= radius, 0.0, kernel)
        return float(kernel) if scalar else kernel

    def k_eps(self, sigma: SignedMeasure, eps: float, t) -> float | np.ndarray:
        """
        K_ε(t), 0 < ε < 1.

        За пределами носителя σ[s, ∞) = 0, поэтому нижний предел −t/ε
        прижимается к −sign(t)·M; при |t| ≥ εM это даёт в точности K₀(t).
        """
        self._require_line(sigma)
        if not 0 < eps < 1:
            raise PreconditionError(f"ε должно лежать в (0, 1): {eps}")
        values, scalar = self._as_nonzero(t)
        radius = self.effective_radius(sigma)
        lower = -values / eps
        lower = np.where(np.abs(lower) >= radius, -np.sign(values) * radius, lower)
        kernel = self._measures.integrate_cumulative(sigma, lower, -values) / values
        kernel = np.where(np.abs(values) >= radius, 0.0, kernel)
        return float(kernel) if scalar else kernel

    def dk_zero(self, sigma: SignedMeasure, t) -> float | np.ndarray:
        """∂_t K₀(t) = −K₀(t)/t − σ[−t, ∞)/t (вне абсцисс −a_i)."""
        self._require_line(sigma)
        values, scalar = self._as_nonzero(t)
        radius = self.effective_radius(sigma)
        kernel = np.asarray(self.k_zero(sigma, values))
        derivative = -(kernel + self._steps(sigma, -values)) / values
        derivative = np.where(np.abs(values) >= radius, 0.0, derivative)
        return float(derivative) if scalar else derivative

    def breakpoints(self, sigma: SignedMeasure) -> np.ndarray:
        """Изломы t·K₀: отражённые абсциссы атомов −a_i и ±M, без нуля."""
        radius = self.effective_radius(sigma)
        points = np.concatenate([-sigma.points_array()[:, 0], [-radius, radius]])
        return np.unique(points[points != 0])

    def _pieces(self, sigma: SignedMeasure, lo: float, hi: float) -> list[tuple[float, float, float, float]]:
        """Куски [p, q] ⊂ [lo, hi] с K₀(t) = A/t + B: список (p, q, A, B)."""
        inner = [p for p in self.breakpoints(sigma) if lo < p < hi]
        edges = [lo, *inner, hi]
        pieces = []
        for p, q in zip(edges[:-1], edges[1:]):
            middle = 0.5 * (p + q)
            slope = -float(self._steps(sigma, np.array(-middle)))
            if abs(middle) >= self.effective_radius(sigma):
                pieces.append((p, q, 0.0, 0.0))
                continue
            intercept = middle * float(self.k_zero(sigma, middle)) - slope * middle
            pieces.append((p, q, intercept, slope))
        return pieces

    def kernel_integral(self, sigma: SignedMeasure, lo: float, hi: float, absolute: bool = False) -> float:
        """
        Точный ∫_lo^hi K₀(t) dt (или ∫|K₀|) по отрезку, не содержащему нуля.

        На каждом куске K₀ = A/t + B, так что ∫ = A·log(q/p) + B·(q − p);
        для |K₀| кусок дополнительно делится в корне t = −A/B.
        """
        self._require_line(sigma)
        if lo > hi:
            return -self.kernel_integral(sigma, hi, lo, absolute)
        if lo <= 0 <= hi:
            raise PreconditionError(f"Отрезок [{lo}, {hi}] содержит особую точку t = 0")
        total = 0.0
        for p, q, intercept, slope in self._pieces(sigma, lo, hi):
            parts = [(p, q)]
            if absolute and slope != 0:
                root = -intercept / slope
                if p < root < q:
                    parts = [(p, root), (root, q)]
            for a, b in parts:
                value = intercept * math.log(b / a) + slope * (b - a)
                total += abs(value) if absolute else value
        return total

    # ------------------------------------------------------------------
    # Свойства ядра
    # ------------------------------------------------------------------

    def _positive_grid(self, sigma: SignedMeasure, count: int = GRID_POINTS) -> np.ndarray:
        radius = sigma.radius
        grid = np.geomspace(GRID_FLOOR * radius, radius, count)
        breaks = np.abs(self.breakpoints(sigma))
        return np.unique(np.concatenate([grid, breaks[breaks >= GRID_FLOOR * radius]]))

    def _pointwise_grid(self, sigma: SignedMeasure) -> np.ndarray:
        """Точки ±t сетки; узлы на абсциссах атомов заменяются парой сдвигов по обе стороны."""
        radius = sigma.radius
        shift = COLLISION_SHIFT * radius
        positive = self._positive_grid(sigma)
        breaks = np.abs(self.breakpoints(sigma))
        collides = np.isin(positive, breaks)
        positive = np.concatenate([positive[~collides], positive[collides] - shift, positive[collides] + shift])
        positive = positive[positive > 0]
        return np.concatenate([-positive[::-1], positive])

    def _cancellation_sup(self, sigma: SignedMeasure) -> float:
        """
        sup_{a<b} |∫_{a<|t|<b} K₀| по сетке.

        С интегралом C(g) = ∫_{g₀<|t|<g} K₀ по узлам сетки любая пара даёт
        C(b) − C(a), поэтому супремум равен max C − min C.
        """
        grid = self._positive_grid(sigma)
        steps = [
            self.kernel_integral(sigma, lo, hi) + self.kernel_integral(sigma, -hi, -lo)
            for lo, hi in zip(grid[:-1], grid[1:])
        ]
        cumulative = np.concatenate([[0.0], np.cumsum(steps)])
        return float(np.max(cumulative) - np.min(cumulative))

    def _size_integral_sup(self, sigma: SignedMeasure) -> float:
        """A₁ = sup_R ∫_{R≤|t|≤2R} |K₀|."""
        grid = self._positive_grid(sigma)
        radii = np.unique(np.concatenate([grid, grid / 2.0]))
        return max(
            self.kernel_integral(sigma, r, 2 * r, absolute=True)
            + self.kernel_integral(sigma, -2 * r, -r, absolute=True)
            for r in radii
        )

    def _smoothness_integral(self, sigma: SignedMeasure, y: float, quad_tol: float) -> float:
        """∫_{|x|≥2|y|} |K₀(x−y) − K₀(x)| dx; вне |x| < M + |y| подынтегральная функция равна нулю."""
        radius = self.effective_radius(sigma)
        breaks = self.breakpoints(sigma)
        kinks = np.concatenate([breaks, breaks + y])

        def integrand(x: float) -> float:
            return abs(float(self.k_zero(sigma, x - y)) - float(self.k_zero(sigma, x)))

        lo, hi = 2 * abs(y), radius + abs(y)
        if lo >= hi:
            return 0.0
        # Масштабы от |y| до M: геометрические узлы вместо слепого деления пополам
        scales = np.geomspace(lo, hi, 24)[1:-1]
        limit = limit_for_budget(self._oscillation.request_budget)
        total = 0.0
        for a, b in ((lo, hi), (-hi, -lo)):
            points = sorted({float(p) for p in np.concatenate([kinks, scales, -scales]) if a < p < b})
            value, _, _ = quad_checked(
                integrand, a, b, quad_tol / 4.0, limit, points=points, context={"y": y}
            )
            total += value
        return total

    def _derivative_check(self, sigma: SignedMeasure, grid: np.ndarray) -> float:
        """max |ЦРП − ∂_tK₀|·t²/(M‖σ‖) в точках сетки вдали от изломов."""
        breaks = self.breakpoints(sigma)
        delta = FD_STEP * np.abs(grid)
        distance = np.min(np.abs(grid[:, None] - breaks[None, :]), axis=1)
        mask = distance > 10 * delta
        if not np.any(mask):
            return 0.0
        t, step = grid[mask], delta[mask]
        central = (np.asarray(self.k_zero(sigma, t + step)) - np.asarray(self.k_zero(sigma, t - step))) / (2 * step)
        exact = np.asarray(self.dk_zero(sigma, t))
        scale = sigma.radius * float(sigma.total_variation)
        return float(np.max(np.abs(central - exact) * t ** 2 / scale))

    def matches_outside(self, sigma: SignedMeasure, eps_values: Sequence[float]) -> bool:
        """K_ε(t) = K₀(t) побитово во всех узлах сетки с |t| ≥ εM."""
        grid = self._pointwise_grid(sigma)
        radius = self.effective_radius(sigma)
        for eps in eps_values:
            outside = grid[np.abs(grid) > eps * radius * (1.0 + 1e-12)]
            if not np.array_equal(self.k_eps(sigma, eps, outside), self.k_zero(sigma, outside)):
                return False
        return True

    def kernel_report(self, sigma: SignedMeasure, quad_tol: Optional[float] = None) -> KernelPropertyReport:
        """
        Супремумы |t·K₀|, |t²·∂_tK₀|, сокращение и величины A₁, A₂, A₃.

        Флаги pass_* выставляются только для мер с занулёнными моментами
        порядка ≤ 1; иначе отчёт диагностический и флаги равны None.
        """
        self._require_line(sigma)
        quad_tol = config.quad_tol if quad_tol is None else quad_tol
        radius = sigma.radius
        total_variation = float(sigma.total_variation)

        grid = self._pointwise_grid(sigma)
        sup_tk0 = float(np.max(np.abs(grid * np.asarray(self.k_zero(sigma, grid)))))
        sup_t2dk0 = float(np.max(np.abs(grid ** 2 * np.asarray(self.dk_zero(sigma, grid)))))
        cancel_sup = self._cancellation_sup(sigma)
        size_sup = self._size_integral_sup(sigma)

        shifts = np.geomspace(GRID_FLOOR * radius, radius, SHIFT_POINTS)
        smooth_sup = max(
            self._smoothness_integral(sigma, float(y), quad_tol) for y in np.concatenate([shifts, -shifts])
        )
        check_error = self._derivative_check(sigma, grid)

        report = KernelPropertyReport(
            sup_tK0=sup_tk0,
            sup_t2dK0=sup_t2dk0,
            cancel_sup=cancel_sup,
            A1=size_sup,
            A2=smooth_sup,
            A3=cancel_sup,
            support_radius=radius,
            total_variation=total_variation,
            derivative_check_error=check_error,
        )
        if self._measures.check_vanishing(sigma, 1).passed:
            bound = radius * total_variation
            report.pass_size = sup_tk0 <= 2 * bound
            report.pass_smoothness = sup_t2dk0 <= 3 * bound
            report.pass_cancellation = cancel_sup <= 3 * bound
        else:
            self._logger.warning("Момент порядка 1 не занулён: отчёт о ядре только диагностический")

        self._logger.info(
            f"Ядро K₀: sup|tK₀|={sup_tk0:.4g}, sup|t²K₀′|={sup_t2dk0:.4g}, "
            f"сокращение {cancel_sup:.4g} при M‖σ‖={radius * total_variation:.4g}"
        )
        return report

    # ------------------------------------------------------------------
    # Свёртки
    # ------------------------------------------------------------------

    def prepare(self, spec: FunctionSpec, sigma: SignedMeasure) -> BaseFunction:
        self._require_line(sigma)
        f = build_function(spec)
        if f.dim != 1:
            raise UnsupportedDimensionError("Свёртки с ядром определены только при d=1")
        self._measures.require_vanishing(sigma, 1, "ядро Кальдерона–Зигмунда")
        return f

    def _integrate(
        self,
        integrand,
        lo: float,
        hi: float,
        kinks: Sequence[float],
        epsabs: float,
        context: dict,
    ) -> float:
        points = sorted({float(p) for p in kinks if lo < p < hi})
        value, _, _ = quad_checked(
            integrand, lo, hi, epsabs, limit_for_budget(self._oscillation.request_budget),
            points=points, context=context,
        )
        return value

    def truncated_transform(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        x: float,
        eps: float,
        quad_tol: Optional[float] = None,
    ) -> float:
        """
        ∫_{εM<|t|<M} K₀(t)·f′(x − t) dt.

        Панели делятся в изломах ядра, в изломах f′ (отражённых через x)
        и на диадических уровнях |t| = 2^{−j}M.
        """
        f = self.prepare(spec, sigma)
        quad_tol = config.quad_tol if quad_tol is None else quad_tol
        if not 0 < eps < 1:
            raise PreconditionError(f"ε должно лежать в (0, 1): {eps}")
        radius = self.effective_radius(sigma)

        def integrand(t: float) -> float:
            return float(self.k_zero(sigma, t)) * float(f.derivative(np.array([x - t]), 1)[0])

        levels = [e * radius for e in dyadic_edges(eps, 1.0)]
        kinks = [*self.breakpoints(sigma), *(x - p for p in f.breakpoints())]
        kinks += levels + [-level for level in levels]
        context = {"x": x, "eps": eps}
        positive = self._integrate(integrand, eps * radius, radius, kinks, quad_tol / 2.0, context)
        negative = self._integrate(integrand, -radius, -eps * radius, kinks, quad_tol / 2.0, context)
        return positive + negative

    def convolution(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        x: float,
        eps: float,
        quad_tol: Optional[float] = None,
    ) -> float:
        """∫ K_ε(t)·f′(x − t) dt по |t| < M (K_ε ограничено у нуля)."""
        f = self.prepare(spec, sigma)
        quad_tol = config.quad_tol if quad_tol is None else quad_tol
        radius = self.effective_radius(sigma)
        atoms = sigma.points_array()[:, 0]

        def integrand(t: float) -> float:
            if t == 0:
                return 0.0
            return float(self.k_eps(sigma, eps, t)) * float(f.derivative(np.array([x - t]), 1)[0])

        kinks = [0.0, eps * radius, -eps * radius, *self.breakpoints(sigma), *(-eps * atoms)]
        kinks += [x - p for p in f.breakpoints()]
        return self._integrate(integrand, -radius, radius, kinks, quad_tol, {"x": x, "eps": eps})

    def cz_comparison(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        x: float,
        eps: float,
        quad_tol: Optional[float] = None,
    ) -> float:
        """|Θ̃_ε^σ f(x) − ∫_{|t|>εM} K₀(t) f′(x−t) dt|."""
        theta = self._oscillation.theta_tilde(spec, sigma, x, eps, quad_tol).value
        return abs(theta - self.truncated_transform(spec, sigma, x, eps, quad_tol))

    def transform_table(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        xs: Sequence[float],
        eps_list: Sequence[float],
        quad_tol: Optional[float] = None,
    ) -> np.ndarray:
        """Усечённые преобразования на сетке, форма (len(eps_list), len(xs))."""
        return np.array(
            [[self.truncated_transform(spec, sigma, float(x), float(e), quad_tol) for x in xs] for e in eps_list]
        )

    def compare_frame(
        self,
        spec: FunctionSpec,
        sigma: SignedMeasure,
        xs: Sequence[float],
        eps_list: Sequence[float],
        quad_tol: Optional[float] = None,
        transforms: Optional[np.ndarray] = None,
    ) -> pd.DataFrame:
        """
        Таблица сравнения (x, eps, theta_tilde, transform, gap).

        Θ̃ считается одним проходом по сетке ε; готовая таблица
        transforms (из параллельного прогона) может быть передана извне.
        """
        self.prepare(spec, sigma)
        levels = sorted({float(e) for e in eps_list}, reverse=True)
        if any(not 0 < e < 1 for e in levels):
            raise PreconditionError(f"Все ε должны лежать в (0, 1): {levels}")
        sweep = self._oscillation.theta_sweep(spec, sigma, list(xs), levels, 0, 1.0, quad_tol)
        if transforms is None:
            transforms = self.transform_table(spec, sigma, xs, levels, quad_tol)
        row = {e: i for i, e in enumerate(levels)}
        column = {float(x): j for j, x in enumerate(xs)}
        frame = sweep[["x", "eps", "value"]].rename(columns={"value": "theta_tilde"})
        frame["transform"] = [
            transforms[row[float(e)], column[float(x)]] for x, e in zip(frame["x"], frame["eps"])
        ]
        frame["gap"] = (frame["theta_tilde"] - frame["transform"]).abs()
        return frame.reset_index(drop=True)
