import math
from fractions import Fraction
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np
import pandas as pd

from ..config import config
from ..errors import ConfigurationError, PreconditionError
from ..models import FunctionKind, FunctionSpec, LilMode, MeasureName, SharpnessConfig, SignedMeasure
from ..numerics.quadrature import quad_checked
from .logger_service import LoggerService, default_logger
from .martingale_service import MartingaleService
from .oscillation_service import OscillationPlan, OscillationService

# Членов ряда Тейлора (1 − cos t)/t² на [0, 1]
SERIES_TERMS = 20


def _series_integral(lo: float, hi: float) -> float:
    """∫_lo^hi (1 − cos t)/t² dt при 0 ≤ lo ≤ hi ≤ 1 почленно по ряду Тейлора."""
    total = 0.0
    for j in range(1, SERIES_TERMS + 1):
        power = 2 * j - 1
        total += (-1) ** (j + 1) * (hi ** power - lo ** power) / (power * math.factorial(2 * j))
    return total


@lru_cache(maxsize=4096)
def _cosine_tail(a: float, quad_tol: float) -> float:
    """∫_a^∞ cos t / t² dt при a ≥ 1 (QUADPACK QAWF); при 2/a² ≤ quad_tol/8 хвост отбрасывается."""
    if 2.0 / a ** 2 <= quad_tol / 8.0:
        return 0.0
    value, _, _ = quad_checked(
        lambda t: 1.0 / t ** 2, a, np.inf, quad_tol / 8.0, weight="cos", wvar=1.0, context={"a": a}
    )
    return value


def one_minus_cos_integral(lo: float, hi: float, quad_tol: float) -> float:
    """∫_lo^hi (1 − cos t)/t² dt, 0 ≤ lo ≤ hi; у нуля подынтегральная функция доопределена значением 1/2."""
    total = 0.0
    if lo < 1.0:
        total += _series_integral(lo, min(hi, 1.0))
    if hi > 1.0:
        a = max(lo, 1.0)
        # ∫_a^b dt/t² − ∫_a^b cos t/t² dt
        total += (1.0 / a - 1.0 / hi) - (_cosine_tail(a, quad_tol) - _cosine_tail(hi, quad_tol))
    return total


class SharpnessService:
    """
    Конструкция точности оценки для класса Зигмунда.

    f(x) = Σ_{k≥1} b^{−k} cos(b^k x), Υ_ε f = Θ_ε^σ f с σ = δ₁ + δ₋₁ − 2δ₀ и
    показателем 1; почленно Υ_ε f(x) = Σ a_k(ε) cos(b^k x),
    a_k(ε) = −2∫_{b^kε}^{b^k} (1 − cos t)/t² dt.
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
        self._logger = logger or default_logger
        self._sym2: Optional[SignedMeasure] = None

    @staticmethod
    def series_spec(b: float, eval_tol: Optional[float] = None) -> FunctionSpec:
        return FunctionSpec(
            kind=FunctionKind.ZYGMUND_WEIERSTRASS,
            b=float(b),
            eval_tol=config.eval_tol if eval_tol is None else eval_tol,
        )

    @property
    def sym2(self) -> SignedMeasure:
        if self._sym2 is None:
            self._sym2 = self._oscillation.measures.make_named(MeasureName.SYM2, 1)
        return self._sym2

    # ------------------------------------------------------------------
    # Коэффициенты
    # ------------------------------------------------------------------

    @staticmethod
    def a_coeff(b: float, k: int, eps: float, quad_tol: Optional[float] = None) -> float:
        """
        a_k(ε) = −2∫_{b^kε}^{b^k} (1 − cos t)/t² dt; ε = 0 допустимо (несобственный интеграл).

        При ε ≥ 1 отрезок пуст и коэффициент равен нулю. Предел a_k(0) при k → ∞
        равен −π: знак отрицательный.
        """
        if k < 1:
            raise ConfigurationError(f"Индекс коэффициента должен быть ≥ 1: {k}")
        if eps < 0:
            raise ConfigurationError(f"ε должно быть неотрицательным: {eps}")
        if eps >= 1:
            return 0.0
        quad_tol = config.quad_tol if quad_tol is None else quad_tol
        top = float(b) ** k
        return -2.0 * one_minus_cos_integral(top * eps, top, quad_tol)

    @staticmethod
    def n_of_eps(b: float, eps: float) -> int:
        """
        N(ε): наименьшее n с ε·bⁿ ≥ 1.

        Оценка через логарифм уточняется точным сравнением в рациональных числах.
        """
        if not 0 < eps <= 1:
            raise PreconditionError(f"ε должно лежать в (0, 1]: {eps}")
        base, level = Fraction(b), Fraction(eps)
        n = max(0, math.ceil(math.log(1.0 / eps) / math.log(b)))
        while n > 0 and level * base ** (n - 1) >= 1:
            n -= 1
        while level * base ** n < 1:
            n += 1
        return n

    def coefficient_cutoff(self, b: float, eps: float, tol: float) -> int:
        """Индекс K с хвостом Σ_{k>K}|a_k(ε)| ≤ tol, исходя из |a_k(ε)| ≤ 4/(b^k ε)."""
        n = self.n_of_eps(b, eps)
        k = max(n, 1)
        while 4.0 / (eps * float(b) ** k * (float(b) - 1.0)) > tol:
            k += 1
        return k

    def partial_sum(self, b: float, x, eps: float, quad_tol: Optional[float] = None) -> np.ndarray:
        """Σ_{k=1}^{N(ε)} a_k(0) cos(b^k x)."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        total = np.zeros_like(xs)
        for k in range(1, self.n_of_eps(b, eps) + 1):
            total += self.a_coeff(b, k, 0.0, quad_tol) * np.cos(float(b) ** k * xs)
        return total

    def coefficient_side(self, b: float, x, eps: float, quad_tol: Optional[float] = None) -> np.ndarray:
        """Σ_k a_k(ε) cos(b^k x), обрезанная по хвосту eval_tol."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        total = np.zeros_like(xs)
        if eps >= 1:
            return total
        for k in range(1, self.coefficient_cutoff(b, eps, config.eval_tol) + 1):
            total += self.a_coeff(b, k, eps, quad_tol) * np.cos(float(b) ** k * xs)
        return total

    # ------------------------------------------------------------------
    # Υ_ε
    # ------------------------------------------------------------------

    def plan(
        self,
        b: float,
        eps_list: Sequence[float],
        quad_tol: Optional[float] = None,
        function: Optional[FunctionSpec] = None,
    ) -> OscillationPlan:
        """Θ-план для Υ на уровнях ε (показатель 1, σ = sym2)."""
        spec = function or self.series_spec(b)
        return self._oscillation.plan(spec, self.sym2, eps_list, 0, 1.0, quad_tol)

    def upsilon(self, b: float, x: float, eps: float, quad_tol: Optional[float] = None) -> float:
        """Υ_ε f(x); при ε ≥ 1 интеграл пуст и равен нулю."""
        if eps >= 1:
            return 0.0
        return float(self.upsilon_grid(b, [x], [eps], quad_tol)[0, 0])

    def upsilon_grid(
        self,
        b: float,
        xs: Sequence[float],
        eps_list: Sequence[float],
        quad_tol: Optional[float] = None,
        function: Optional[FunctionSpec] = None,
    ) -> np.ndarray:
        """Υ на сетке за один проход; строки по ε (по убыванию), столбцы по x."""
        plan = self.plan(b, eps_list, quad_tol, function)
        points = np.asarray(xs, dtype=float).reshape(-1, 1)
        chunk = config.chunk_size
        return np.concatenate(
            [plan.evaluate(points[i:i + chunk])[0] for i in range(0, len(points), chunk)], axis=1
        )

    def lacunary_gap(self, b: float, x, eps: float, quad_tol: Optional[float] = None) -> np.ndarray:
        """|Υ_ε f(x) − Σ_{k≤N(ε)} a_k(0) cos(b^k x)|."""
        xs = np.atleast_1d(np.asarray(x, dtype=float))
        if eps >= 1:
            upsilon = np.zeros_like(xs)
        else:
            upsilon = self.upsilon_grid(b, xs, [eps], quad_tol)[0]
        return np.abs(upsilon - self.partial_sum(b, xs, eps, quad_tol))

    # ------------------------------------------------------------------
    # Эксперимент с нижней оценкой
    # ------------------------------------------------------------------

    def lil_lower_experiment(
        self, cfg: SharpnessConfig, values: Optional[np.ndarray] = None
    ) -> tuple[pd.DataFrame, dict[str, float]]:
        """
        Таблица (x, n, eps, upsilon, partial_sum, gap, ratio, running_max) и сводка.

        ratio = |Υ_ε|/√(log(1/ε)·log log log(1/ε)), n = log₂(1/ε). Доля x,
        у которых накопленный максимум на самом мелком ε строго больше θ₀
        (по умолчанию половина медианы), идёт в сводку вместе с максимумом
        и медианой по ε от sup_x gap. values (форма ε × x) можно передать из
        параллельного прогона.

        Raises:
            PreconditionError: ε ≥ e^{−e}
        """
        levels = cfg.eps_list
        if any(eps >= math.exp(-math.e) for eps in levels):
            raise PreconditionError("Эксперимент требует ε < e^{−e}", {"max_eps": levels[0]})
        xs = np.asarray(cfg.x_samples, dtype=float)
        if values is None:
            values = self.upsilon_grid(cfg.b, xs, levels, cfg.quad_tol, cfg.function)

        rows = []
        for i, eps in enumerate(levels):
            if cfg.function is None:
                partial = self.partial_sum(cfg.b, xs, eps, cfg.quad_tol)
            else:
                partial = np.full(xs.size, np.nan)
            for j, x in enumerate(xs):
                rows.append(
                    {
                        "x": x,
                        "n": -math.log2(eps),
                        "eps": eps,
                        "value": values[i, j],
                        "partial_sum": partial[j],
                    }
                )
        frame = MartingaleService.lil_ratio(pd.DataFrame(rows), LilMode.THETA)
        frame = frame.rename(columns={"value": "upsilon"})
        frame["gap"] = (frame["upsilon"] - frame["partial_sum"]).abs()
        frame = frame[["x", "n", "eps", "upsilon", "partial_sum", "gap", "ratio", "running_max"]]

        finals = frame.groupby("x", sort=False)["running_max"].last().to_numpy()
        theta0 = cfg.theta0 if cfg.theta0 is not None else 0.5 * float(np.median(finals))
        fraction = float(np.mean(finals > theta0))
        gaps = frame.groupby("eps")["gap"].max()
        summary = {
            "theta0": theta0,
            "fraction_above": fraction,
            "max_gap": float(gaps.max()),
            "median_gap": float(gaps.median()),
        }
        self._logger.info(
            f"Нижняя оценка (b={cfg.b:g}): доля x выше θ₀={theta0:.4g}: {fraction:.3f}, "
            f"max gap {summary['max_gap']:.4g}"
        )
        return frame, summary
