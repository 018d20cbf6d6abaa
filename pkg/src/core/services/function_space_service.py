import json
import math
from pathlib import Path
from typing import Any, Optional

import numpy as np
from scipy import optimize

from ..config import config
from ..errors import ConfigurationError, PreconditionError, UnsupportedDimensionError
from ..functions import BaseFunction, HatFunction, build_function
from ..models import FunctionKind, FunctionSpec, MembershipReport, SamplePlan, moment_order
from ..numerics.spectral import LacunarySpectrum
from .logger_service import LoggerService, default_logger

# Поля дескриптора функции, передаваемые в FunctionSpec
_DESCRIPTOR_FIELDS = {
    "kind", "dim", "b", "alpha", "order", "coeffs", "center", "width", "grid", "values",
    "direction", "scale", "declared_m", "declared_alpha", "eval_tol",
}
_TUPLE_FIELDS = ("coeffs", "center", "grid", "values", "direction")
# Точек сетки при поиске sup |f′|
DERIVATIVE_SAMPLES = 4097


class FunctionSpaceService:
    """Сервис тестовых функций и эмпирических проверок классов гладкости."""

    def __init__(
        self,
        logger: Optional[LoggerService] = None,
        slope_slack: Optional[float] = None,
        ratio_slack: Optional[float] = None,
    ):
        """
        Инициализация сервиса.

        Args:
            logger: Сервис логов (опционально)
            slope_slack: Допуск на наклон регрессии (по умолчанию из конфигурации)
            ratio_slack: Допуск на разброс отношений (по умолчанию из конфигурации)
        """
        self._logger = logger or default_logger
        self.slope_slack = config.slope_slack if slope_slack is None else slope_slack
        self.ratio_slack = config.ratio_slack if ratio_slack is None else ratio_slack

    @staticmethod
    def function(spec: FunctionSpec) -> BaseFunction:
        return build_function(spec)

    def eval(self, spec: FunctionSpec, x) -> np.ndarray:
        """Значение функции с точностью eval_tol."""
        return build_function(spec).evaluate(x)

    def eval_derivative(self, spec: FunctionSpec, x, order: int) -> np.ndarray:
        """Производная порядка order (почленно для лакунарных рядов, точно для многочленов)."""
        return build_function(spec).derivative(x, order)

    def spectrum(self, spec: FunctionSpec, tol: Optional[float] = None) -> Optional[LacunarySpectrum]:
        """Косинусный спектр лакунарного ряда, усечённый по хвосту ≤ tol; None для прочих видов."""
        return build_function(spec).spectrum(tol)

    # ------------------------------------------------------------------
    # Разностные отношения
    # ------------------------------------------------------------------

    @staticmethod
    def _plan_points(plan: SamplePlan, dim: int) -> np.ndarray:
        if plan.is_empty:
            raise ConfigurationError("План выборки пуст")
        return plan.x_points.reshape(-1, dim)

    def estimate_seminorm(
        self, spec: FunctionSpec, m: int, alpha: float, plan: SamplePlan, lipschitz: bool = False
    ) -> float:
        """
        Нижняя оценка полунормы по плану выборки.

        При α < 1 (или lipschitz=True) берётся max |f(x+h) − f(x)|/h^α,
        при α = 1 симметричная вторая разность |f(x+h) + f(x−h) − 2f(x)|/h.

        Raises:
            ConfigurationError: пустой план, m ≠ 0 или α вне (0, 1]
        """
        if m != 0:
            raise ConfigurationError("Прямые полунормы определены только при m = 0")
        if not 0 < alpha <= 1:
            raise ConfigurationError(f"Показатель α должен лежать в (0, 1]: {alpha}")
        f = build_function(spec)
        points = self._plan_points(plan, f.dim)
        base = f.evaluate(points)
        best = 0.0
        for axis in range(f.dim):
            shift = np.zeros(f.dim)
            shift[axis] = 1.0
            for h in plan.h_values:
                forward = f.evaluate(points + h * shift)
                if alpha < 1 or lipschitz:
                    quotient = np.abs(forward - base) / h ** alpha
                else:
                    backward = f.evaluate(points - h * shift)
                    quotient = np.abs(forward + backward - 2.0 * base) / h
                best = max(best, float(np.max(quotient)))
        return best

    def classical_difference(self, f: BaseFunction, points: np.ndarray, h: float, ell: int) -> np.ndarray:
        """Δ_ℓ f(x, h) = Σ_j (−1)^{ℓ+j} C(ℓ, j) f(x + jh) вдоль первой оси."""
        shift = np.zeros(f.dim)
        shift[0] = h
        total = np.zeros(len(points))
        for j in range(ell + 1):
            total += (-1) ** (ell + j) * math.comb(ell, j) * f.evaluate(points + j * shift)
        return total

    def membership_check(
        self,
        spec: FunctionSpec,
        m: int,
        alpha: float,
        ell: int,
        probe: Optional[SamplePlan] = None,
    ) -> MembershipReport:
        """
        Эмпирическая проверка |Δ_ℓ f(x,h)| ≤ C h^{m+α}.

        Проходит, если наклон регрессии log sup_x|Δ_ℓ f| по log h не меньше
        m+α − slope_slack и отношения на мелкой половине сетки h не превосходят
        ratio_slack медиан. Разности ниже шумового порога вычислений
        считаются нулевыми.

        Raises:
            PreconditionError: если ℓ ≤ [m+α]
        """
        if ell <= moment_order(m, alpha):
            raise PreconditionError(
                f"Порядок разности ℓ={ell} должен превышать [m+α]={moment_order(m, alpha)}",
                {"m": m, "alpha": alpha, "ell": ell},
            )
        f = build_function(spec)
        probe = probe or SamplePlan.standard(f.dim)
        points = self._plan_points(probe, f.dim)
        h_values = np.sort(probe.h_values)[::-1]
        exponent = m + alpha

        values = f.evaluate(points)
        noise = 2 ** ell * (spec.eval_tol * abs(f.scale) + 1e-13 * float(np.max(np.abs(values), initial=1.0)))
        sups = np.array(
            [float(np.max(np.abs(self.classical_difference(f, points, h, ell)))) for h in h_values]
        )
        ratios = sups / h_values ** exponent

        significant = sups > noise
        if np.count_nonzero(significant) >= 2:
            slope = float(np.polyfit(np.log(h_values[significant]), np.log(sups[significant]), 1)[0])
        else:
            slope = math.inf

        median = float(np.median(ratios))
        # Ограниченность проверяется при h → 0: мелкая половина сетки
        fine = ratios[len(ratios) // 2:]
        bounded = not np.any(significant) or float(np.max(fine)) <= self.ratio_slack * median
        passed = slope >= exponent - self.slope_slack and bounded

        self._logger.info(
            f"Проверка класса C^{{{m},{alpha:g}}} для {spec.kind.value} (ℓ={ell}): "
            f"наклон {slope:.3f}, sup отношений {float(np.max(ratios)):.4g}; "
            f"{'пройдена' if passed else 'не пройдена'}"
        )
        return MembershipReport(
            ratio_sup=float(np.max(ratios)),
            exponent_fit=slope,
            passed=bool(passed),
            h_values=h_values.tolist(),
            ratios=ratios.tolist(),
        )

    def sup_derivative(self, spec: FunctionSpec, lo: float, hi: float) -> float:
        """
        ‖f′‖_∞ на [lo, hi] (d = 1).

        Для hat замкнутая форма, иначе плотная сетка с уточнением максимума
        ограниченной одномерной оптимизацией.
        """
        f = build_function(spec)
        if f.dim != 1:
            raise UnsupportedDimensionError("sup |f′| вычисляется только при d=1")
        if isinstance(f, HatFunction):
            touches = lo < f.center + f.width and hi > f.center - f.width
            return abs(f.scale) * f.lipschitz_constant() if touches else 0.0
        grid = np.linspace(lo, hi, DERIVATIVE_SAMPLES)
        values = np.abs(f.derivative(grid, 1))
        idx = int(np.argmax(values))
        best = float(values[idx])
        left, right = grid[max(idx - 1, 0)], grid[min(idx + 1, grid.size - 1)]
        if right > left:
            result = optimize.minimize_scalar(
                lambda t: -abs(float(f.derivative(np.array([t]), 1)[0])),
                bounds=(left, right),
                method="bounded",
                options={"xatol": 1e-12 * max(1.0, abs(hi - lo))},
            )
            best = max(best, -float(result.fun))
        return best

    def zygmund_increment_sup(self, spec: FunctionSpec, plan: SamplePlan) -> float:
        """
        sup |f(x+w) − f(x) − (f(t+w) − f(t))| / (|w|·log(1 + |x−t|/|w|)) по парам x ≠ t плана.

        Конечен на классе Зигмунда (d = 1).
        """
        f = build_function(spec)
        if f.dim != 1:
            raise UnsupportedDimensionError("Оценка приращений Зигмунда вычисляется только при d=1")
        points = self._plan_points(plan, 1)[:, 0]
        base = f.evaluate(points)
        gaps = np.abs(points[:, None] - points[None, :])
        off_diagonal = gaps > 0
        best = 0.0
        for w in plan.h_values:
            increments = f.evaluate(points + w) - base
            numerator = np.abs(increments[:, None] - increments[None, :])
            denominator = w * np.log1p(gaps / w)
            quotient = np.where(off_diagonal, numerator / np.where(off_diagonal, denominator, 1.0), 0.0)
            best = max(best, float(np.max(quotient)))
        return best

    # ------------------------------------------------------------------
    # JSON-дескрипторы
    # ------------------------------------------------------------------

    def load_descriptor(self, source: str | Path | dict[str, Any]) -> FunctionSpec:
        """
        Загружает описание функции из JSON (путь или словарь).

        Пример: {"kind": "weierstrass", "b": 2.0, "alpha": 0.5, "eval_tol": 1e-10}.
        Ключ "m" служит синонимом "order" для smoothed_weierstrass.
        """
        if isinstance(source, dict):
            data = dict(source)
        else:
            try:
                data = json.loads(Path(source).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigurationError(f"Ошибка при чтении дескриптора функции {source}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("Дескриптор функции должен быть JSON-объектом")

        if "m" in data and "order" not in data:
            data["order"] = data.pop("m")
        unknown = set(data) - _DESCRIPTOR_FIELDS
        if unknown:
            self._logger.warning(f"Неизвестные поля дескриптора функции проигнорированы: {sorted(unknown)}")

        kwargs = {key: data[key] for key in _DESCRIPTOR_FIELDS if key in data}
        try:
            kwargs["kind"] = FunctionKind(data.get("kind"))
        except ValueError as e:
            raise ConfigurationError(f"Неизвестный вид функции: {data.get('kind')!r}") from e
        for key in _TUPLE_FIELDS:
            if key in kwargs:
                value = kwargs[key]
                kwargs[key] = tuple(float(v) for v in (value if isinstance(value, list) else [value]))
        kwargs.setdefault("eval_tol", config.eval_tol)
        try:
            spec = FunctionSpec(**kwargs)
        except TypeError as e:
            raise ConfigurationError(f"Некорректный дескриптор функции: {e}") from e

        self._logger.info(f"Загружена функция {spec.kind.value} (d={spec.dim}, класс {spec.declared_class})")
        return spec
