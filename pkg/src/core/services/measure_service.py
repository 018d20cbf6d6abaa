import json
import math
from fractions import Fraction
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np

from ..config import config
from ..errors import ConfigurationError, PreconditionError, UnsupportedDimensionError
from ..models import Atom, MeasureName, MomentReport, Number, SignedMeasure, SphereComponent
from ..numerics.moments import multiindices, sphere_surface_moment
from ..numerics.quadrature import sphere_rule
from ..numerics.spectral import MeasureTransform
from .logger_service import LoggerService, default_logger

# Выше этого порядка моменты не проверяются при автоматическом определении
MAX_INFERRED_ORDER = 8


def _exact_number(value: Any) -> Number:
    """Число из дескриптора: int и строки "p/q" остаются точными."""
    if isinstance(value, bool):
        raise ConfigurationError(f"Ожидалось число, получено {value!r}")
    if isinstance(value, (int, Fraction)):
        return value
    if isinstance(value, float):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except ValueError as e:
            raise ConfigurationError(f"Некорректное число в дескрипторе: {value!r}") from e
    raise ConfigurationError(f"Ожидалось число, получено {value!r}")


def _dump_number(value: Number) -> Any:
    if isinstance(value, Fraction):
        return value.numerator if value.denominator == 1 else f"{value.numerator}/{value.denominator}"
    return value


class MeasureService:
    """Сервис для работы со знакопеременными мерами."""

    def __init__(self, logger: Optional[LoggerService] = None, tol_moment: Optional[float] = None):
        """
        Инициализация сервиса мер.

        Args:
            logger: Сервис логов (опционально)
            tol_moment: Допуск для моментов плавающих мер (по умолчанию из конфигурации)
        """
        self._logger = logger or default_logger
        self.tol_moment = config.tol_moment if tol_moment is None else tol_moment

    # ------------------------------------------------------------------
    # Моменты
    # ------------------------------------------------------------------

    def moment(self, sigma: SignedMeasure, k: Sequence[int]) -> Number:
        """
        Момент ∫ x^k dσ(x).

        Для мер с рациональными полями вычисляется точно (Fraction/int),
        иначе в двойной точности. Вклад сферы: ноль при нечётной компоненте k,
        иначе замкнутая формула для моментов нормированной меры на сфере.

        Raises:
            ConfigurationError: если мультииндекс не согласован с размерностью
        """
        k = tuple(int(kj) for kj in k)
        if len(k) != sigma.dim or any(kj < 0 for kj in k):
            raise ConfigurationError(f"Мультииндекс {k} не согласован с d={sigma.dim}")
        if sigma.sphere is not None and sigma.dim > 3:
            raise UnsupportedDimensionError(f"Сферическая компонента при d={sigma.dim} не поддерживается")

        degree = sum(k)
        if sigma.is_exact:
            total: Number = 0
            for atom in sigma.atoms:
                term: Number = atom.weight
                for coord, power in zip(atom.point, k):
                    term *= Fraction(coord) ** power
                total += term
            if sigma.sphere is not None:
                total += (
                    sphere_surface_moment(sigma.dim, k)
                    * Fraction(sigma.sphere.radius) ** degree
                    * sigma.sphere.weight
                )
            if isinstance(total, Fraction) and total.denominator == 1:
                return total.numerator
            return total

        value = 0.0
        if sigma.atoms:
            points = sigma.points_array()
            monomials = np.prod(points ** np.asarray(k, dtype=float), axis=1)
            value += float(monomials @ sigma.weights_array())
        if sigma.sphere is not None:
            value += (
                float(sphere_surface_moment(sigma.dim, k))
                * float(sigma.sphere.radius) ** degree
                * float(sigma.sphere.weight)
            )
        return value

    def check_vanishing(self, sigma: SignedMeasure, order: int) -> MomentReport:
        """
        Проверяет зануление всех моментов степени ≤ order.

        Допуск нулевой для точных мер и tol_moment для плавающих.
        """
        if order < 0:
            raise ConfigurationError(f"Порядок проверки моментов должен быть ≥ 0: {order}")
        tolerance = 0.0 if sigma.is_exact else self.tol_moment
        entries: list[tuple[tuple[int, ...], Number]] = []
        for degree in range(order + 1):
            for k in multiindices(sigma.dim, degree):
                entries.append((k, self.moment(sigma, k)))
        passed = all(abs(value) <= tolerance for _, value in entries)
        return MomentReport(order=order, entries=entries, passed=passed, tolerance=tolerance)

    def vanishing_order(self, sigma: SignedMeasure, cap: int = MAX_INFERRED_ORDER) -> int:
        """Наибольший порядок (≤ cap) с занулёнными моментами; −1 если σ(R^d) ≠ 0."""
        order = -1
        tolerance = 0.0 if sigma.is_exact else self.tol_moment
        for degree in range(cap + 1):
            if any(abs(self.moment(sigma, k)) > tolerance for k in multiindices(sigma.dim, degree)):
                break
            order = degree
        return order

    def require_vanishing(self, sigma: SignedMeasure, order: int, purpose: str = "") -> None:
        """Бросает PreconditionError, если моменты до порядка order не занулены."""
        report = self.check_vanishing(sigma, order)
        if not report.passed:
            offending = [(list(k), float(v)) for k, v in report.offending[:5]]
            raise PreconditionError(
                f"Мера не зануляет моменты до порядка {order}{': ' + purpose if purpose else ''}",
                {"order": order, "offending": offending},
            )

    def total_variation(self, sigma: SignedMeasure) -> Number:
        """‖σ‖, точно для рациональных мер."""
        return sigma.total_variation

    # ------------------------------------------------------------------
    # Хвостовая функция σ[s, ∞)
    # ------------------------------------------------------------------

    @staticmethod
    def _require_line(sigma: SignedMeasure) -> None:
        if sigma.dim != 1:
            raise UnsupportedDimensionError(f"Операция определена только при d=1, получено d={sigma.dim}")
        if sigma.sphere is not None:
            raise PreconditionError("Одномерная мера должна быть задана атомами (сфера S⁰ состоит из двух точек)")

    def cumulative(self, sigma: SignedMeasure, s: Number) -> Number:
        """σ[s, ∞) = Σ весов атомов с точкой ≥ s (атом в s включается)."""
        self._require_line(sigma)
        if sigma.is_exact and isinstance(s, (int, Fraction)):
            return sum((atom.weight for atom in sigma.atoms if atom.point[0] >= s), 0)
        s = float(s)
        return float(sum(float(atom.weight) for atom in sigma.atoms if float(atom.point[0]) >= s))

    def integrate_cumulative(self, sigma: SignedMeasure, lo, hi) -> float | np.ndarray:
        """
        ∫_lo^hi σ[s, ∞) ds с учётом ориентации (lo, hi: числа или массивы одной формы).

        Для ступенчатой функции интеграл точен: Σ w_i·clip(a_i − lo, 0, hi − lo).
        """
        self._require_line(sigma)
        lo = np.asarray(lo, dtype=float)
        hi = np.asarray(hi, dtype=float)
        sign = np.where(lo > hi, -1.0, 1.0)
        left = np.minimum(lo, hi)[..., None]
        width = np.abs(hi - lo)[..., None]
        lengths = np.clip(sigma.points_array()[:, 0] - left, 0.0, width)
        values = sign * (lengths @ sigma.weights_array())
        return float(values) if values.ndim == 0 else values

    # ------------------------------------------------------------------
    # Построители мер
    # ------------------------------------------------------------------

    def make_classical(self, ell: int) -> SignedMeasure:
        """σ(ℓ) = Σ_{j=0}^{ℓ} (−1)^{ℓ+j} C(ℓ, j) δ_j, классическая разность порядка ℓ."""
        if ell < 1:
            raise ConfigurationError(f"Порядок классической разности должен быть ≥ 1: {ell}")
        atoms = tuple(
            Atom(point=(j,), weight=(-1) ** (ell + j) * math.comb(ell, j)) for j in range(ell + 1)
        )
        return self._verified(
            SignedMeasure(dim=1, atoms=atoms, support_radius=ell, declared_moment_order=ell - 1)
        )

    def make_named(
        self,
        name: MeasureName | str,
        dim: int = 1,
        points: Optional[Sequence[Sequence[Number]]] = None,
        weights: Optional[Sequence[Number]] = None,
        ell: Optional[int] = None,
    ) -> SignedMeasure:
        """
        Именованная мера.

        sym1 = δ_e − δ_{−e}, sym2 = δ_e + δ_{−e} − 2δ₀ (e: первый базисный вектор),
        general = Σ μ_i δ_{a_i}, sphere_minus_delta = ω − δ₀, classical = σ(ℓ).

        Raises:
            ConfigurationError: неизвестное имя или Σμ_i ≠ 0 для general
        """
        try:
            name = MeasureName(name)
        except ValueError as e:
            raise ConfigurationError(f"Неизвестная мера: {name!r}") from e

        zero = (0,) * dim
        unit = (1,) + (0,) * (dim - 1)
        minus = (-1,) + (0,) * (dim - 1)

        if name == MeasureName.SYM1:
            sigma = SignedMeasure(dim, (Atom(unit, 1), Atom(minus, -1)), declared_moment_order=0)
        elif name == MeasureName.SYM2:
            sigma = SignedMeasure(
                dim, (Atom(unit, 1), Atom(minus, 1), Atom(zero, -2)), declared_moment_order=1
            )
        elif name == MeasureName.SPHERE_MINUS_DELTA:
            if dim == 1:
                half = Fraction(1, 2)
                atoms = (Atom((1,), half), Atom((-1,), half), Atom((0,), -1))
                sigma = SignedMeasure(1, atoms, declared_moment_order=1)
            else:
                sigma = SignedMeasure(
                    dim, (Atom(zero, -1),), sphere=SphereComponent(1, 1), declared_moment_order=1
                )
        elif name == MeasureName.CLASSICAL:
            if dim != 1:
                raise UnsupportedDimensionError("Классическая разность определена при d=1")
            return self.make_classical(ell if ell is not None else 2)
        else:
            sigma = self.make_general(dim, points or (), weights or ())
        return self._verified(sigma)

    def make_general(
        self, dim: int, points: Sequence[Sequence[Number]], weights: Sequence[Number]
    ) -> SignedMeasure:
        """Σ μ_i δ_{a_i}; заявленный порядок моментов определяется проверкой."""
        if len(points) != len(weights) or not points:
            raise ConfigurationError("Для general нужны непустые и равные по длине points и weights")
        atoms = tuple(
            Atom(tuple(_exact_number(c) for c in p), _exact_number(w)) for p, w in zip(points, weights)
        )
        sigma = SignedMeasure(dim, atoms)
        order = self.vanishing_order(sigma)
        if order < 0:
            raise ConfigurationError(
                "Сумма весов μ_i должна быть равна нулю (σ(R^d) = 0)",
                {"mass": float(self.moment(sigma, (0,) * dim))},
            )
        return self._with_order(sigma, order)

    def linear_combination(
        self, a: Number, first: SignedMeasure, b: Number, second: SignedMeasure
    ) -> SignedMeasure:
        """a·σ₁ + b·σ₂ с объединением совпадающих атомов."""
        if first.dim != second.dim:
            raise ConfigurationError(f"Размерности мер не совпадают: {first.dim} и {second.dim}")
        merged: dict[tuple, Number] = {}
        for coef, sigma in ((a, first), (b, second)):
            for atom in sigma.atoms:
                merged[atom.point] = merged.get(atom.point, 0) + coef * atom.weight
        atoms = tuple(Atom(p, w) for p, w in merged.items() if w != 0)

        sphere = None
        spheres = [(c, s.sphere) for c, s in ((a, first), (b, second)) if s.sphere is not None]
        if spheres:
            radii = {float(sph.radius) for _, sph in spheres}
            if len(radii) > 1:
                raise ConfigurationError("Сумма сферических компонент разных радиусов не поддерживается")
            weight = sum((c * sph.weight for c, sph in spheres), 0)
            if weight != 0:
                sphere = SphereComponent(spheres[0][1].radius, weight)

        sigma = SignedMeasure(first.dim, atoms, sphere=sphere)
        return self._with_order(sigma, self.vanishing_order(sigma))

    def random_admissible(self, rng: np.random.Generator, n_atoms: int = 5, order: int = 1) -> SignedMeasure:
        """
        Случайная атомная мера на [−1, 1] с занулёнными моментами до порядка order.

        Свободные веса стандартные нормальные, последние order+1 весов
        находятся из системы Вандермонда.
        """
        if n_atoms < order + 2:
            raise ConfigurationError(f"Нужно не меньше {order + 2} атомов для порядка {order}")
        points = np.sort(rng.uniform(-1.0, 1.0, size=n_atoms))
        free = rng.standard_normal(n_atoms - order - 1)
        degrees = np.arange(order + 1)
        fixed_points = points[-(order + 1):]
        vandermonde = fixed_points[None, :] ** degrees[:, None]
        rhs = -(points[: n_atoms - order - 1][None, :] ** degrees[:, None]) @ free
        fixed = np.linalg.solve(vandermonde, rhs)
        weights = np.concatenate([free, fixed])
        atoms = tuple(Atom((float(p),), float(w)) for p, w in zip(points, weights))
        return self._verified(SignedMeasure(1, atoms, declared_moment_order=order))

    def _with_order(self, sigma: SignedMeasure, order: int) -> SignedMeasure:
        return SignedMeasure(
            sigma.dim,
            sigma.atoms,
            sphere=sigma.sphere,
            support_radius=sigma.support_radius,
            declared_moment_order=order,
        )

    def _verified(self, sigma: SignedMeasure) -> SignedMeasure:
        """Проверяет заявленный порядок моментов, а не принимает его на веру."""
        if sigma.declared_moment_order >= 0:
            report = self.check_vanishing(sigma, sigma.declared_moment_order)
            if not report.passed:
                raise ConfigurationError(
                    f"Заявленный порядок моментов {sigma.declared_moment_order} не подтверждается",
                    {"offending": [(list(k), float(v)) for k, v in report.offending[:5]]},
                )
        return sigma

    # ------------------------------------------------------------------
    # Дискретизация и преобразование Фурье
    # ------------------------------------------------------------------

    def discretize(self, sigma: SignedMeasure, n_sphere: int = 64) -> tuple[np.ndarray, np.ndarray]:
        """
        Атомы плюс квадратура сферической компоненты.

        Returns:
            (точки формы (N, d), веса формы (N,))
        """
        points = sigma.points_array()
        weights = sigma.weights_array()
        if sigma.sphere is not None:
            nodes, node_weights = sphere_rule(sigma.dim, n_sphere)
            points = np.vstack([points, float(sigma.sphere.radius) * nodes])
            weights = np.concatenate([weights, float(sigma.sphere.weight) * node_weights])
        return points, weights

    def transform(self, sigma: SignedMeasure, t: np.ndarray) -> np.ndarray:
        """σ̂(t) = ∫ e^{i t·w} dσ(w) для точек t формы (N, d)."""
        order = sigma.declared_moment_order
        if order < 0:
            order = self.vanishing_order(sigma)
        return MeasureTransform(sigma, order)(t)

    # ------------------------------------------------------------------
    # JSON-дескрипторы
    # ------------------------------------------------------------------

    def load_descriptor(self, source: str | Path | dict[str, Any]) -> SignedMeasure:
        """
        Загружает меру из JSON-дескриптора (путь или уже разобранный словарь).

        Формы: {"dim", "atoms": [[point, weight], ...], "sphere": {"radius", "weight"} | null,
        "support_radius"?, "declared_moment_order"?} или {"name": "sym2", "dim": 1, ...}.
        Заявленный порядок моментов проверяется, отсутствующий определяется.
        """
        if isinstance(source, dict):
            data = source
        else:
            try:
                data = json.loads(Path(source).read_text(encoding="utf-8"))
            except (OSError, json.JSONDecodeError) as e:
                raise ConfigurationError(f"Ошибка при чтении дескриптора меры {source}: {e}") from e
        if not isinstance(data, dict):
            raise ConfigurationError("Дескриптор меры должен быть JSON-объектом")

        dim = int(data.get("dim", 1))
        if "name" in data:
            sigma = self.make_named(
                data["name"], dim, points=data.get("points"), weights=data.get("weights"), ell=data.get("ell")
            )
            self._logger.info(f"Загружена мера {data['name']} (d={dim})")
            return sigma

        try:
            atoms = tuple(
                Atom(tuple(_exact_number(c) for c in point), _exact_number(weight))
                for point, weight in data.get("atoms", [])
            )
        except (TypeError, ValueError) as e:
            raise ConfigurationError(f"Некорректный список атомов: {e}") from e

        sphere = None
        raw_sphere = data.get("sphere")
        if raw_sphere:
            radius = _exact_number(raw_sphere["radius"])
            weight = _exact_number(raw_sphere["weight"])
            if dim == 1:
                # S⁰ из двух точек: мера сразу переводится в атомы
                half = Fraction(weight, 2) if isinstance(weight, (int, Fraction)) else weight / 2.0
                atoms = atoms + (Atom((radius,), half), Atom((-radius,), half))
            else:
                sphere = SphereComponent(radius, weight)

        support = data.get("support_radius")
        sigma = SignedMeasure(
            dim,
            atoms,
            sphere=sphere,
            support_radius=_exact_number(support) if support is not None else None,
        )
        declared = data.get("declared_moment_order")
        if declared is None:
            order = self.vanishing_order(sigma)
            if order < 0:
                raise ConfigurationError(
                    "Сумма весов дескриптора должна быть равна нулю (σ(R^d) = 0)",
                    {"mass": float(self.moment(sigma, (0,) * dim))},
                )
        else:
            order = int(declared)
        sigma = self._verified(self._with_order(sigma, order))
        self._logger.info(
            f"Загружена мера: d={dim}, атомов {len(sigma.atoms)}, порядок моментов {order}, "
            f"M={sigma.radius:g}, ‖σ‖={float(sigma.total_variation):g}"
        )
        return sigma

    def dump_descriptor(self, sigma: SignedMeasure) -> dict[str, Any]:
        """Дескриптор меры; рациональные числа сохраняются как int или "p/q"."""
        return {
            "dim": sigma.dim,
            "atoms": [
                [[_dump_number(c) for c in atom.point], _dump_number(atom.weight)] for atom in sigma.atoms
            ],
            "sphere": (
                {"radius": _dump_number(sigma.sphere.radius), "weight": _dump_number(sigma.sphere.weight)}
                if sigma.sphere is not None
                else None
            ),
            "support_radius": _dump_number(sigma.support_radius),
            "declared_moment_order": sigma.declared_moment_order,
        }
