"""
Обёртки над адаптивными квадратурами QUADPACK и фиксированные правила.

Все адаптивные интегрирования проходят через quad_checked / quad_vec_checked:
несходимость не обрезается молча, а превращается в BudgetExhaustedError.
"""

import math
from functools import lru_cache
from typing import Any, Callable, Optional, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import integrate

from ..errors import BudgetExhaustedError

# Узлов Гаусса–Кронрода на подынтервал в quad_vec
GK21_NODES = 21
# Относительный пол точности: ниже него двойная точность ничего не гарантирует
RELATIVE_FLOOR = 1e-13


def quad_checked(
    func: Callable[[float], float],
    a: float,
    b: float,
    epsabs: float,
    limit: int = 200,
    weight: Optional[str] = None,
    wvar: Any = None,
    points: Optional[Sequence[float]] = None,
    context: Optional[dict[str, Any]] = None,
) -> tuple[float, float, int]:
    """
    Адаптивная квадратура Гаусса–Кронрода (scipy.integrate.quad).

    Args:
        func: Подынтегральная функция
        a, b: Пределы (b может быть np.inf при weight='cos'/'sin')
        epsabs: Абсолютный допуск
        limit: Максимум подынтервалов
        weight: 'cos' | 'sin' для осцилляционного режима QUADPACK
        wvar: Частота осцилляционного веса
        points: Точки излома внутри (a, b)
        context: Контекст для отчёта об ошибке

    Returns:
        (значение, оценка ошибки, число вычислений)
    """
    kwargs: dict[str, Any] = {
        "epsabs": epsabs,
        "epsrel": RELATIVE_FLOOR,
        "limit": limit,
        "full_output": 1,
    }
    if weight is not None:
        kwargs["weight"] = weight
        kwargs["wvar"] = wvar
    elif points is not None and len(points) > 0:
        kwargs["points"] = list(points)

    result = integrate.quad(func, a, b, **kwargs)
    value, abserr = float(result[0]), float(result[1])
    info = result[2] if len(result) > 2 else {}
    neval = int(info.get("neval", 0)) if isinstance(info, dict) else 0

    if len(result) > 3:
        # QUADPACK вернул ier > 0; принимаем только честно сошедшийся результат
        accepted = max(epsabs, 50 * np.finfo(float).eps * abs(value))
        if not math.isfinite(value) or abserr > accepted:
            message = result[3] if isinstance(result[3], str) else str(result[3])
            raise BudgetExhaustedError(
                f"Квадратура не сошлась: {message.strip().splitlines()[0] if message else 'ier > 0'}",
                {"a": a, "b": b, "abserr": abserr, "epsabs": epsabs, "neval": neval, **(context or {})},
            )
    return value, abserr, neval


def quad_vec_checked(
    func: Callable[[float], np.ndarray],
    a: float,
    b: float,
    epsabs: float,
    limit: int,
    points: Optional[Sequence[float]] = None,
    context: Optional[dict[str, Any]] = None,
) -> tuple[np.ndarray, float, int]:
    """
    Векторная адаптивная квадратура (scipy.integrate.quad_vec, норма max).

    Returns:
        (значения, оценка ошибки в max-норме, число вычислений подынтегральной функции)
    """
    inner = [p for p in (points or ()) if a < p < b]
    res, err, info = integrate.quad_vec(
        func,
        a,
        b,
        epsabs=epsabs,
        epsrel=RELATIVE_FLOOR,
        norm="max",
        limit=limit,
        points=inner or None,
        full_output=True,
    )
    res = np.asarray(res, dtype=float)
    if info.status != 0 or not np.all(np.isfinite(res)):
        raise BudgetExhaustedError(
            f"Векторная квадратура не сошлась: {info.message}",
            {"a": a, "b": b, "error": float(err), "neval": int(info.neval), **(context or {})},
        )
    return res, float(err), int(info.neval)


def limit_for_budget(request_budget: int) -> int:
    """Число подынтервалов GK21, укладывающееся в бюджет запроса."""
    return max(request_budget // GK21_NODES, 50)


def dyadic_edges(lo: float, hi: float) -> list[float]:
    """Границы панелей [lo, hi], выровненные по уровням h = 2^{−j}."""
    if not 0 < lo < hi:
        raise ValueError(f"Ожидались 0 < lo < hi, получено lo={lo}, hi={hi}")
    j_min = math.ceil(-math.log2(hi))
    j_max = math.floor(-math.log2(lo))
    edges = {lo, hi}
    for j in range(j_min, j_max + 1):
        level = 2.0 ** -j
        if lo < level < hi:
            edges.add(level)
    return sorted(edges)


@lru_cache(maxsize=32)
def gauss_legendre_unit(order: int) -> tuple[np.ndarray, np.ndarray]:
    """Узлы и веса Гаусса–Лежандра на [0, 1]."""
    nodes, weights = leggauss(order)
    return (nodes + 1.0) / 2.0, weights / 2.0


@lru_cache(maxsize=32)
def tensor_rule(order: int, dim: int) -> tuple[np.ndarray, np.ndarray]:
    """Тензорное правило Гаусса–Лежандра на [0,1]^d: точки (G^d, d), веса (G^d,)."""
    nodes, weights = gauss_legendre_unit(order)
    grids = np.meshgrid(*([nodes] * dim), indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    wgrids = np.meshgrid(*([weights] * dim), indexing="ij")
    tensor_weights = np.prod(np.stack([w.ravel() for w in wgrids], axis=-1), axis=-1)
    return points, tensor_weights


@lru_cache(maxsize=64)
def sphere_rule(dim: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """
    Квадратура нормированной меры на единичной сфере S^{d−1}.

    d=1: две точки ±1; d=2: n равноотстоящих точек окружности;
    d=3: Гаусс–Лежандр по cos θ × равномерная сетка по азимуту.
    """
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([0.5, 0.5])
    if dim == 2:
        angles = 2.0 * np.pi * np.arange(n) / n
        points = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        return points, np.full(n, 1.0 / n)
    if dim == 3:
        n_polar = max(8, n // 2)
        cos_theta, w_polar = leggauss(n_polar)
        phi = 2.0 * np.pi * np.arange(n) / n
        ct, ph = np.meshgrid(cos_theta, phi, indexing="ij")
        st = np.sqrt(1.0 - ct ** 2)
        points = np.stack([st * np.cos(ph), st * np.sin(ph), ct], axis=-1).reshape(-1, 3)
        weights = (np.repeat(w_polar / 2.0, n) / n)
        return points, weights
    raise ValueError(f"Сферическое правило для d={dim} не поддерживается")
