"""Мультииндексы и моменты нормированной меры на сфере."""

import math
from fractions import Fraction
from functools import lru_cache
from itertools import product


def multiindices(dim: int, degree: int) -> list[tuple[int, ...]]:
    """Все мультииндексы k ∈ N^d с |k| = degree, в лексикографическом порядке."""
    return [k for k in product(range(degree + 1), repeat=dim) if sum(k) == degree][::-1]


def _half_gamma_ratio(j: int) -> Fraction:
    """Γ((j+1)/2)/√π для чётного j: j!/(4^{j/2}·(j/2)!)."""
    half = j // 2
    return Fraction(math.factorial(j), 4 ** half * math.factorial(half))


def _rising(start: Fraction, count: int) -> Fraction:
    value = Fraction(1)
    for i in range(count):
        value *= start + i
    return value


@lru_cache(maxsize=1024)
def sphere_surface_moment(dim: int, k: tuple[int, ...]) -> Fraction:
    """
    ∫ ξ^k dω(ξ) по нормированной мере на S^{d−1}, точно.

    Ноль, если есть нечётная компонента; иначе Π Γ((k_j+1)/2)/√π,
    делённое на возрастающий факториал (d/2)_{|k|/2}.
    """
    if len(k) != dim:
        raise ValueError(f"Мультииндекс {k} не согласован с d={dim}")
    if any(kj % 2 for kj in k):
        return Fraction(0)
    numerator = Fraction(1)
    for kj in k:
        numerator *= _half_gamma_ratio(kj)
    return numerator / _rising(Fraction(dim, 2), sum(k) // 2)


def directional_sphere_moment(dim: int, j: int) -> float:
    """E[(ξ·e)^j] для единичного вектора e."""
    k = (j,) + (0,) * (dim - 1)
    return float(sphere_surface_moment(dim, k))
