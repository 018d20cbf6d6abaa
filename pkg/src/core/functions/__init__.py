"""Семейства тестовых функций."""

from functools import lru_cache

from ..models import FunctionKind, FunctionSpec
from .base import BaseFunction
from .bump import BumpFunction
from .cusp import CuspFunction
from .hat import HatFunction
from .polynomial import PolynomialFunction
from .sampled import SampledFunction
from .weierstrass import (
    LacunaryFunction,
    SmoothedWeierstrassFunction,
    WeierstrassFunction,
    ZygmundWeierstrassFunction,
)

FUNCTION_CLASSES: dict[FunctionKind, type[BaseFunction]] = {
    FunctionKind.WEIERSTRASS: WeierstrassFunction,
    FunctionKind.ZYGMUND_WEIERSTRASS: ZygmundWeierstrassFunction,
    FunctionKind.SMOOTHED_WEIERSTRASS: SmoothedWeierstrassFunction,
    FunctionKind.CUSP: CuspFunction,
    FunctionKind.POLYNOMIAL: PolynomialFunction,
    FunctionKind.BUMP: BumpFunction,
    FunctionKind.HAT: HatFunction,
    FunctionKind.SAMPLED: SampledFunction,
}


@lru_cache(maxsize=128)
def build_function(spec: FunctionSpec) -> BaseFunction:
    """Вычислимая функция по описанию (экземпляры кешируются: спектр считается один раз)."""
    return FUNCTION_CLASSES[spec.kind](spec)


__all__ = [
    "BaseFunction",
    "BumpFunction",
    "CuspFunction",
    "FUNCTION_CLASSES",
    "HatFunction",
    "LacunaryFunction",
    "PolynomialFunction",
    "SampledFunction",
    "SmoothedWeierstrassFunction",
    "WeierstrassFunction",
    "ZygmundWeierstrassFunction",
    "build_function",
]
