"""Квадратуры, спектральный движок лакунарных рядов и бюджет вычислений."""

from .budget import EvaluationBudget
from .quadrature import quad_checked, quad_vec_checked
from .spectral import LacunarySpectrum, MeasureTransform, SpectralIntegrator

__all__ = [
    "EvaluationBudget",
    "LacunarySpectrum",
    "MeasureTransform",
    "SpectralIntegrator",
    "quad_checked",
    "quad_vec_checked",
]
