import math

import numpy as np
import pytest

from conftest import polynomial
from core.errors import ConfigurationError, EvaluationDomainError, PreconditionError
from core.models import FunctionKind, FunctionSpec, SamplePlan


def cusp(alpha: float) -> FunctionSpec:
    return FunctionSpec(kind=FunctionKind.CUSP, alpha=alpha)


@pytest.mark.parametrize(
    "spec, x, expected",
    [
        (cusp(0.5), 4.0, 2.0),
        (cusp(0.5), -4.0, -2.0),
        (FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=1.0), 0.0, 2.0),
        (polynomial(0, 0, 1), 3.0, 9.0),
        (FunctionSpec(kind=FunctionKind.HAT, width=2.0), 1.0, 0.5),
        (FunctionSpec(kind=FunctionKind.BUMP, width=1.0), 0.0, 1.0),
    ],
)
def test_eval(functions, spec, x, expected):
    assert functions.eval(spec, np.array([x]))[0] == pytest.approx(expected, abs=1e-9)


def test_zygmund_series_at_zero(functions):
    # Σ_{k≥1} 2^{−k} = 1
    spec = FunctionSpec(kind=FunctionKind.ZYGMUND_WEIERSTRASS, b=2.0)
    assert functions.eval(spec, np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-9)


def test_eval_derivative(functions, bump):
    assert functions.eval_derivative(polynomial(0, 0, 1), np.array([3.0]), 1)[0] == pytest.approx(6.0)
    assert functions.eval_derivative(bump, np.array([2.0]), 1)[0] == 0.0
    assert functions.eval_derivative(bump, np.array([0.0]), 1)[0] == pytest.approx(0.0, abs=1e-12)


def test_bump_derivative_matches_finite_difference(functions, bump):
    x = np.array([0.1, -0.2, 0.3])
    step = 1e-6
    numeric = (functions.eval(bump, x + step) - functions.eval(bump, x - step)) / (2 * step)
    np.testing.assert_allclose(functions.eval_derivative(bump, x, 1), numeric, rtol=1e-6, atol=1e-9)


def test_derivative_beyond_smoothness(functions):
    with pytest.raises(EvaluationDomainError):
        functions.eval_derivative(cusp(0.5), np.array([1.0]), 1)
    with pytest.raises(EvaluationDomainError):
        functions.eval_derivative(FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=0.5), np.array([0.0]), 1)


def test_sampled_outside_grid(functions):
    spec = FunctionSpec(kind=FunctionKind.SAMPLED, grid=(0.0, 1.0, 2.0, 3.0), values=(0.0, 1.0, 4.0, 9.0))
    assert functions.eval(spec, np.array([1.0]))[0] == pytest.approx(1.0)
    with pytest.raises(EvaluationDomainError):
        functions.eval(spec, np.array([5.0]))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"kind": FunctionKind.WEIERSTRASS, "b": 1.05, "alpha": 0.5},
        {"kind": FunctionKind.CUSP, "alpha": 1.5},
        {"kind": FunctionKind.HAT, "width": 0.0},
        {"kind": FunctionKind.SAMPLED, "grid": (0.0, 1.0), "values": (0.0, 1.0)},
    ],
)
def test_spec_validation(kwargs):
    with pytest.raises(ConfigurationError):
        FunctionSpec(**kwargs)


def test_estimate_seminorm(functions):
    plan = SamplePlan.standard()
    assert functions.estimate_seminorm(polynomial(0, 3), 0, 1.0, plan, lipschitz=True) == pytest.approx(3.0)
    assert functions.estimate_seminorm(polynomial(7), 0, 0.5, plan) == 0.0
    # Первое разностное отношение в нуле равно 1 при любом h
    assert functions.estimate_seminorm(cusp(0.5), 0, 0.5, plan) >= 1.0 - 1e-12


def test_membership_weierstrass(functions):
    spec = FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=0.5)
    report = functions.membership_check(spec, 0, 0.5, 1)
    assert report.passed
    assert report.exponent_fit == pytest.approx(0.5, abs=0.1)


def test_membership_polynomial(functions):
    report = functions.membership_check(polynomial(0, 0, 1), 0, 1.0, 2)
    assert report.passed
    assert report.exponent_fit > 1.0


def test_membership_bounds_only_the_fine_half(functions):
    # Δ₂(x²) = 2h²: отношения 2h^{1.9} падают на порядки, и грубые h превышают 10 медиан
    report = functions.membership_check(polynomial(0, 0, 1), 0, 0.1, 2)
    assert max(report.ratios) > 10 * np.median(report.ratios)
    assert report.passed


def test_membership_cusp_fails_above_its_exponent(functions):
    report = functions.membership_check(cusp(0.5), 0, 0.9, 1)
    assert not report.passed
    assert report.exponent_fit == pytest.approx(0.5, abs=0.05)


def test_membership_requires_high_enough_order(functions):
    with pytest.raises(PreconditionError):
        functions.membership_check(polynomial(0, 1), 0, 1.0, 1)


def test_sup_derivative(functions):
    hat = FunctionSpec(kind=FunctionKind.HAT, width=0.5)
    assert functions.sup_derivative(hat, -1.0, 1.0) == pytest.approx(2.0)
    assert functions.sup_derivative(hat, 3.0, 4.0) == 0.0
    assert functions.sup_derivative(polynomial(0, 0, 1), 0.0, 2.0) == pytest.approx(4.0)


def test_zygmund_increment_finite(functions):
    spec = FunctionSpec(kind=FunctionKind.ZYGMUND_WEIERSTRASS, b=2.0)
    plan = SamplePlan(np.linspace(0.0, 1.0, 33), 2.0 ** -np.arange(2, 10))
    value = functions.zygmund_increment_sup(spec, plan)
    assert 0.0 < value < math.inf


def test_load_descriptor(functions, tmp_path):
    path = tmp_path / "f.json"
    path.write_text('{"kind": "weierstrass", "b": 2.0, "alpha": 0.5}', encoding="utf-8")
    spec = functions.load_descriptor(path)
    assert spec.kind == FunctionKind.WEIERSTRASS
    assert spec.declared_class == (0, 0.5)

    smoothed = functions.load_descriptor({"kind": "smoothed_weierstrass", "b": 2.0, "alpha": 0.5, "m": 1})
    assert smoothed.order == 1
    assert smoothed.declared_class == (1, 0.5)

    with pytest.raises(ConfigurationError):
        functions.load_descriptor({"kind": "spline"})
