import math

import numpy as np
import pytest

from conftest import polynomial
from core.errors import BudgetExhaustedError, ConfigurationError, PreconditionError
from core.models import CorollaryForm, FunctionKind, FunctionSpec, MeasureName, OscillationRequest
from core.numerics.budget import EvaluationBudget
from core.services.oscillation_service import OscillationService


def test_delta_sigma_second_difference(oscillation, sym2):
    xs = np.array([-2.0, 0.0, 1.5])
    for h in (0.5, 0.125):
        np.testing.assert_allclose(oscillation.delta_sigma(polynomial(0, 0, 1), sym2, xs, h), 2 * h * h)
    assert oscillation.delta_sigma(polynomial(0, 0, 0, 1), sym2, 1.0, 0.5) == pytest.approx(1.5)


def test_delta_sigma_of_constant(oscillation, sym1):
    assert oscillation.delta_sigma(polynomial(5.0), sym1, 0.3, 0.7) == pytest.approx(0.0, abs=1e-15)


def test_delta_sigma_requires_positive_step(oscillation, sym2):
    with pytest.raises(PreconditionError):
        oscillation.delta_sigma(polynomial(0, 1), sym2, 0.0, 0.0)


@pytest.mark.parametrize("n", [3, 6, 10])
def test_theta_cusp_is_logarithmic(oscillation, sym1, n):
    eps = 2.0 ** -n
    spec = FunctionSpec(kind=FunctionKind.CUSP, alpha=0.5)
    result = oscillation.theta_at(spec, sym1, 0.0, eps, m=0, alpha=0.5)
    assert result.value == pytest.approx(2.0 * math.log(1.0 / eps), rel=1e-7)
    assert result.evaluations > 0


def test_theta_of_square(oscillation, sym2):
    # Δ = 2h², Θ = ∫_ε^1 2 dh = 2(1 − ε)
    eps = 0.01
    result = oscillation.theta_at(polynomial(0, 0, 1), sym2, 0.7, eps)
    assert result.value == pytest.approx(2.0 * (1.0 - eps), abs=1e-7)


@pytest.mark.parametrize("spec", [polynomial(0.0), polynomial(0, 1)])
def test_theta_vanishes_on_affine(oscillation, sym2, spec):
    assert oscillation.theta_at(spec, sym2, 0.25, 2.0 ** -8).value == pytest.approx(0.0, abs=1e-12)


def test_theta_at_eps_one_is_zero(oscillation, sym2):
    assert oscillation.theta_at(polynomial(0, 0, 1), sym2, 0.0, 1.0).value == 0.0


def test_theta_tilde_far_from_bump(oscillation, sym2, bump):
    # Все точки x ± h, x лежат вне носителя
    assert oscillation.theta_tilde(bump, sym2, 3.0, 0.01).value == 0.0


def test_theta_tilde_requires_first_moment(oscillation, sym1, bump):
    with pytest.raises(PreconditionError):
        oscillation.theta_tilde(bump, sym1, 0.0, 0.1)


def test_theta_preconditions(oscillation, sym1, sym2):
    square = polynomial(0, 0, 1)
    with pytest.raises(PreconditionError):
        oscillation.theta(OscillationRequest(f=square, sigma=sym1, x=(0.0,), eps=0.1, m=0, alpha=1.0))
    with pytest.raises(PreconditionError):
        oscillation.theta_at(square, sym2, 0.0, 1.5)
    with pytest.raises(PreconditionError):
        oscillation.theta_at(square, sym2, 0.0, 0.0)
    with pytest.raises(ConfigurationError):
        oscillation.theta_at(square, sym2, 0.0, 0.1, m=0, alpha=1.5)


def test_theta_dimension_mismatch(oscillation, measures):
    plane = measures.make_named(MeasureName.SYM2, dim=2)
    with pytest.raises(PreconditionError):
        oscillation.theta_at(polynomial(0, 0, 1), plane, 0.0, 0.1)


def test_sphere_form_in_one_dimension(oscillation):
    # Среднее по S⁰: (f(x+h) + f(x−h))/2 − f(x) = h² для x²
    eps = 0.05
    result = oscillation.corollary_form(CorollaryForm.SPHERE, polynomial(0, 0, 1), 0.4, eps, alpha=0.5)
    assert result.value == pytest.approx(2.0 / 3.0 * (1.0 - eps ** 1.5), abs=1e-7)


def test_gamma_and_omega_forms(oscillation):
    square = polynomial(0, 0, 1)
    eps = 0.05
    gamma = oscillation.corollary_form(
        CorollaryForm.GAMMA, square, 0.0, eps, alpha=0.5, points=[[0], [1]], weights=[-1, 1]
    )
    assert gamma.value == pytest.approx(2.0 / 3.0 * (1.0 - eps ** 1.5), abs=1e-7)

    omega = oscillation.corollary_form(
        CorollaryForm.OMEGA, square, 0.0, eps, points=[[1], [-1], [0]], weights=[1, 1, -2]
    )
    assert omega.value == pytest.approx(2.0 * (1.0 - eps), abs=1e-7)

    with pytest.raises(PreconditionError):
        oscillation.corollary_form(CorollaryForm.OMEGA, square, 0.0, eps, points=[[0], [1]], weights=[-1, 1])


def test_sphere_form_in_plane(oscillation):
    spec = FunctionSpec(kind=FunctionKind.POLYNOMIAL, dim=2, coeffs=(0.0, 0.0, 1.0), direction=(1.0, 0.0))
    result = oscillation.corollary_form(CorollaryForm.SPHERE, spec, (0.0, 0.0), 0.25, alpha=1.0)
    # Функция зависит от x₁: среднее cos² по окружности равно 1/2
    assert result.value == pytest.approx(0.5 * (1.0 - 0.25), abs=1e-6)


def test_theta_sweep_frame(oscillation, sym2):
    spec = FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=1.0)
    xs = np.linspace(0.0, 1.0, 5)
    frame = oscillation.theta_sweep(spec, sym2, xs, [0.5, 0.25, 0.125])
    assert list(frame.columns) == ["x", "eps", "value", "error_estimate", "evals"]
    assert len(frame) == 15
    assert frame.groupby("x")["eps"].apply(list).iloc[0] == [0.5, 0.25, 0.125]
    assert (frame["error_estimate"] >= 0).all()


def test_sweep_independent_of_chunking(oscillation, sym2):
    spec = FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=0.5)
    xs = np.random.default_rng(3).random(10)
    coarse = oscillation.theta_sweep(spec, sym2, xs, [2.0 ** -4, 2.0 ** -6], 0, 0.5, chunk_size=64)
    fine = oscillation.theta_sweep(spec, sym2, xs, [2.0 ** -4, 2.0 ** -6], 0, 0.5, chunk_size=3)
    np.testing.assert_allclose(coarse["value"], fine["value"], rtol=0, atol=1e-13)


def test_weierstrass_theta_grows_logarithmically(oscillation, sym2):
    spec = FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=1.0)
    xs = np.linspace(0.0, 1.0, 16, endpoint=False)
    constant, _ = oscillation.log_bound_constant(spec, sym2, xs, [2.0 ** -n for n in range(2, 9)])
    assert 0.0 < constant < 10.0


def test_budget_exhaustion(measures, sym2, bump):
    service = OscillationService(measures, budget=EvaluationBudget(10))
    with pytest.raises(BudgetExhaustedError) as info:
        service.theta_at(bump, sym2, 0.0, 2.0 ** -10)
    assert info.value.exit_code == 3
