import math

import numpy as np
import pytest
from scipy import integrate

from conftest import polynomial
from core.errors import ConfigurationError, PreconditionError
from core.models import SharpnessConfig
from core.services.sharpness_service import SharpnessService, one_minus_cos_integral


def test_one_minus_cos_integral_matches_quadrature():
    expected, _ = integrate.quad(lambda t: (1.0 - math.cos(t)) / t ** 2, 0.5, 7.0, epsabs=1e-13)
    assert one_minus_cos_integral(0.5, 7.0, 1e-10) == pytest.approx(expected, abs=1e-8)
    assert one_minus_cos_integral(0.0, 0.0, 1e-10) == 0.0


def test_a_coeff_vanishes_for_large_eps():
    assert SharpnessService.a_coeff(2.0, 3, 1.0) == 0.0
    assert SharpnessService.a_coeff(2.0, 3, 2.5) == 0.0


def test_a_coeff_limit_is_minus_pi():
    # −2∫_0^∞ (1 − cos t)/t² dt = −π
    assert abs(SharpnessService.a_coeff(2.0, 14, 0.0) + math.pi) < 1e-3
    assert SharpnessService.a_coeff(2.0, 1, 0.0) < 0


def test_a_coeff_monotone_in_eps():
    coarse = SharpnessService.a_coeff(2.0, 6, 0.5)
    fine = SharpnessService.a_coeff(2.0, 6, 0.01)
    assert fine < coarse < 0


@pytest.mark.parametrize("kwargs", [{"k": 0, "eps": 0.1}, {"k": 2, "eps": -0.1}])
def test_a_coeff_rejects_bad_arguments(kwargs):
    with pytest.raises(ConfigurationError):
        SharpnessService.a_coeff(2.0, **kwargs)


@pytest.mark.parametrize("b, eps, expected", [(2.0, 1.0, 0), (2.0, 0.1, 4), (2.0, 2.0 ** -7, 7), (3.0, 0.5, 1)])
def test_n_of_eps(b, eps, expected):
    assert SharpnessService.n_of_eps(b, eps) == expected


@pytest.mark.parametrize("eps", [0.0, 1.5])
def test_n_of_eps_domain(eps):
    with pytest.raises(PreconditionError):
        SharpnessService.n_of_eps(2.0, eps)


def test_upsilon_matches_coefficient_side(sharpness):
    eps = 2.0 ** -8
    direct = sharpness.upsilon(2.0, 0.0, eps)
    assert direct == pytest.approx(sharpness.coefficient_side(2.0, 0.0, eps)[0], abs=1e-6)


def test_upsilon_is_even(sharpness):
    eps = 2.0 ** -6
    assert sharpness.upsilon(2.0, 0.3, eps) == pytest.approx(sharpness.upsilon(2.0, -0.3, eps), rel=1e-9)
    assert sharpness.upsilon(2.0, 0.3, 1.0) == 0.0


def test_upsilon_of_linear_function(sharpness):
    values = sharpness.upsilon_grid(2.0, [0.1, 0.5], [0.25, 0.0625], function=polynomial(1, 2))
    assert values.shape == (2, 2)
    np.testing.assert_allclose(values, 0.0, atol=1e-10)


def test_lacunary_gap_bounded(sharpness):
    xs = np.linspace(0.0, 2 * math.pi, 9)
    gaps = [float(np.max(sharpness.lacunary_gap(2.0, xs, 2.0 ** -n))) for n in range(3, 10)]
    assert all(np.isfinite(gaps))
    assert max(gaps) <= 16.0


def test_partial_sum_is_empty_at_eps_one(sharpness):
    np.testing.assert_array_equal(sharpness.partial_sum(2.0, [0.0, 1.0], 1.0), [0.0, 0.0])


def test_lil_lower_experiment_frame(sharpness):
    cfg = SharpnessConfig(b=2.0, eps_list=[2.0 ** -5, 2.0 ** -6], x_samples=[0.1, 0.7], theta0=0.0)
    frame, summary = sharpness.lil_lower_experiment(cfg)
    assert list(frame.columns) == ["x", "n", "eps", "upsilon", "partial_sum", "gap", "ratio", "running_max"]
    assert len(frame) == 4
    assert set(summary) == {"theta0", "fraction_above", "max_gap", "median_gap"}
    assert summary["theta0"] == 0.0
    assert summary["fraction_above"] == 1.0


def test_lil_lower_experiment_with_given_values(sharpness):
    cfg = SharpnessConfig(b=2.0, eps_list=[2.0 ** -5], x_samples=[0.0, 1.0])
    frame, _ = sharpness.lil_lower_experiment(cfg, values=np.zeros((1, 2)))
    assert (frame["upsilon"] == 0.0).all()
    np.testing.assert_allclose(frame["gap"], np.abs(frame["partial_sum"]))


def test_lil_lower_experiment_requires_small_eps(sharpness):
    with pytest.raises(PreconditionError):
        sharpness.lil_lower_experiment(SharpnessConfig(b=2.0, eps_list=[0.1], x_samples=[0.0]))


@pytest.mark.parametrize(
    "kwargs",
    [
        {"b": 1.05, "eps_list": [0.01], "x_samples": [0.0]},
        {"b": 2.0, "eps_list": [1.0], "x_samples": [0.0]},
        {"b": 2.0, "eps_list": [], "x_samples": [0.0]},
    ],
)
def test_sharpness_config_validation(kwargs):
    with pytest.raises(ConfigurationError):
        SharpnessConfig(**kwargs)


def test_sharpness_config_sorts_levels():
    cfg = SharpnessConfig(b=2.0, eps_list=[0.01, 0.05], x_samples=[1])
    assert cfg.eps_list == [0.05, 0.01]
    assert cfg.x_samples == [1.0]


@pytest.mark.slow
def test_lil_lower_bound_full_grid(sharpness):
    xs = np.random.default_rng(0).uniform(0.0, 2 * math.pi, 64)
    cfg = SharpnessConfig(b=2.0, eps_list=[2.0 ** -n for n in range(4, 17)], x_samples=list(xs))
    frame, summary = sharpness.lil_lower_experiment(cfg)
    assert summary["fraction_above"] >= 0.5
    assert summary["max_gap"] <= 16.0
    assert frame["running_max"].ge(0).all()
