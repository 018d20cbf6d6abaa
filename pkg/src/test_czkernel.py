import numpy as np
import pytest

from conftest import polynomial
from core.config import config
from core.errors import PreconditionError, UnsupportedDimensionError
from core.models import FunctionKind, FunctionSpec, MeasureName

HAT = FunctionSpec(kind=FunctionKind.HAT, width=0.5)


@pytest.mark.parametrize("t, expected", [(0.5, -1.0), (-0.5, 1.0), (0.25, -3.0), (2.0, 0.0), (-2.0, 0.0)])
def test_k_zero_of_sym2(kernels, sym2, t, expected):
    # K₀(t) = 1 − M/t при 0 < t < M, нечётно
    assert kernels.k_zero(sym2, t) == pytest.approx(expected, abs=1e-8)


def test_k_zero_undefined_at_zero(kernels, sym2):
    with pytest.raises(PreconditionError):
        kernels.k_zero(sym2, 0.0)


def test_k_eps_near_origin(kernels, sym2):
    # ∫_{−1/2}^{−1/4} σ[s, ∞) ds = −1/4
    assert kernels.k_eps(sym2, 0.5, 0.25) == pytest.approx(-1.0)
    with pytest.raises(PreconditionError):
        kernels.k_eps(sym2, 1.0, 0.25)


def test_k_eps_equals_k_zero_outside(kernels, measures, sym2):
    t = np.array([-0.9, -0.3, 0.26, 0.7])
    np.testing.assert_array_equal(kernels.k_eps(sym2, 0.25, t), kernels.k_zero(sym2, t))
    assert kernels.matches_outside(sym2, [2.0 ** -n for n in range(1, 15)])
    assert kernels.matches_outside(measures.make_classical(3), [0.5, 0.01])


def test_kernel_is_linear_in_measure(kernels, measures, sym1, sym2):
    combined = measures.linear_combination(3, sym2, 0, sym1)
    t = np.array([-0.7, 0.1, 0.4])
    np.testing.assert_allclose(kernels.k_zero(combined, t), 3.0 * kernels.k_zero(sym2, t), rtol=1e-12)


def test_dk_zero_matches_finite_difference(kernels, measures):
    sigma = measures.make_classical(3)
    step = 1e-6
    for t in (0.3, -0.45, 1.7, -2.2):
        numeric = (kernels.k_zero(sigma, t + step) - kernels.k_zero(sigma, t - step)) / (2 * step)
        assert kernels.dk_zero(sigma, t) == pytest.approx(numeric, rel=1e-5, abs=1e-6)
    assert kernels.dk_zero(sigma, 5.0) == 0.0


def test_breakpoints(kernels, sym2):
    points = kernels.breakpoints(sym2)
    assert 0.0 not in points
    assert np.any(np.isclose(points, 1.0)) and np.any(np.isclose(points, -1.0))


def test_kernel_integral_orientation(kernels, sym2):
    forward = kernels.kernel_integral(sym2, 0.25, 0.75)
    assert kernels.kernel_integral(sym2, 0.75, 0.25) == pytest.approx(-forward)
    # ∫_{1/4}^{3/4} (1 − 1/t) dt = 1/2 − log 3
    assert forward == pytest.approx(0.5 - np.log(3.0), abs=1e-8)
    with pytest.raises(PreconditionError):
        kernels.kernel_integral(sym2, -0.5, 0.5)


def test_kernel_report_sym2(kernels, sym2):
    report = kernels.kernel_report(sym2)
    assert report.sup_tK0 == pytest.approx(1.0, abs=1e-5)
    assert report.passed is True
    assert report.support_radius == 1
    assert report.total_variation == 4.0
    assert report.derivative_check_error < 1e-3
    assert report.to_dict()["passed"] is True


@pytest.mark.parametrize("ell", [2, 3])
def test_kernel_report_classical(kernels, measures, ell):
    assert kernels.kernel_report(measures.make_classical(ell)).passed


def test_kernel_report_random_measure(kernels, measures):
    sigma = measures.random_admissible(np.random.default_rng(11), n_atoms=5, order=1)
    report = kernels.kernel_report(sigma)
    bound = report.support_radius * report.total_variation
    assert report.sup_tK0 <= 2 * bound
    assert report.passed


def test_kernel_report_is_diagnostic_without_first_moment(kernels, sym1):
    report = kernels.kernel_report(sym1)
    assert report.passed is None
    assert report.pass_size is None


def test_kernel_requires_line(kernels, measures):
    with pytest.raises(UnsupportedDimensionError):
        kernels.k_zero(measures.make_named(MeasureName.SYM2, dim=2), 0.5)


@pytest.mark.parametrize("spec", [polynomial(0.0), polynomial(1, 2)])
def test_truncated_transform_of_affine(kernels, sym2, spec):
    assert kernels.truncated_transform(spec, sym2, 0.3, 0.1) == pytest.approx(0.0, abs=1e-9)


def test_prepare_requires_first_moment(kernels, sym1, bump):
    with pytest.raises(PreconditionError):
        kernels.prepare(bump, sym1)
    with pytest.raises(PreconditionError):
        kernels.truncated_transform(bump, sym1, 0.0, 0.1)


def test_convolution_identity_for_bump(kernels, oscillation, sym2, bump):
    rng = np.random.default_rng(5)
    for x, n in zip(rng.uniform(-0.75, 0.75, 6), rng.integers(1, 12, 6)):
        eps = 2.0 ** -int(n)
        theta = oscillation.theta_tilde(bump, sym2, float(x), eps).value
        assert abs(theta - kernels.convolution(bump, sym2, float(x), eps)) <= 4 * config.quad_tol


def test_convolution_identity_for_square(kernels, sym2):
    # Θ̃_ε(x²) = 2(1 − ε) в любой точке
    assert kernels.convolution(polynomial(0, 0, 1), sym2, 0.4, 0.125) == pytest.approx(1.75, abs=1e-7)


@pytest.mark.parametrize("spec", [FunctionSpec(kind=FunctionKind.BUMP, width=0.5), HAT])
def test_cz_comparison_bounded(kernels, functions, sym2, spec):
    bound = functions.sup_derivative(spec, -2.0, 2.0) * 2 * 1 * 4 + 4 * config.quad_tol
    for x in (-0.3, 0.0, 0.45):
        for eps in (0.5, 2.0 ** -5, 2.0 ** -10):
            assert kernels.cz_comparison(spec, sym2, x, eps) <= bound


def test_compare_frame(kernels, sym2, bump):
    frame = kernels.compare_frame(bump, sym2, [0.0, 0.2], [0.25, 0.5])
    assert list(frame.columns) == ["x", "eps", "theta_tilde", "transform", "gap"]
    assert len(frame) == 4
    assert (frame["gap"] >= 0).all()
    with pytest.raises(PreconditionError):
        kernels.compare_frame(bump, sym2, [0.0], [1.0])
