from fractions import Fraction

import numpy as np
import pytest

from core.errors import ConfigurationError, PreconditionError, UnsupportedDimensionError
from core.models import Atom, MeasureName, SignedMeasure, SphereComponent


@pytest.mark.parametrize(
    "name, ell, k, expected",
    [
        (MeasureName.SYM2, None, (0,), 0),
        (MeasureName.CLASSICAL, 3, (2,), 0),
        (MeasureName.SYM2, None, (2,), 2),
        (MeasureName.SYM1, None, (1,), 2),
    ],
)
def test_moment_exact(measures, name, ell, k, expected):
    sigma = measures.make_named(name, ell=ell)
    value = measures.moment(sigma, k)
    assert value == expected
    assert isinstance(value, (int, Fraction))


def test_moment_rejects_bad_multiindex(measures, sym2):
    with pytest.raises(ConfigurationError):
        measures.moment(sym2, (1, 0))


@pytest.mark.parametrize(
    "name, order, passed",
    [
        (MeasureName.SYM1, 0, True),
        (MeasureName.SYM2, 1, True),
        (MeasureName.SYM2, 2, False),
        (MeasureName.SYM1, 1, False),
    ],
)
def test_check_vanishing(measures, name, order, passed):
    report = measures.check_vanishing(measures.make_named(name), order)
    assert report.passed is passed
    assert report.tolerance == 0.0


def test_check_vanishing_reports_offending(measures, sym2):
    report = measures.check_vanishing(sym2, 2)
    assert report.offending == [((2,), 2)]


def test_require_vanishing_raises(measures, sym1):
    with pytest.raises(PreconditionError) as info:
        measures.require_vanishing(sym1, 1)
    assert info.value.exit_code == 2
    assert info.value.context["order"] == 1


@pytest.mark.parametrize("s, expected", [(0.5, 1), (-0.5, -1), (1.5, 0), (-1.5, 0), (0, -1), (1, 1)])
def test_cumulative_sym2(measures, sym2, s, expected):
    assert measures.cumulative(sym2, s) == expected


def test_integrate_cumulative_orientation(measures, sym2):
    # σ[s, ∞) = −1 на (−1, 0]
    assert measures.integrate_cumulative(sym2, -1.0, -0.5) == pytest.approx(-0.5)
    assert measures.integrate_cumulative(sym2, -0.5, -1.0) == pytest.approx(0.5)
    values = measures.integrate_cumulative(sym2, np.array([-1.0, 0.0]), np.array([-0.5, 1.0]))
    np.testing.assert_allclose(values, [-0.5, 1.0])


def test_cumulative_requires_line(measures):
    sigma = measures.make_named(MeasureName.SPHERE_MINUS_DELTA, dim=2)
    with pytest.raises(UnsupportedDimensionError):
        measures.cumulative(sigma, 0.0)


@pytest.mark.parametrize(
    "ell, atoms",
    [
        (1, {(0,): -1, (1,): 1}),
        (2, {(0,): 1, (1,): -2, (2,): 1}),
    ],
)
def test_make_classical(measures, ell, atoms):
    sigma = measures.make_classical(ell)
    assert {atom.point: atom.weight for atom in sigma.atoms} == atoms
    assert sigma.declared_moment_order == ell - 1


def test_classical_three_vanishes_to_order_two(measures):
    assert measures.check_vanishing(measures.make_classical(3), 2).passed


def test_named_measures(measures):
    sym1 = measures.make_named("sym1")
    assert {a.point: a.weight for a in sym1.atoms} == {(1,): 1, (-1,): -1}

    sphere = measures.make_named(MeasureName.SPHERE_MINUS_DELTA, dim=1)
    assert {a.point: a.weight for a in sphere.atoms} == {
        (1,): Fraction(1, 2),
        (-1,): Fraction(1, 2),
        (0,): -1,
    }

    general = measures.make_named(MeasureName.GENERAL, points=[[1], [-1], [0]], weights=[1, 1, -2])
    sym2 = measures.make_named(MeasureName.SYM2)
    assert {a.point: a.weight for a in general.atoms} == {a.point: a.weight for a in sym2.atoms}
    assert general.declared_moment_order == 1


def test_unknown_name_and_unbalanced_general(measures):
    with pytest.raises(ConfigurationError):
        measures.make_named("triangle")
    with pytest.raises(ConfigurationError):
        measures.make_general(1, [[0], [1]], [1, 1])


def test_sphere_moments_in_plane(measures):
    sigma = measures.make_named(MeasureName.SPHERE_MINUS_DELTA, dim=2)
    assert measures.moment(sigma, (0, 0)) == 0
    assert measures.moment(sigma, (1, 0)) == 0
    assert measures.moment(sigma, (2, 0)) == Fraction(1, 2)
    assert measures.vanishing_order(sigma) == 1


def test_sphere_rejected_above_three_dimensions():
    with pytest.raises(UnsupportedDimensionError):
        SignedMeasure(4, (Atom((0, 0, 0, 0), -1),), sphere=SphereComponent(1, 1))


def test_support_radius_validated():
    with pytest.raises(ConfigurationError):
        SignedMeasure(1, (Atom((2,), 1), Atom((0,), -1)), support_radius=1)


def test_random_admissible_vanishes(measures):
    rng = np.random.default_rng(7)
    for order in (0, 1, 2):
        sigma = measures.random_admissible(rng, n_atoms=6, order=order)
        assert measures.check_vanishing(sigma, order).passed
        assert not sigma.is_exact


def test_linear_combination_merges_atoms(measures, sym1, sym2):
    combined = measures.linear_combination(2, sym2, 3, sym1)
    weights = {a.point: a.weight for a in combined.atoms}
    assert weights == {(1,): 5, (-1,): -1, (0,): -4}
    assert combined.declared_moment_order == 0


def test_load_descriptor_forms(measures, tmp_path):
    path = tmp_path / "m.json"
    path.write_text('{"dim": 1, "atoms": [[[1], 1], [[-1], 1], [[0], -2]]}', encoding="utf-8")
    sigma = measures.load_descriptor(path)
    assert sigma.declared_moment_order == 1
    assert sigma.is_exact

    named = measures.load_descriptor({"name": "classical", "ell": 4})
    assert named.declared_moment_order == 3

    with pytest.raises(ConfigurationError):
        measures.load_descriptor({"dim": 1, "atoms": [[[1], 1], [[-1], -1]], "declared_moment_order": 1})
    with pytest.raises(ConfigurationError):
        measures.load_descriptor(tmp_path / "missing.json")
    with pytest.raises(ConfigurationError) as error:
        measures.load_descriptor({"dim": 1, "atoms": [[[1], 1], [[0], 1]]})
    assert error.value.context["mass"] == 2.0


def test_descriptor_preserves_fractions(measures):
    sigma = measures.load_descriptor({"dim": 1, "atoms": [[["1/3"], 1], [[0], -1]]})
    dumped = measures.dump_descriptor(sigma)
    assert dumped["atoms"][0] == [["1/3"], 1]
    assert measures.load_descriptor(dumped) == sigma


def test_transform_of_sym2(measures, sym2):
    t = np.array([[0.0], [0.5], [2.0]])
    np.testing.assert_allclose(measures.transform(sym2, t).real, 2.0 * np.cos(t[:, 0]) - 2.0, atol=1e-12)
