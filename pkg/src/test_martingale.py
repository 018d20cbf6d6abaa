import numpy as np
import pandas as pd
import pytest

from conftest import polynomial
from core.errors import ConfigurationError, PreconditionError
from core.models import DyadicCube, FunctionKind, FunctionSpec, LilMode, SamplePlan
from core.services.martingale_service import MartingaleService

SQUARE = polynomial(0, 0, 1)
LINEAR = polynomial(1, 2)


def test_dyadic_cube_navigation():
    root = DyadicCube(0, (0, 0))
    children = root.children()
    assert len(children) == 4
    assert all(child.parent() == root for child in children)
    assert root.parent() is None

    cube = DyadicCube(2, (3,))
    assert cube.side == 0.25
    assert cube.contains(np.array([0.8]))
    assert not cube.contains(np.array([1.0]))
    assert cube.flat_index == 3
    with pytest.raises(ConfigurationError):
        DyadicCube(1, (2,))


def test_s_value_of_square(martingales, sym2):
    # ∫_0^1 2h²·h^{−2} dh = 2
    value = martingales.s_value(SQUARE, sym2, DyadicCube(0, (0,)), 0, 1.0)
    assert value == pytest.approx(2.0, abs=1e-6)


def test_linear_function_gives_zero_martingale(martingales, sym2):
    martingale = martingales.build(LINEAR, sym2, 3, 0, 1.0)
    for n in range(4):
        np.testing.assert_allclose(martingale.tables[n], 0.0, atol=1e-10)
    assert martingale.increment_norm <= 1e-10
    assert martingales.bounded_fraction(martingale, 1e-9) == 1.0


def test_adjacent_increments_of_square(martingales, sym2):
    martingale = martingales.build(SQUARE, sym2, 2, 0, 1.0)
    assert martingales.adjacent_increment_sup(martingale, 1) == pytest.approx(0.0, abs=1e-8)
    assert martingale.martingale_defect <= 4e-8
    with pytest.raises(PreconditionError):
        martingales.adjacent_increment_sup(martingale, 5)


def test_comparison_gap_closed_form(martingales, sym2):
    # S_n ≡ 2, Θ_ε = 2(1 − ε), ε = 2^{−n−2}
    martingale = martingales.build(SQUARE, sym2, 3, 0, 1.0)
    gaps = martingales.comparison_gaps(martingale, [1, 2, 3])
    for n, gap in gaps.items():
        assert gap == pytest.approx(2.0 * 2.0 ** (-n - 2), abs=1e-6)
    assert martingales.comparison_gap(martingale, 2) == pytest.approx(gaps[2])


def test_weierstrass_martingale_property(martingales, sym2):
    spec = FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=0.5)
    martingale = martingales.build(spec, sym2, 5, 0, 0.5)
    assert martingale.martingale_defect <= 4 * martingale.quad_tol
    assert set(martingale.increments()) == {1, 2, 3, 4, 5}
    assert martingale.evaluations > 0

    points = np.array([[0.1], [0.6], [0.99]])
    expected = martingale.tables[1][[0, 1, 1]]
    np.testing.assert_array_equal(martingale.values_at(points, 1), expected)


def test_weierstrass_comparison_bounded(martingales, sym2):
    spec = FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=0.5)
    martingale = martingales.build(spec, sym2, 6, 0, 0.5)
    gaps = martingales.comparison_gaps(martingale, [2, 4, 6])
    values = np.array(list(gaps.values()))
    assert np.all(np.isfinite(values))
    assert values.max() <= 2.0 * np.median(values)


def test_build_is_chunk_independent(martingales, sym2):
    spec = FunctionSpec(kind=FunctionKind.WEIERSTRASS, b=2.0, alpha=1.0)
    coarse = martingales.build(spec, sym2, 4, 0, 1.0, chunk_size=64)
    fine = martingales.build(spec, sym2, 4, 0, 1.0, chunk_size=3)
    for n in range(5):
        np.testing.assert_allclose(coarse.tables[n], fine.tables[n], rtol=0, atol=1e-13)


def test_plan_preconditions(martingales, sym1, sym2):
    with pytest.raises(PreconditionError):
        martingales.plan(SQUARE, sym1, 3, 0, 1.0)
    with pytest.raises(PreconditionError):
        martingales.plan(SQUARE, sym2, 15, 0, 1.0)
    with pytest.raises(ConfigurationError):
        martingales.plan(SQUARE, sym2, 3, 0, 0.0)


@pytest.mark.parametrize("mode", [LilMode.MARTINGALE, LilMode.THETA])
def test_lil_ratio_of_zero_values(mode):
    frame = pd.DataFrame({"x": [0.1] * 4 + [0.7] * 4, "n": [4, 5, 6, 7] * 2, "value": 0.0})
    result = MartingaleService.lil_ratio(frame, mode)
    assert (result["ratio"] == 0.0).all()
    assert (result["running_max"] == 0.0).all()


def test_lil_ratio_running_max():
    frame = pd.DataFrame({"x": 0.5, "n": [5, 3, 4], "value": [0.0, 2.0, -1.0]})
    result = MartingaleService.lil_ratio(frame, LilMode.MARTINGALE)
    assert list(result["n"]) == [3, 4, 5]
    ratios = result["ratio"].to_numpy()
    assert ratios[0] == pytest.approx(2.0 / np.sqrt(3 * np.log(np.log(3))))
    np.testing.assert_allclose(result["running_max"], [ratios[0], max(ratios[:2]), max(ratios[:2])])


def test_lil_ratio_named_column_and_scale():
    frame = pd.DataFrame({"x": 0.5, "n": [3, 4], "S": [1.0, -1.0]})
    result = MartingaleService.lil_ratio(frame, LilMode.MARTINGALE, column="S")
    np.testing.assert_array_equal(result["eps"], [2.0 ** -5, 2.0 ** -6])
    assert result["ratio"].iloc[1] == pytest.approx(1.0 / np.sqrt(4 * np.log(np.log(4))))


def test_lil_ratio_domain():
    with pytest.raises(PreconditionError):
        MartingaleService.lil_ratio(pd.DataFrame({"x": 0.0, "n": [2], "value": [1.0]}), "martingale")
    with pytest.raises(PreconditionError):
        MartingaleService.lil_ratio(pd.DataFrame({"x": 0.0, "n": [3], "value": [1.0]}), "theta")


def test_cube_integral_scaling(martingales, sym2):
    cube = DyadicCube(1, (1,))
    # ∫_Q 2h² dx = 2h²·ℓ(Q)
    assert martingales.cube_integral(SQUARE, sym2, cube, 0.125) == pytest.approx(2 * 0.125 ** 2 * 0.5)
    assert martingales.scaling_slope(SQUARE, sym2, cube) == pytest.approx(2.0, abs=1e-6)


def test_pair_regularity_of_square(martingales, sym2):
    plan = SamplePlan(np.linspace(0.0, 1.0, 9), [0.25, 0.125])
    assert martingales.pair_regularity_sup(SQUARE, sym2, 0, 1.0, plan) == pytest.approx(0.0, abs=1e-8)


def test_martingale_table(martingales, sym2):
    martingale = martingales.build(SQUARE, sym2, 2, 0, 1.0)
    table = martingales.martingale_table(martingale, {2: 0.5})
    assert list(table.columns) == ["n", "cube_index", "S", "increment", "adjacent_max", "comparison_gap"]
    assert len(table) == 1 + 2 + 4
    assert table.loc[table["n"] == 0, "increment"].isna().all()
    assert (table.loc[table["n"] == 2, "comparison_gap"] == 0.5).all()
