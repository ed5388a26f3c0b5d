import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hedgehog_lab.arithmetic import RotationNumber, parse_alpha, signed_error
from hedgehog_lab.circle import (
    Composition,
    TrigLift,
    arnold,
    check_gn_estimates,
    check_interval_combinatorics,
    check_iterate_nonlinearity,
    check_schwarzian_estimate,
    conjugacy_defect,
    denjoy_conjugacy,
    mobius,
    orbit_with_derivative,
    parse_map,
    renorm_data,
    rotation_bracket,
    rotation_number,
    schwarzian,
    schwarzian_sup,
    translation,
    tune_parameter,
    variation_log_derivative,
)
from hedgehog_lab.errors import DomainError, RationalityError, RotationMismatchError

from oracles import arnold_variation, orbit_rotation

# frozen from oracles.py
ARNOLD_V_01 = 0.40134139092496696


def test_evaluate_examples():
    assert translation(0.3)(np.array([0.2]))[0] == pytest.approx(0.5)
    g = arnold(0.25, 0.1)
    assert g(np.array([0.0]))[0] == 0.25
    assert g.derivative(np.array([0.0]))[0] == pytest.approx(1.1)
    comp = Composition([translation(0.3), translation(0.4)])
    assert comp(np.array([0.5]))[0] == pytest.approx(1.2)


def test_parse_map():
    g = parse_map("arnold:eps=0.05,omega=0.3")
    assert g.omega == 0.3 and g.c[0] == pytest.approx(0.05 / (2 * math.pi))
    assert parse_map("rotation:omega=0.2").is_rigid()
    with pytest.raises(ValueError):
        parse_map("spiral:a=1")


def test_univalence_guard():
    with pytest.raises(DomainError):
        arnold(0.0, 0.5, band_halfwidth=0.25)
    with pytest.raises(DomainError):
        TrigLift(0.0, c=[0.2])  # Dg changes sign


def test_rotation_number_rigid_exact(golden):
    assert rotation_number(translation(float(golden))) == float(golden)


def test_rotation_number_against_long_orbit():
    N = 10**7
    ref = orbit_rotation(0.25, 0.1, N)
    rho = rotation_number(arnold(0.25, 0.1), tol=1e-9)
    assert abs(rho - ref) <= 1.0 / N + 1e-9


def test_rotation_number_locked_at_zero():
    br = rotation_bracket(arnold(0.0, 0.5))
    assert br.exact == (0, 1)
    assert rotation_number(arnold(0.0, 0.5)) == 0.0


def test_tune_parameter_rigid_family(golden):
    g = tune_parameter(translation, golden, 1e-12)
    assert g.omega == pytest.approx(float(golden), abs=1e-12)


def test_tune_parameter_arnold(golden, arnold_05):
    rho = rotation_number(arnold_05, tol=1e-11)
    assert abs(rho - float(golden)) <= 1e-9


def test_tune_parameter_rejects_rational():
    with pytest.raises(RationalityError):
        tune_parameter(lambda w: arnold(w, 0.05), RotationNumber.from_quotients([2]), 1e-9)


def test_renorm_rigid(golden, rigid):
    for n in range(1, 8):
        rd = renorm_data(rigid, golden, n)
        exact = signed_error(golden, n)
        assert np.allclose(rd.m, exact, atol=1e-13)
        assert rd.M == pytest.approx(abs(exact), abs=1e-13)
        assert rd.m_min == pytest.approx(abs(exact), abs=1e-13)


def test_renorm_denjoy_inequality(golden, arnold_05):
    V = variation_log_derivative(arnold_05)
    rd = renorm_data(arnold_05, golden, 3)
    e = abs(signed_error(golden, 3))
    assert e * math.exp(-V) <= rd.M <= e * math.exp(V)
    assert rd.m_min <= np.min(np.abs(rd.m)) <= np.max(np.abs(rd.m)) <= rd.M


def test_renorm_level_zero(golden, arnold_05):
    rd = renorm_data(arnold_05, golden, 0)
    assert np.allclose(rd.m, arnold_05(rd.xs) - rd.xs, atol=1e-15)


def test_renorm_sign_mismatch(golden):
    with pytest.raises(RotationMismatchError):
        renorm_data(translation(0.6), golden, 4)


def test_renorm_grid_guard(golden, arnold_05):
    with pytest.raises(ValueError):
        renorm_data(arnold_05, golden, 6, grid=10)


def test_M_n_decreases(golden, arnold_05):
    Ms = [renorm_data(arnold_05, golden, n).M for n in range(12)]
    assert all(Ms[n + 2] < Ms[n] for n in range(10))


def test_variation_and_schwarzian_zero_for_rigid():
    assert variation_log_derivative(translation(0.3)) == 0.0
    assert schwarzian_sup(translation(0.3)) == 0.0


def test_variation_against_quadrature():
    assert variation_log_derivative(arnold(0.1, 0.1)) == pytest.approx(ARNOLD_V_01, abs=1e-6)
    assert ARNOLD_V_01 == pytest.approx(arnold_variation(0.1), abs=1e-12)


def test_mobius_schwarzian():
    g = mobius(0.3 + 0.2j, 0.1)
    x = np.linspace(0, 1, 257)
    d1 = g.derivative(x)
    # plain Schwarzian of a circle Moebius lift is 2 pi^2 (1 - Dg^2); the
    # projective variant vanishes
    assert np.allclose(schwarzian(g, x), 2 * math.pi**2 * (1 - d1**2), atol=1e-8)
    assert schwarzian_sup(g, projective=True) < 1e-8


def test_combinatorics_rigid(golden, rigid):
    rep = check_interval_combinatorics(rigid, golden, 2, 0.0)
    assert rep["disjoint"] and rep["covers"]
    assert set(rep["multiplicity"]) <= {"1", "2"}


def test_combinatorics_arnold(golden, arnold_05):
    rep = check_interval_combinatorics(arnold_05, golden, 3, 0.1)
    assert rep["disjoint"] and rep["covers"]


def test_combinatorics_single_interval(golden, rigid):
    assert golden.convergent(1)[1] == 1
    rep = check_interval_combinatorics(rigid, golden, 0, 0.3)
    assert rep["disjoint"]


def test_schwarzian_estimate(golden, rigid, arnold_05):
    assert check_schwarzian_estimate(rigid, golden, 3).lhs_max == 0.0
    rep = check_schwarzian_estimate(arnold_05, golden, 3, samples=100)
    assert rep.ratio <= 1 and rep.status == "pass"


def test_nonlinearity_estimate(golden, rigid, arnold_05):
    assert check_iterate_nonlinearity(rigid, golden, 3).lhs_max == 0.0
    rep = check_iterate_nonlinearity(arnold_05, golden, 3)
    assert rep.ratio <= 1


def test_gn_estimates(golden, rigid, arnold_05):
    r = check_gn_estimates(rigid, golden, 4)
    assert r.extra["sup_log_dgn"] == 0.0
    assert r.extra["ratio_min"] == pytest.approx(1.0, abs=1e-9)
    assert check_gn_estimates(arnold_05, golden, 4).status == "pass"
    assert check_gn_estimates(arnold_05, golden, 0).status == "skipped(gate)"


def test_denjoy_conjugacy_rigid(golden, rigid):
    h = denjoy_conjugacy(rigid, golden, 200)
    xs = np.linspace(0, 0.99, 50)
    assert np.allclose(h(xs), xs, atol=1e-12)
    one = denjoy_conjugacy(rigid, golden, 1)
    assert one.xs.size == 1


def test_denjoy_conjugacy_arnold(golden, arnold_05):
    h = denjoy_conjugacy(arnold_05, golden, 2000)
    xs = (np.arange(100) + 0.5) / 100
    assert conjugacy_defect(arnold_05, h, golden, xs) <= 2 * h.gap


def test_commutation_random_points(arnold_05):
    x = np.random.default_rng(1).uniform(-50, 50, 1000)
    assert np.max(np.abs(arnold_05(x + 1) - arnold_05(x) - 1)) < 1e-12


lifts = st.builds(
    lambda w, c1, d1, c2: TrigLift(w, [c1, c2], [d1]),
    st.floats(0, 1), st.floats(-0.05, 0.05), st.floats(-0.05, 0.05), st.floats(-0.02, 0.02),
)


@settings(max_examples=40, deadline=None)
@given(lifts, st.integers(0, 20), st.integers(0, 20), st.floats(0, 1))
def test_cocycle_consistency(g, j, k, x):
    _, _, dg = orbit_with_derivative(g, np.array([x]), j + k)
    gk = orbit_with_derivative(g, np.array([x]), k)
    y = gk[0][-1] + gk[1][-1]
    _, _, dj = orbit_with_derivative(g, y, j)
    assert dg[j + k][0] == pytest.approx(dj[j][0] * dg[k][0], rel=1e-10)


@settings(max_examples=40, deadline=None)
@given(lifts, st.floats(-10, 10))
def test_lift_commutes_with_unit_shift(g, x):
    v = g(np.array([x, x + 1.0]))
    assert v[1] - v[0] == pytest.approx(1.0, abs=1e-12)


def test_parse_alpha_normalizes_mod_one():
    assert float(parse_alpha("(1+sqrt(5))/2")) == pytest.approx((math.sqrt(5) - 1) / 2)
