import math

import numpy as np
import pytest

from hedgehog_lab.arithmetic import signed_error
from hedgehog_lab.circle import m_n, renorm_data, translation
from hedgehog_lab.curves import (
    build_curve,
    grade,
    osculating_cover_check,
    piece_diameter,
    verify_quasi_invariance,
    verify_return_displacement,
    worst,
)
from hedgehog_lab.errors import DomainError, RotationMismatchError


def rigid_return(y0):
    return math.acosh(1 + 1 / (2 * y0**2))


def test_grade_and_worst():
    assert grade(5.9, 6) == "pass"
    assert grade(6.2, 6) == "warn"
    assert grade(6.4, 6) == "fail"
    assert worst(["pass", "skipped(gate)"]) == "skipped(gate)"
    assert worst(["warn", "fail", "pass"]) == "fail"


def test_rigid_curve_is_horizontal(golden, rigid):
    c = build_curve(rigid, golden, 5, 0.75, 256)
    h = abs(signed_error(golden, 4)) * 0.75
    assert np.allclose(c.heights, h, atol=1e-14)
    assert np.all(np.diff(c.xs) > 0)


def test_arnold_curve_height_ratio(golden, arnold_001):
    # literal whole-graph form of the bound; see the decisions ledger: it
    # fails once |m_{n-1}| < 1/(3 pi), here 1.00106 against 1.00090
    c = build_curve(arnold_001, golden, 5)
    eps1 = 1.5 * renorm_data(arnold_001, golden, 4).lipschitz
    assert c.heights.max() / c.heights.min() <= (1 + eps1) / (1 - eps1)


def test_arnold_curve_height_ratio_local(golden, arnold_001):
    # the same bound for y in I_{n-1}(x), where the ratio estimate applies
    c = build_curve(arnold_001, golden, 5)
    eps1 = 1.5 * renorm_data(arnold_001, golden, 4).lipschitz
    t = np.linspace(0, 1, 9)
    ys = (c.xs[:, None] + t[None, :] * c.m[:, None]).ravel()
    ratio = np.abs(m_n(arnold_001, golden, 4, ys)).reshape(c.xs.size, t.size) / np.abs(c.m)[:, None]
    assert ratio.max() <= 1 + eps1 and ratio.min() >= 1 - eps1


def test_resolution_guard(golden, rigid):
    with pytest.raises(DomainError):
        build_curve(rigid, golden, 5, 0.75, resolution=2)
    with pytest.raises(DomainError):
        build_curve(rigid, golden, 5, 0.4)


def test_wrong_rotation_number(golden):
    with pytest.raises(RotationMismatchError):
        build_curve(translation(0.61), golden, 7)


def test_piece_diameter(golden, rigid, arnold_001):
    assert piece_diameter(rigid, golden, 5, 0.2, 0.75)["length"] == pytest.approx(4 / 3, rel=1e-6)
    assert piece_diameter(rigid, golden, 5, 0.2, 1.0)["length"] == pytest.approx(1.0, rel=1e-6)
    r = piece_diameter(arnold_001, golden, 5, 0.2, 0.75)
    assert r["length"] <= r["bound"]


def test_rigid_invariance_exact(golden, rigid):
    c = build_curve(rigid, golden, 5, 0.75, 512)
    rep = verify_quasi_invariance(rigid, golden, c)
    assert all(r["raw"] <= 1e-9 for r in rep.per_j)
    assert rep.per_j[0]["raw"] == 0.0
    assert rep.status == "pass"


def test_arnold_invariance(golden, arnold_001):
    c = build_curve(arnold_001, golden, 5)
    rep = verify_quasi_invariance(arnold_001, golden, c)
    assert rep.status == "pass" and rep.value <= 6
    assert rep.per_j[0]["raw"] == 0.0


def test_invariance_gate(golden, arnold_001):
    c = build_curve(arnold_001, golden, 2)
    assert verify_quasi_invariance(arnold_001, golden, c).status == "skipped(gate)"


@pytest.mark.parametrize("y0", [0.75, 1.0])
def test_rigid_return(golden, rigid, y0):
    c = build_curve(rigid, golden, 6, y0, 256)
    rep = verify_return_displacement(rigid, golden, c)
    assert rep.value == pytest.approx(rigid_return(y0), abs=1e-9)


def test_arnold_return(golden, arnold_001):
    c = build_curve(arnold_001, golden, 5)
    rep = verify_return_displacement(arnold_001, golden, c)
    assert rep.value <= 3 and rep.extra["value_qn"] <= 3


def test_rigid_cover_three_distance(golden, rigid):
    n = 6
    c = build_curve(rigid, golden, n, 0.75, 512)
    rep = osculating_cover_check(rigid, golden, n, curve=c)
    assert rep.extra["coverage"] == 1.0 and rep.extra["separates"]
    # three-distance theorem: q_n points of a rotation leave gaps
    # ||q_{n-1} a|| and ||q_{n-1} a|| + ||q_n a|| = ||q_{n-2} a||
    gaps = sorted({abs(signed_error(golden, n - 1)), abs(signed_error(golden, n - 2))})
    assert rep.extra["max_gap"] == pytest.approx(max(gaps), abs=1e-12)
    assert len(rep.extra["gap_ratios"]) <= 3


def test_arnold_cover(golden, arnold_001):
    rep = osculating_cover_check(arnold_001, golden, 5)
    assert rep.extra["coverage"] == 1.0


def test_single_orbit_point_level(golden, rigid):
    assert golden.convergent(1)[1] == 1
    rep = osculating_cover_check(rigid, golden, 1, curve=build_curve(rigid, golden, 1, 0.75, 64))
    assert rep.extra["q_n"] == 1
    diam = rep.witness["distance"]
    assert (rep.extra["coverage"] == 1.0) == (diam <= 3)


def test_heights_shrink(golden, arnold_001):
    hs = [build_curve(arnold_001, golden, n, 0.75, 256).heights.max() for n in range(3, 10)]
    assert all(b < a for a, b in zip(hs, hs[1:]))


def test_double_resolution_within_correction(golden, arnold_001):
    c1 = build_curve(arnold_001, golden, 5, 0.75, 256)
    c2 = build_curve(arnold_001, golden, 5, 0.75, 512)
    r1 = verify_quasi_invariance(arnold_001, golden, c1)
    r2 = verify_quasi_invariance(arnold_001, golden, c2)
    corr = max(r["correction"] for r in r1.per_j)
    assert r2.value <= r1.value + corr
