import math
import warnings

import numpy as np
import pytest

from conftest import random_params
from pwl_hidden import (PlaneId, PreconditionError, SystemParams, Variant, bound_report,
                        build_system, hysteresis_companion, key_points, region, tangency_lines,
                        verify_region_mapping)
from pwl_hidden.regions import MappingOutcome, agrees_to_printed_digits, bilinear


def _closed_form_tangency(params, atom):
    """Closed-form tangency line ``x2 = p + q x3`` on the central plane."""
    a, b, c, al, g = params.a, params.b, params.c, params.alpha, params.gamma
    x1eq = -g + al if atom == 2 else g - al
    if params.variant is Variant.FOUR_ATOM_SLANTED:
        return (a + c) / (3 * b) * x1eq, -(c - a) / (2 * b)
    return x1eq * (a + 2 * c) / (3 * b), -(2 * c - 2 * a) / (3 * b)


@pytest.mark.parametrize("variant", [Variant.FOUR_ATOM_SLANTED, Variant.FOUR_ATOM_HIDDEN])
def test_tangency_lines_match_closed_form(variant):
    rng = np.random.default_rng(30)
    for _ in range(20):
        params = random_params(rng, variant)
        sys = build_system(params)
        for line in tangency_lines(sys):
            p, q = _closed_form_tangency(params, line.atom)
            assert abs(line.intercept - p) < 1e-12 * max(1.0, abs(p))
            assert abs(line.slope - q) < 1e-12 * max(1.0, abs(q))
            # the field of the atom is parallel to the plane along the line
            for x3 in (-1.0, 0.5, 2.0):
                pt = line.point + (x3 - line.point[2]) / line.direction[2] * line.direction
                n = sys.plane(PlaneId.SW23).normal
                assert abs(sys.plane(PlaneId.SW23).value(pt)) < 1e-12 * params.scale
                assert abs(n @ sys.field(line.atom, pt)) < 1e-11 * params.scale


def test_key_points(slanted10, hidden10):
    kp = key_points(slanted10)
    np.testing.assert_allclose(kp["pa"], [-3, 0, -6], atol=1e-15)
    np.testing.assert_allclose(kp["pt1"], [-3, -0.24, -6], atol=1e-13)
    np.testing.assert_allclose(kp["pc"], [3, 0, 6], atol=1e-15)
    kh = key_points(hidden10)
    np.testing.assert_allclose(kh["pi2"], [0, -0.36, -9], atol=1e-13)
    np.testing.assert_allclose(kh["pi1"], [0, 8, -9], atol=1e-15)


@pytest.mark.parametrize("fixture", ["slanted10", "hidden10"])
def test_region_geometry(fixture, request):
    sys = request.getfixturevalue(fixture)
    r1, r2 = region(sys, "R1"), region(sys, "R2")
    plane = sys.plane(PlaneId.SW23)
    assert np.all(np.abs(plane.value(r1.corners)) < 1e-12 * sys.params.scale)
    np.testing.assert_array_equal(r2.corners, -r1.corners)
    pts = r1.sample(50, np.random.default_rng(0))
    assert np.all(np.abs(plane.value(pts)) < 1e-12 * sys.params.scale)
    assert all(r1.contains(p) for p in pts)
    assert not any(r2.contains(p) for p in pts)
    np.testing.assert_allclose(bilinear(r1.corners, 0.0, 1.0), r1.corners[0], atol=1e-14)
    np.testing.assert_allclose(bilinear(r1.corners, 1.0, 0.0), r1.corners[2], atol=1e-14)


def test_region_needs_four_atoms(two_atom):
    with pytest.raises(PreconditionError):
        region(two_atom)


def test_region_warns_outside_regime():
    sys = build_system(SystemParams(0.2, 5.0, -7.0, 1.0, 3.0, Variant.FOUR_ATOM_SLANTED))
    with pytest.warns(UserWarning, match="region-argument regime"):
        region(sys)


def test_bound_report_at_reference_parameters():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        rep = bound_report(SystemParams(0.2, 5.0, -7.0, 1.0, 10.0, Variant.FOUR_ATOM_SLANTED))
    assert rep.all_hold
    mismatched = [n for n in rep.constants if not rep.matches(n)]
    # the printed 0.5984 is not reproduced by its displayed expression (0.5992)
    assert mismatched == ["H3"]
    k = {n: v[0] for n, v in rep.constants.items()}
    assert k["K6"] < k["K7"]
    assert abs(k["H5"] - k["H6"]) < 0.002
    assert k["K1"] == pytest.approx(math.sqrt((2 / 3 * math.exp(0.08 * math.pi)) ** 2 - 4 / 9))
    assert k["K2"] == pytest.approx(4 / 3 * math.exp(-7 * math.pi / 5))
    assert k["K4"] == pytest.approx(23 / 15 * math.exp(-7 * math.pi / 10))


def test_printed_digit_rule():
    assert agrees_to_printed_digits(0.53877, "0.5388")
    assert agrees_to_printed_digits(0.170049, "0.17")
    assert not agrees_to_printed_digits(0.599246, "0.5984")


@pytest.mark.parametrize("fixture, gamma", [("slanted10", 10.0), (None, 100.0), ("hidden10", 10.0)])
def test_region_mapping_resolves(fixture, gamma, request):
    if fixture is None:
        sys = build_system(SystemParams(0.2, 5.0, -7.0, 1.0, gamma, Variant.FOUR_ATOM_SLANTED))
    else:
        sys = request.getfixturevalue(fixture)
    res = verify_region_mapping(sys, "R1", n_samples=7, horizon=200.0)
    assert res.fraction_unresolved == 0.0
    assert sum(res.as_tuple()) == pytest.approx(1.0)
    if sys.variant is Variant.FOUR_ATOM_HIDDEN:
        assert res.outcomes == [MappingOutcome.TO_OTHER] * 7


def test_region_mapping_is_symmetric(hidden10):
    r1 = verify_region_mapping(hidden10, "R1", n_samples=5, horizon=200.0, rng_seed=3)
    r2 = verify_region_mapping(hidden10, "R2", n_samples=5, horizon=200.0, rng_seed=3)
    np.testing.assert_array_equal(r2.seeds, r1.seeds * -1)
    assert r1.outcomes == r2.outcomes
    np.testing.assert_allclose(r1.times, r2.times, rtol=1e-9)


A, B, GAMMA, ALPHA = 0.2, 5.0, 10.0, 1.0
T_WINDOW = 3 * math.pi / (2 * B)
SPIRAL = math.exp(A * T_WINDOW)
FIG6 = {
    "a": (2 * (GAMMA - ALPHA) / 3, 2 * (GAMMA - ALPHA) / 3),
    "b": (2 * (GAMMA - ALPHA) / 3, 2 * ALPHA / 3),
    "c": (GAMMA / 3, GAMMA / 3),
    "d": (GAMMA / 3, 2 * ALPHA / 3),
}


def test_hysteresis_without_gain_is_pure_spiral():
    tr = hysteresis_companion(A, B, 0.0, 6.0, 6.0, 2 / 3, 0.0, T_WINDOW)
    assert tr.radius_ratio() == pytest.approx(SPIRAL, rel=1e-12)


def test_hysteresis_unreached_thresholds_match_pure_spiral():
    x0 = (0.0, -2.0)
    tr = hysteresis_companion(A, B, 1.0, 50.0, 50.0, 2 / 3, 0.0, T_WINDOW, x0=x0)
    ref = hysteresis_companion(A, B, 0.0, 50.0, 50.0, 2 / 3, 0.0, T_WINDOW, x0=x0)
    assert tr.switch_times == []
    np.testing.assert_allclose(tr.x, ref.x, atol=1e-14)


@pytest.mark.parametrize("case", [
    "a", pytest.param("b", marks=pytest.mark.xfail(
        strict=True, reason="rising threshold 2 alpha / 3 shifts the rotation centre early; "
                            "radius grows 6.9 % more than the pure spiral")),
    "c", "d"])
def test_hysteresis_radius_growth(case):
    l1, l2 = FIG6[case]
    # start where the unstable plane of eq_2 meets the central plane, 2 (gamma - alpha) / 3 below
    x0 = (0.0, -2 * (GAMMA - ALPHA) / 3)
    tr = hysteresis_companion(A, B, 1.0, l1, l2, 2 * ALPHA / 3, 0.0, T_WINDOW, x0=x0)
    assert tr.switch_times, "the relay never switched"
    assert abs(tr.radius_ratio() / SPIRAL - 1.0) < 0.05
