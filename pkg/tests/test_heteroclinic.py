import math

import numpy as np
import pytest
from scipy.optimize import brentq, minimize_scalar

from pwl_hidden import (PreconditionError, Regime, SystemParams, Variant, build_system,
                        classify_structure, gamma_interval, heteroclinic_spec, ho_seed,
                        intersection_points, verify_heteroclinic)
from pwl_hidden.heteroclinic import HeteroclinicSpec, analytic_regime

REFERENCE_SEED = np.array([-0.9999976751050959, 0.0, -2.3248949041393315e-6])


def slanted(gamma, c=-3.0):
    return build_system(SystemParams(0.2, 5.0, c, 1.0, gamma, Variant.FOUR_ATOM_SLANTED))


def test_reference_seeds(two_atom):
    np.testing.assert_allclose(ho_seed(two_atom, 1, 50), REFERENCE_SEED, rtol=0, atol=1e-15)
    np.testing.assert_allclose(ho_seed(two_atom, 2, 50), -REFERENCE_SEED, rtol=0, atol=1e-15)


def test_intersection_points_scale_with_alpha():
    sys = build_system(SystemParams(0.2, 5.0, -3.0, 2.0))
    x_in1, x_in2 = intersection_points(sys)
    np.testing.assert_allclose(x_in1, [2 / 3, 0, 4 / 3], atol=1e-15)
    np.testing.assert_allclose(x_in2, -x_in1, atol=0)


@pytest.mark.parametrize("k", [10, 20, 50])
def test_two_atom_loop_verified(two_atom, k):
    for i, j in ((1, 2), (2, 1)):
        ok, err = verify_heteroclinic(two_atom, heteroclinic_spec(two_atom, i, j, k))
        assert ok and err < 1e-6


def test_closure_error_decreases_with_horizon(two_atom):
    spec = heteroclinic_spec(two_atom, 2, 1, 20)
    t_out = 2 * spec.k * math.pi / two_atom.params.b
    errs = [verify_heteroclinic(two_atom, spec, horizon=f * t_out)[1] for f in (0.5, 0.9, 1.01, 4)]
    assert all(e1 >= e2 for e1, e2 in zip(errs, errs[1:]))
    assert errs[-1] < 1e-6 < errs[0]


def test_broken_orbit_not_verified():
    sys = slanted(3.0)
    ok, err = verify_heteroclinic(sys, heteroclinic_spec(sys, 2, 3))
    assert not ok and err > 1e-6


def test_off_plane_seed_rejected(two_atom):
    spec = heteroclinic_spec(two_atom, 2, 1)
    bad = HeteroclinicSpec(2, 1, spec.x0 + np.array([0.1, 0.0, 0.0]), spec.k, spec.target)
    with pytest.raises(PreconditionError):
        verify_heteroclinic(two_atom, bad)


def test_seed_argument_checks(two_atom, slanted5):
    with pytest.raises(PreconditionError):
        ho_seed(two_atom, 1, 0)
    with pytest.raises(PreconditionError):
        ho_seed(slanted5, 2, 50)


def test_gamma_interval_values():
    gi = gamma_interval(0.2, 5.0, 1.0)
    assert abs(gi.gamma_L - 1.8826170015164836) < 1e-12
    assert abs(gi.gamma_U - 2.1329942639693464) < 1e-12


def test_gamma_interval_scales_with_alpha():
    rng = np.random.default_rng(20)
    for _ in range(20):
        a, b, al = rng.uniform(0.05, 0.5), rng.uniform(1, 10), rng.uniform(0.1, 3)
        g1, g2 = gamma_interval(a, b, al), gamma_interval(a, b, 2 * al)
        assert g2.gamma_L == pytest.approx(2 * g1.gamma_L, rel=1e-14)
        assert g2.gamma_U == pytest.approx(2 * g1.gamma_U, rel=1e-14)


def test_interval_is_nonempty_when_b_over_a_exceeds_ten():
    for a in np.linspace(0.01, 0.5, 15):
        for ratio in np.linspace(10.5, 100, 15):
            gi = gamma_interval(a, a * ratio, 1.0)
            assert gi.gamma_L < gi.gamma_U


def test_tau_is_first_extremum():
    for a, b in ((0.2, 5.0), (0.1, 3.0), (0.4, 7.0)):
        f = lambda t: math.exp(-a * t) * math.cos(b * t)
        coarse = minimize_scalar(f, bounds=(0, 2 * math.pi / b), method="bounded").x
        # polish on the first-order condition inside the coarse bracket
        df = lambda t: -a * f(t) - b * math.exp(-a * t) * math.sin(b * t)
        t_max = brentq(df, coarse - 1e-4, coarse + 1e-4, xtol=1e-15)
        assert abs(t_max - gamma_interval(a, b, 1.0).tau) < 1e-9


@pytest.mark.parametrize("gamma, regime, loops", [
    (2.0, Regime.SIX_ORBITS, [(1, 2), (2, 3), (3, 4)]),
    (1.5, Regime.FOUR_ORBITS_INNER_LOOP, [(2, 3)]),
    (3.0, Regime.FOUR_ORBITS_OUTER_LOOPS, [(1, 2), (3, 4)]),
])
def test_census(gamma, regime, loops):
    census = classify_structure(slanted(gamma))
    assert census.regime is regime
    assert census.geometric_regime is regime and census.consistent
    assert census.loops == loops
    assert not census.degenerate
    for o in census.orbits:
        assert census.verified(o.from_eq, o.to_eq) == census.verified(5 - o.from_eq, 5 - o.to_eq)


def test_census_matches_analytic_predicate():
    gi = gamma_interval(0.2, 5.0, 1.0)
    rng = np.random.default_rng(21)
    gammas = rng.uniform(max(gi.gamma_L - 0.5, 1.0 + 1e-3), gi.gamma_U + 0.5, size=50)
    for g in gammas:
        census = classify_structure(slanted(float(g)))
        assert census.geometric_regime is analytic_regime(float(g), gi), g
        for o in census.orbits:
            assert census.verified(o.from_eq, o.to_eq) == census.verified(5 - o.from_eq, 5 - o.to_eq)


def test_degenerate_flag():
    gi = gamma_interval(0.2, 5.0, 1.0)
    census = classify_structure(slanted(gi.gamma_U))
    assert census.degenerate
    assert census.regime is Regime.FOUR_ORBITS_OUTER_LOOPS


def test_classify_needs_slanted(two_atom):
    with pytest.raises(PreconditionError):
        classify_structure(two_atom)
