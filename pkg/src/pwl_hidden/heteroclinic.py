"""Heteroclinic orbits between neighbouring equilibria and the six-orbit interval.

An orbit from ``eq_i`` to ``eq_j`` leaves ``eq_i`` inside its unstable plane,
spirals out and crosses into the atom of ``eq_j`` exactly on the stable line of
``eq_j``; from there it converges along that line. The seed trick puts a point
on the unstable plane of ``eq_i`` whose forward image after ``k`` full turns is
the landing point.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import (ParameterError, PreconditionError, PwlSystem, Variant, atom_of,
                   stable_manifold, unstable_manifold)
from .flow import FORWARD, iter_segments


@dataclass(frozen=True)
class HeteroclinicSpec:
    """Seed ``x0`` near ``from_eq`` whose forward orbit should reach ``to_eq``.

    ``x0`` lies on the unstable plane of ``from_eq``; ``k`` is the number of
    turns needed to spiral out to the landing point ``target``.
    """

    from_eq: int
    to_eq: int
    x0: np.ndarray
    k: int
    target: np.ndarray


@dataclass(frozen=True)
class GammaInterval:
    """Open interval ``(gamma_L, gamma_U)`` of outer offsets giving six orbits."""

    tau: float
    gamma_L: float
    gamma_U: float

    def contains(self, gamma: float) -> bool:
        return self.gamma_L < gamma < self.gamma_U


class Regime(str, enum.Enum):
    SIX_ORBITS = "SixOrbits"
    FOUR_ORBITS_OUTER_LOOPS = "FourOrbitsOuterLoops"
    FOUR_ORBITS_INNER_LOOP = "FourOrbitsInnerLoop"


@dataclass(frozen=True)
class OrbitCheck:
    from_eq: int
    to_eq: int
    verified: bool
    closure_error: float


@dataclass(frozen=True)
class HeteroclinicCensus:
    """Outcome of checking all six candidate orbits of a four-atom system.

    ``regime`` follows the analytic interval test; ``geometric_regime`` is read
    off the verified orbits. ``degenerate`` flags ``gamma`` within 1e-9 of an
    interval bound.
    """

    orbits: list[OrbitCheck]
    loops: list[tuple[int, int]]
    regime: Regime
    geometric_regime: Regime | None
    interval: GammaInterval
    degenerate: bool = False

    @property
    def consistent(self) -> bool:
        return self.geometric_regime is self.regime

    def verified(self, from_eq: int, to_eq: int) -> bool:
        for o in self.orbits:
            if (o.from_eq, o.to_eq) == (from_eq, to_eq):
                return o.verified
        raise KeyError((from_eq, to_eq))


CANDIDATE_ORBITS = ((1, 2), (2, 1), (2, 3), (3, 2), (3, 4), (4, 3))

# verified orbit sets implied by each regime
_EXPECTED = {
    Regime.SIX_ORBITS: frozenset(CANDIDATE_ORBITS),
    Regime.FOUR_ORBITS_INNER_LOOP: frozenset({(1, 2), (2, 3), (3, 2), (4, 3)}),
    Regime.FOUR_ORBITS_OUTER_LOOPS: frozenset({(1, 2), (2, 1), (3, 4), (4, 3)}),
}


def _line_plane_intersection(line, plane) -> np.ndarray:
    u = line.direction
    s = (plane.offset - plane.normal @ line.anchor) / (plane.normal @ u)
    return line.anchor + s * u


def landing_point(system: PwlSystem, from_eq: int, to_eq: int) -> np.ndarray:
    """Intersection of the stable line of ``to_eq`` with the unstable plane of ``from_eq``."""
    if abs(from_eq - to_eq) != 1:
        raise PreconditionError(f"equilibria {from_eq} and {to_eq} are not neighbours")
    return _line_plane_intersection(stable_manifold(system, to_eq),
                                    unstable_manifold(system, from_eq))


def intersection_points(system: PwlSystem) -> tuple[np.ndarray, np.ndarray]:
    """``(x_in1, x_in2)`` of a two-atom system.

    ``x_in1`` joins the unstable plane of ``eq_2`` to the stable line of
    ``eq_1``; ``x_in2`` is its mirror image.
    """
    if system.variant is not Variant.TWO_ATOM:
        raise PreconditionError("intersection_points needs a two-atom system")
    return landing_point(system, 2, 1), landing_point(system, 1, 2)


def ho_seed(system: PwlSystem, eq: int, k: int, to_eq: int | None = None) -> np.ndarray:
    """Seed on the unstable plane of ``eq`` that reaches the landing point after ``k`` turns.

    In the frame of ``eq`` the landing point is ``(0, 0, z3)``; the seed is
    ``Q (0, 0, z3 exp(-2 k a pi / b)) + x_eq``. For two-atom systems
    ``z3 = -+2 alpha / 3``. ``to_eq`` defaults to the other equilibrium of a
    two-atom system.
    """
    if int(k) != k or k <= 0:
        raise PreconditionError(f"k must be a positive integer (got {k})")
    if to_eq is None:
        if system.variant is not Variant.TWO_ATOM:
            raise PreconditionError("to_eq is required for four-atom systems")
        to_eq = 3 - eq
    a, b = system.params.a, system.params.b
    eq_pt = system.atom(eq).equilibrium
    z3 = (system.frame.Qinv @ (landing_point(system, eq, to_eq) - eq_pt))[2]
    shrink = math.exp(-2.0 * k * a * math.pi / b)
    return system.frame.Q @ np.array([0.0, 0.0, z3 * shrink]) + eq_pt


def heteroclinic_spec(system: PwlSystem, from_eq: int, to_eq: int, k: int = 50) -> HeteroclinicSpec:
    return HeteroclinicSpec(from_eq=from_eq, to_eq=to_eq, x0=ho_seed(system, from_eq, k, to_eq),
                            k=int(k), target=landing_point(system, from_eq, to_eq))


def default_tolerance(system: PwlSystem) -> float:
    return 1e-6 * system.params.scale


def verify_heteroclinic(system: PwlSystem, spec: HeteroclinicSpec, horizon: float | None = None,
                        tol: float | None = None) -> tuple[bool, float]:
    """Check that the forward orbit of ``spec.x0`` enters ``to_eq``'s atom at the landing point.

    The closure error is the smallest distance between the landing point and
    any crossing into the atom of ``to_eq`` before ``horizon`` (default four
    times the spiral-out time ``2 k pi / b``); if there is no such crossing it
    is the smallest distance to any switching point. Convergence after landing is
    certified analytically: the landing point lies on the stable line of
    ``to_eq`` and the segment to the equilibrium stays in the convex atom.

    Raises
    ------
    PreconditionError
        If the seed is not on the unstable plane of ``from_eq``.
    """
    if tol is None:
        tol = default_tolerance(system)
    if horizon is None:
        horizon = 4.0 * 2.0 * spec.k * math.pi / system.params.b
    plane = unstable_manifold(system, spec.from_eq)
    off = plane.distance(spec.x0)
    if off > 1e-12 * system.params.scale:
        raise PreconditionError(
            f"seed is {off:.3g} away from the unstable plane {plane.describe()} of eq{spec.from_eq}"
        )
    target = np.asarray(spec.target, dtype=float)
    best = math.inf
    # fallback error when the orbit never enters the target atom
    nearest = float(np.linalg.norm(spec.x0 - target))
    for rec in iter_segments(system, spec.x0, horizon, FORWARD):
        ev = rec.event
        if ev is None or ev.grazing:
            continue
        d = float(np.linalg.norm(ev.x - target))
        nearest = min(nearest, d)
        if ev.to_atom != spec.to_eq:
            continue
        best = min(best, d)
        if best < tol:
            break
    if best >= tol:
        return False, best if math.isfinite(best) else nearest
    eq_pt = system.atom(spec.to_eq).equilibrium
    line = stable_manifold(system, spec.to_eq)
    certified = (atom_of(system, eq_pt) == spec.to_eq
                 and line.distance(target) <= 1e-12 * system.params.scale)
    return bool(certified), best


def gamma_interval(a: float, b: float, alpha: float) -> GammaInterval:
    """Bounds of the six-orbit interval.

    ``tau = (arctan(b/a) + pi/2) / b`` is the first extremum of
    ``exp(-a t) cos(b t)``; with ``q = exp(-a tau) cos(b tau)``,
    ``gamma_L = alpha (1 - q)`` and ``gamma_U = alpha (q - 1) / q``.
    """
    if a <= 0 or b <= 0 or alpha <= 0:
        raise ParameterError(f"a, b and alpha must be positive (got {a}, {b}, {alpha})")
    tau = (math.atan(b / a) + math.pi / 2.0) / b
    q = math.exp(-a * tau) * math.cos(b * tau)
    return GammaInterval(tau=tau, gamma_L=alpha * (1.0 - q), gamma_U=alpha * (q - 1.0) / q)


def analytic_regime(gamma: float, interval: GammaInterval) -> Regime:
    if interval.contains(gamma):
        return Regime.SIX_ORBITS
    if gamma <= interval.gamma_L:
        return Regime.FOUR_ORBITS_INNER_LOOP
    return Regime.FOUR_ORBITS_OUTER_LOOPS


def classify_structure(system: PwlSystem, k: int = 50, horizon: float | None = None,
                       workers: int | None = None) -> HeteroclinicCensus:
    """Verify the six candidate orbits of a slanted four-atom system and name its regime."""
    if system.variant is not Variant.FOUR_ATOM_SLANTED:
        raise PreconditionError("classify_structure needs a four-atom-slanted system")
    p = system.params
    interval = gamma_interval(p.a, p.b, p.alpha)
    specs = [heteroclinic_spec(system, i, j, k) for i, j in CANDIDATE_ORBITS]
    if workers and workers > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(verify_heteroclinic, [system] * len(specs), specs,
                                    [horizon] * len(specs)))
    else:
        results = [verify_heteroclinic(system, s, horizon) for s in specs]
    orbits = [OrbitCheck(s.from_eq, s.to_eq, ok, err) for s, (ok, err) in zip(specs, results)]
    found = {(o.from_eq, o.to_eq) for o in orbits if o.verified}
    loops = sorted({tuple(sorted(o)) for o in found if (o[1], o[0]) in found})
    geometric = next((r for r, exp in _EXPECTED.items() if exp == found), None)
    degenerate = min(abs(p.gamma - interval.gamma_L), abs(p.gamma - interval.gamma_U)) < 1e-9
    return HeteroclinicCensus(orbits=orbits, loops=loops,
                              regime=analytic_regime(p.gamma, interval),
                              geometric_regime=geometric, interval=interval,
                              degenerate=degenerate)
