"""Transit geometry on the central switching plane.

Covers the tangency lines of the neighbouring fields on a switching plane, the
symmetric quadrilaterals ``R1``/``R2`` through which the large oscillation
passes, a sampling check that trajectories leaving ``R1`` reach ``R2`` or a
self-excited attractor, the chain of numeric bounds behind that argument and
the planar hysteresis system used to justify the rotation estimate.
"""
from __future__ import annotations

import enum
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .core import PlaneId, PreconditionError, PwlSystem, SystemParams, Variant
from .flow import FORWARD, iter_segments, sample_segment
from .lab import CaptureCriterion, CaptureMonitor, default_sample_dt


class RegionLabel(str, enum.Enum):
    R1 = "R1"
    R2 = "R2"


@dataclass(frozen=True)
class TangencyLine:
    """Points of ``plane`` where the field of ``atom`` is parallel to it.

    On the plane the line reads ``x2 = intercept + slope * x3``.
    """

    plane: PlaneId
    atom: int
    point: np.ndarray
    direction: np.ndarray
    intercept: float
    slope: float

    def x2_at(self, x3):
        return self.intercept + self.slope * np.asarray(x3, dtype=float)


@dataclass(frozen=True)
class Region:
    """Quadrilateral on a switching plane; corners in ring order ``p1, p2, p3, p4``."""

    plane: PlaneId
    corners: np.ndarray
    label: RegionLabel

    def sample(self, n: int, rng: np.random.Generator | None = None) -> np.ndarray:
        """``n`` points drawn uniformly in the bilinear parameters of the quad."""
        rng = rng or np.random.default_rng(0)
        s, u = rng.random(n), rng.random(n)
        return bilinear(self.corners, s, u)

    def contains(self, x, tol: float = 1e-9) -> bool:
        """Whether ``x`` (on the plane) lies in the quad, tested in ``(x2, x3)`` coordinates."""
        poly = self.corners[:, [1, 2]]
        p = np.asarray(x, dtype=float)[[1, 2]]
        signs = []
        for k in range(4):
            e = poly[(k + 1) % 4] - poly[k]
            w = p - poly[k]
            signs.append(e[0] * w[1] - e[1] * w[0])
        scale = max(1.0, float(np.max(np.abs(poly))))
        signs = np.array(signs) / scale
        return bool(np.all(signs >= -tol) or np.all(signs <= tol))


def bilinear(corners: np.ndarray, s, u) -> np.ndarray:
    """Map ``(s, u)`` in the unit square onto the quad ``p1, p2, p3, p4``.

    ``s`` runs from the ``p1-p2`` edge to the ``p4-p3`` edge, ``u`` from
    ``p2/p3`` to ``p1/p4``.
    """
    p1, p2, p3, p4 = corners
    s = np.asarray(s, dtype=float)[..., None]
    u = np.asarray(u, dtype=float)[..., None]
    near = p2 + u * (p1 - p2)
    far = p3 + u * (p4 - p3)
    return near + s * (far - near)


def _require_four_atom(system: PwlSystem):
    if not system.variant.four_atom:
        raise PreconditionError("this operation needs a four-atom system")


def _plane_basis(system: PwlSystem, plane_id: PlaneId):
    plane = system.plane(plane_id)
    n = plane.normal
    p0 = np.array([plane.offset / n[0], 0.0, 0.0])
    e1 = np.array([0.0, 1.0, 0.0])
    # in-plane direction with unit x3 component
    e2 = np.array([-n[2] / n[0], 0.0, 1.0])
    return plane, p0, e1, e2


def tangency_lines(system: PwlSystem, plane_id: PlaneId | str = PlaneId.SW23) -> list[TangencyLine]:
    """Tangency lines of the two atoms adjacent to ``plane_id``.

    Solves ``n . (A x + f B) = 0`` for points ``p0 + x2 e1 + x3 e2`` of the plane.
    """
    _require_four_atom(system)
    plane_id = PlaneId(plane_id)
    plane, p0, e1, e2 = _plane_basis(system, plane_id)
    n = plane.normal
    lo = {PlaneId.SW12: 1, PlaneId.SW23: 2, PlaneId.SW34: 3}[plane_id]
    out = []
    for atom in (lo, lo + 1):
        f = system.atom(atom).f_value
        k0 = n @ (system.A @ p0) + f * (n @ system.B)
        k1 = n @ (system.A @ e1)
        k2 = n @ (system.A @ e2)
        intercept, slope = -k0 / k1, -k2 / k1
        point = p0 + intercept * e1
        direction = slope * e1 + e2
        out.append(TangencyLine(plane=plane_id, atom=atom, point=point,
                                direction=direction / np.linalg.norm(direction),
                                intercept=float(intercept), slope=float(slope)))
    return out


def regime_violations(params: SystemParams) -> list[str]:
    """Relations of the bound-argument parameter regime that ``params`` breaks."""
    out = []
    if params.b / params.a < 25:
        out.append(f"b/a = {params.b / params.a:g} < 25")
    ratio = abs(params.c / params.b)
    if not 7 / 5 <= ratio <= 2:
        out.append(f"|c/b| = {ratio:g} outside [7/5, 2]")
    if params.gamma / params.alpha < 10:
        out.append(f"gamma/alpha = {params.gamma / params.alpha:g} < 10")
    return out


def _warn_regime(params: SystemParams):
    bad = regime_violations(params)
    if bad:
        warnings.warn("parameters outside the region-argument regime: "
                      + "; ".join(bad), stacklevel=3)


def key_points(system: PwlSystem) -> dict[str, np.ndarray]:
    """Reference points on the switching planes.

    ``pa`` (on the central plane) and ``pb`` (on ``SW12``) are where the
    unstable plane of ``eq_2`` meets the stable lines of ``eq_3`` and ``eq_1``;
    ``pc = -pa``. ``pt1`` is the tangency point of the ``P2`` field at the
    height of the central-plane crossing of the unstable plane of ``eq_2``.
    The slanted layout adds ``pa1``, ``pa2``; the hidden one ``pi1``, ``pi2``.
    """
    _require_four_atom(system)
    p = system.params
    al, g = p.alpha, p.gamma
    pa = np.array([-(g - al) / 3.0, 0.0, -2.0 * (g - al) / 3.0])
    pb = np.array([al / 3.0 - g, 0.0, 2.0 * al / 3.0])
    line = next(t for t in tangency_lines(system, PlaneId.SW23) if t.atom == 2)
    out = {"pa": pa, "pb": pb, "pc": -pa}
    if system.variant is Variant.FOUR_ATOM_SLANTED:
        x3 = pa[2]
        pt1 = np.array([x3 / 2.0, float(line.x2_at(x3)), x3])
        out.update(pt1=pt1, pa1=np.array([pa[0], 3.0 * g / 5.0, pa[2]]), pa2=pt1.copy())
    else:
        # the unstable plane of eq_2 (x1 + x3 = -(g - al)) meets x1 = 0 at x3 = -(g - al)
        x3 = -(g - al)
        pt1 = np.array([0.0, float(line.x2_at(x3)), x3])
        out.update(pt1=pt1, pi1=np.array([0.0, 4.0 * g / 5.0, x3]), pi2=pt1.copy())
    return out


def region(system: PwlSystem, label: RegionLabel | str = RegionLabel.R1) -> Region:
    """Corners of ``R1`` (or its mirror ``R2``) on the central plane.

    Warns if the parameters are outside the regime of the bound argument.
    """
    _require_four_atom(system)
    label = RegionLabel(label)
    _warn_regime(system.params)
    p = system.params
    g, a, b, c = p.gamma, p.a, p.b, p.c
    kp = key_points(system)
    if system.variant is Variant.FOUR_ATOM_SLANTED:
        d = np.array([g / 10.0, 0.0, g / 5.0])
        corners = np.array([
            kp["pa1"] + d,
            kp["pa1"] - d,
            kp["pa2"] + np.array([-g / 10.0, -(c - a) * (-g / 5.0) / (2.0 * b), -g / 5.0]),
            kp["pa2"] + np.array([g / 10.0, -(c - a) * (g / 5.0) / (2.0 * b), g / 5.0]),
        ])
    else:
        d = np.array([0.0, 0.0, g / 5.0])
        s = (2.0 * c - 2.0 * a) / (3.0 * b)
        corners = np.array([
            kp["pi1"] + d,
            kp["pi1"] - d,
            kp["pi2"] + np.array([0.0, -s * (-g / 5.0), -g / 5.0]),
            kp["pi2"] + np.array([0.0, -s * (g / 5.0), g / 5.0]),
        ])
    if label is RegionLabel.R2:
        corners = -corners
    corners.setflags(write=False)
    return Region(plane=PlaneId.SW23, corners=corners, label=label)


class MappingOutcome(str, enum.Enum):
    TO_OTHER = "to_other"
    SELF_EXCITED = "self-excited"
    UNRESOLVED = "unresolved"


@dataclass(frozen=True)
class MappingResult:
    fraction_to_other_region: float
    fraction_to_self_excited: float
    fraction_unresolved: float
    seeds: np.ndarray
    outcomes: list[MappingOutcome]
    times: list[float | None]

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.fraction_to_other_region, self.fraction_to_self_excited,
                self.fraction_unresolved)


def follow_from_region(system: PwlSystem, x0, target: Region, horizon: float,
                       criterion: CaptureCriterion | None = None) -> tuple[MappingOutcome, float | None]:
    """Integrate until the orbit crosses the central plane inside ``target`` or is captured."""
    criterion = criterion or CaptureCriterion.default(system)
    monitor = CaptureMonitor(system, criterion)
    dt = default_sample_dt(system)
    for rec in iter_segments(system, x0, horizon, FORWARD):
        ev = rec.event
        if (ev is not None and not ev.grazing and ev.plane is PlaneId.SW23
                and ev.t > 0 and target.contains(ev.x)):
            return MappingOutcome.TO_OTHER, float(ev.t)
        ts, xs = sample_segment(system, rec, dt)
        cap = monitor.feed(ts, xs[:, 0])
        if cap is not None:
            return MappingOutcome.SELF_EXCITED, cap[0]
    return MappingOutcome.UNRESOLVED, None


def verify_region_mapping(system: PwlSystem, label: RegionLabel | str = RegionLabel.R1,
                          n_samples: int = 7, horizon: float = 200.0, rng_seed: int = 0,
                          criterion: CaptureCriterion | None = None) -> MappingResult:
    """Send quad-sampled seeds from one region and tally where they end up.

    Seeds lie on the central plane; by the on-plane membership rule they start
    in the atom the flow enters.
    """
    if n_samples < 1:
        raise PreconditionError(f"n_samples must be >= 1 (got {n_samples})")
    src = region(system, label)
    other = region(system, RegionLabel.R2 if src.label is RegionLabel.R1 else RegionLabel.R1)
    seeds = src.sample(n_samples, np.random.default_rng(rng_seed))
    outcomes, times = [], []
    for x0 in seeds:
        o, t = follow_from_region(system, x0, other, horizon, criterion)
        outcomes.append(o)
        times.append(t)
    n = float(n_samples)
    return MappingResult(
        fraction_to_other_region=outcomes.count(MappingOutcome.TO_OTHER) / n,
        fraction_to_self_excited=outcomes.count(MappingOutcome.SELF_EXCITED) / n,
        fraction_unresolved=outcomes.count(MappingOutcome.UNRESOLVED) / n,
        seeds=seeds, outcomes=outcomes, times=times)


# Bound constants (per unit gamma) as printed next to their derivations.
PRINTED_CONSTANTS = {
    "K1": "0.5388", "K2": "0.0164", "K3": "0.0238", "K4": "0.17", "K5": "0.3036",
    "K6": "0.7393", "K7": "0.781", "H1": "0.80815", "H2": "0.0378", "H3": "0.5984",
    "H4": "0.07814", "H5": "1.1091", "H6": "1.1081",
}


@dataclass(frozen=True)
class Inequality:
    lhs: str
    relation: str
    rhs: str
    lhs_value: float
    rhs_value: float
    holds: bool


@dataclass(frozen=True)
class BoundReport:
    """Recomputed bound constants (per unit gamma) and the inequalities built from them.

    ``constants`` maps a name to ``(computed, printed)``.
    """

    constants: dict[str, tuple[float, float]]
    inequalities: list[Inequality]

    def matches(self, name: str) -> bool:
        """Computed value agrees with the printed one to its last printed digit."""
        computed, _ = self.constants[name]
        return agrees_to_printed_digits(computed, PRINTED_CONSTANTS[name])

    @property
    def all_match(self) -> bool:
        return all(self.matches(name) for name in self.constants)

    @property
    def all_hold(self) -> bool:
        return all(i.holds for i in self.inequalities)


def agrees_to_printed_digits(computed: float, printed: str) -> bool:
    """True if ``computed`` differs from ``printed`` by less than one unit of its last digit.

    This accepts both rounded and truncated printings, which the source mixes.
    """
    decimals = len(printed.split(".")[1]) if "." in printed else 0
    return abs(computed - float(printed)) < 10.0 ** (-decimals)


def bound_constants(a: float, b: float, c: float) -> dict[str, float]:
    """Every bound constant of the region argument, recomputed from its defining expression."""
    deg = math.pi / 180.0
    e = math.exp
    return {
        "K1": math.sqrt((2.0 / 3.0 * e(2 * a * math.pi / b)) ** 2 - (2.0 / 3.0) ** 2),
        "K2": 4.0 / 3.0 * e(c * math.pi / b),
        "K3": 23.0 / 15.0 * e(c * 170.5377 * deg / b),
        "K4": 23.0 / 15.0 * e(c * math.pi / (2 * b)),
        # radius growth over 270 degrees
        "K5": e(a * 3 * math.pi / (2 * b)) * math.sqrt((173.0 / 750.0) ** 2 + 0.01),
        "K6": math.sqrt(0.37) * e(a * 279.4623 * deg / b),
        "K7": math.sqrt(0.61),
        "H1": math.sqrt(e(4 * a * math.pi / b) - 1.0),
        "H2": 22.0 / 15.0 * e(c * 149.7435 * deg / b),
        "H3": e(a * 20 * math.pi / (18 * b))
        * math.sqrt(((2 * c - 17 * a) / (15 * b)) ** 2 + (7.0 / 15.0) ** 2),
        "H4": 22.0 / 15.0 * e(c * 12 * math.pi / (18 * b)),
        "H5": math.sqrt(193.0 / 225.0) * e(a * 258.2317 * deg / b),
        "H6": math.sqrt(0.64 + (23.0 / 30.0) ** 2),
    }


def bound_report(params: SystemParams) -> BoundReport:
    """Recompute the bound constants at ``(a, b, c)`` and evaluate the inequality chain.

    Values are per unit ``gamma``. Warns if ``params`` is outside the regime
    the argument assumes.
    """
    _warn_regime(params)
    k = bound_constants(params.a, params.b, params.c)
    consts = {name: (k[name], float(v)) for name, v in PRINTED_CONSTANTS.items()}
    ineq = []

    def rel(lhs, op, rhs, lv, rv, tol=0.0):
        holds = {"<": lv < rv, ">": lv > rv, "~": abs(lv - rv) < tol}[op]
        ineq.append(Inequality(lhs, op, rhs, float(lv), float(rv), bool(holds)))

    rel("K1", "<", "3/5", k["K1"], 3 / 5)
    rel("K2", "<", "1/5", k["K2"], 1 / 5)
    rel("K3", "<", "1/5", k["K3"], 1 / 5)
    rel("K4", "<", "1/5", k["K4"], 1 / 5)
    rel("-K5", ">", "-18/30 + K4/2", -k["K5"], -18 / 30 + k["K4"] / 2)
    rel("K6", "<", "K7", k["K6"], k["K7"])
    # an unquantified "approximately"; one unit of the second decimal
    rel("H1", "~", "4/5", k["H1"], 4 / 5, tol=0.01)
    rel("H2", "<", "2/15", k["H2"], 2 / 15)
    rel("H4", "<", "2/15", k["H4"], 2 / 15)
    rel("-H3", ">", "-9/10 + H4", -k["H3"], -0.9 + k["H4"])
    rel("H5", "~", "H6", k["H5"], k["H6"], tol=0.002)
    return BoundReport(constants=consts, inequalities=ineq)


@dataclass(frozen=True)
class HysteresisTrajectory:
    t: np.ndarray
    x: np.ndarray
    f: np.ndarray
    switch_times: list[float]

    def radius_ratio(self, center=(0.0, 0.0)) -> float:
        c = np.asarray(center, dtype=float)
        return float(np.linalg.norm(self.x[-1] - c) / np.linalg.norm(self.x[0] - c))


def hysteresis_companion(a: float, b: float, k_gain: float, l1: float, l2: float, d1: float,
                         d2: float, t_end: float, x0=None, n_samples: int = 400) -> HysteresisTrajectory:
    """Planar spiral ``x' = M (x - k_gain (0, f))`` with a relay ``f`` on ``x2``.

    ``M = [[a, -b], [b, a]]``. ``f`` starts at ``d2``, jumps to ``d1`` when
    ``x2`` rises through ``l2`` and back to ``d2`` when ``x2`` falls through
    ``l1``. Each mode is solved in closed form; switch times are located by
    Brent's method. ``x0`` defaults to ``(0, -l1)``, the crossing of the
    unstable plane with the central plane in the frame of ``eq_2``.
    """
    if t_end <= 0:
        raise PreconditionError(f"t_end must be positive (got {t_end})")
    x = np.array([0.0, -l1] if x0 is None else x0, dtype=float)
    f = d2

    def flow(x_start, f_val, t):
        centre = np.array([0.0, k_gain * f_val])
        t = np.asarray(t, dtype=float)
        ea = np.exp(a * t)
        cs, sn = np.cos(b * t), np.sin(b * t)
        d = x_start - centre
        return np.stack([centre[0] + ea * (d[0] * cs - d[1] * sn),
                         centre[1] + ea * (d[0] * sn + d[1] * cs)], axis=-1)

    grid = np.linspace(0.0, t_end, n_samples + 1)
    step = math.pi / (64.0 * b)
    t0 = 0.0
    times, states, modes, switches = [0.0], [x.copy()], [f], []
    while t0 < t_end:
        # rising through l2 in mode d2, falling through l1 in mode d1
        level, sign = (l2, 1.0) if f == d2 else (l1, -1.0)
        g = lambda tau: sign * (flow(x, f, tau)[1] - level)
        tau, hit = 0.0, None
        g_prev = g(0.0)
        while t0 + tau < t_end:
            nxt = min(tau + step, t_end - t0)
            g_next = g(nxt)
            if g_prev < 0 <= g_next:
                hit = brentq(g, tau, nxt, xtol=1e-15)
                break
            tau, g_prev = nxt, g_next
        seg_end = t_end - t0 if hit is None else hit
        inner = grid[(grid > t0) & (grid < t0 + seg_end)]
        if inner.size:
            times.extend(inner)
            states.extend(flow(x, f, inner - t0))
            modes.extend([f] * inner.size)
        x = flow(x, f, seg_end)
        t0 += seg_end
        if hit is None:
            times.append(t_end)
            states.append(x.copy())
            modes.append(f)
            break
        f = d1 if f == d2 else d2
        switches.append(t0)
        times.append(t0)
        states.append(x.copy())
        modes.append(f)
    return HysteresisTrajectory(t=np.array(times), x=np.array(states), f=np.array(modes),
                                switch_times=switches)
