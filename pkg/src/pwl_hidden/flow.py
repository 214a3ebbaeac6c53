"""Exact propagation inside atoms and event-driven switching between them.

Inside atom ``i`` the flow is affine, so with ``z = Qinv (x - x_eq)`` it
decouples into ``z1' = c z1`` and a planar spiral ``(z2, z3)' = [[a, -b], [b, a]] (z2, z3)``.
Nothing here integrates numerically: trajectories are chained closed-form
segments, and switching times are located by bracketing the bounding-plane
functions on a grid of ``pi / (16 b)`` and refining with Brent's method.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np
from scipy.optimize import brentq

from .core import PlaneId, PwlSystem, atom_of

FORWARD = 1
BACKWARD = -1

# bracketing grid points evaluated per vectorised chunk
_CHUNK = 96


class EventStormError(RuntimeError):
    """Too many switching events; signals chattering or a sliding mode."""


class DivergenceError(RuntimeError):
    """The trajectory grew past ``DIVERGENCE_LIMIT``; it escapes every attractor."""


# far below float overflow of exp(a t) yet far beyond any attractor
DIVERGENCE_LIMIT = 1e100


@dataclass(frozen=True)
class ZCoords:
    """Equilibrium-relative eigen-coordinates ``z = Qinv (x - x_eq)`` of one atom."""

    z: np.ndarray
    atom: int


@dataclass(frozen=True)
class CrossingEvent:
    """A switching event at time ``t`` (relative to the segment start).

    ``grazing`` marks a tangential touch of ``plane``: the trajectory reaches the
    plane without crossing it and stays in ``from_atom`` (``to_atom == from_atom``).
    """

    t: float
    x: np.ndarray
    plane: PlaneId
    from_atom: int
    to_atom: int
    grazing: bool = False


@dataclass
class Segment:
    atom: int
    t: np.ndarray
    x: np.ndarray


@dataclass
class Trajectory:
    """Samples grouped by atom, separated by switching events.

    ``events`` hold absolute times. Consecutive segments share their boundary
    sample (the event point).
    """

    segments: list[Segment]
    events: list[CrossingEvent]
    t_total: float
    grazes: list[CrossingEvent] = field(default_factory=list)

    @property
    def t(self) -> np.ndarray:
        return self._stack("t")

    @property
    def x(self) -> np.ndarray:
        return self._stack("x")

    @property
    def atoms(self) -> np.ndarray:
        parts = [np.full(len(s.t) - (k > 0), s.atom) for k, s in enumerate(self.segments)]
        return np.concatenate(parts) if parts else np.zeros(0, dtype=int)

    def _stack(self, name):
        parts = [getattr(s, name)[(k > 0):] for k, s in enumerate(self.segments)]
        if not parts:
            return np.zeros((0, 3)) if name == "x" else np.zeros(0)
        return np.concatenate(parts)

    def __len__(self):
        return len(self.t)


def to_z(system: PwlSystem, atom: int, x) -> ZCoords:
    eq = system.atom(atom).equilibrium
    return ZCoords(z=system.frame.Qinv @ (np.asarray(x, dtype=float) - eq), atom=atom)


def from_z(system: PwlSystem, zc: ZCoords) -> np.ndarray:
    return system.frame.Q @ zc.z + system.atom(zc.atom).equilibrium


def _z_at(system: PwlSystem, z0: np.ndarray, t):
    """Closed-form ``z(t)`` for scalar or array ``t``; returns shape ``(3, len(t))``."""
    a, b = system.frame.spiral
    c = system.frame.lambda1
    t = np.asarray(t, dtype=float)
    ea = np.exp(a * t)
    cs, sn = np.cos(b * t), np.sin(b * t)
    return np.array([z0[0] * np.exp(c * t),
                     ea * (z0[1] * cs - z0[2] * sn),
                     ea * (z0[1] * sn + z0[2] * cs)])


def _zdot_at(system: PwlSystem, z0: np.ndarray, t):
    a, b = system.frame.spiral
    c = system.frame.lambda1
    z = _z_at(system, z0, t)
    return np.array([c * z[0], a * z[1] - b * z[2], b * z[1] + a * z[2]])


def flow_in_atom(system: PwlSystem, atom: int, x0, t):
    """State reached after time ``t`` under the affine field of ``atom``.

    Uses ``x(t) = x_eq + Q E(t) Qinv (x0 - x_eq)``; valid for negative ``t``.
    An array ``t`` gives an array of states with shape ``(len(t), 3)``.
    """
    eq = system.atom(atom).equilibrium
    z0 = system.frame.Qinv @ (np.asarray(x0, dtype=float) - eq)
    z = _z_at(system, z0, t)
    return (system.frame.Q @ z).T + eq


class _AtomFlow:
    """Bounding-plane functions of one atom along the closed-form flow from ``x0``."""

    def __init__(self, system: PwlSystem, atom: int, x0, direction: int):
        self.system = system
        self.atom = atom
        self.direction = direction
        spec = system.atom(atom)
        self.eq = spec.equilibrium
        self.z0 = system.frame.Qinv @ (np.asarray(x0, dtype=float) - self.eq)
        self.faces = spec.bounding_planes
        H = np.array([side * plane.normal for plane, side in self.faces])
        h0 = np.array([-side * plane.offset for plane, side in self.faces])
        self.HQ = H @ system.frame.Q
        self.hq0 = H @ self.eq + h0

    def h(self, tau):
        z = _z_at(self.system, self.z0, self.direction * np.asarray(tau, dtype=float))
        return (self.hq0[:, None] + self.HQ @ z.reshape(3, -1)).reshape((len(self.faces),) + np.shape(tau))

    def dh(self, tau):
        zd = _zdot_at(self.system, self.z0, self.direction * np.asarray(tau, dtype=float))
        return self.direction * (self.HQ @ zd.reshape(3, -1)).reshape((len(self.faces),) + np.shape(tau))

    def x(self, tau) -> np.ndarray:
        return self.eq + self.system.frame.Q @ _z_at(self.system, self.z0, self.direction * tau)


def crossing_tolerance(system: PwlSystem) -> float:
    return 1e-12 * system.params.scale


def bracket_step(system: PwlSystem) -> float:
    return math.pi / (16.0 * system.params.b)


def _neighbour(system: PwlSystem, plane, side: int, x: np.ndarray) -> int:
    nudge = 1e-9 * max(1.0, float(np.max(np.abs(x))))
    unit = plane.normal / np.linalg.norm(plane.normal)
    return atom_of(system, x - side * nudge * unit)


def first_crossing(system: PwlSystem, atom: int, x0, t_max: float,
                   direction: int = FORWARD) -> CrossingEvent | None:
    """Earliest exit of the closed-form flow of ``atom`` through one of its faces.

    Scans ``|t| in (0, t_max]`` on a grid of ``pi / (16 b)``, refines sign changes
    with Brent's method and also inspects interior minima of each face function,
    so a double crossing inside one bracket is not stepped over. A minimum that
    touches a face within tolerance without crossing is returned as a grazing
    event. A start point on a face the flow points out of exits at ``t = 0``;
    other roots at ``t = 0`` are ignored. Returns ``None`` if the flow stays in
    the atom up to ``t_max``. Event times carry the sign of ``direction``.
    """
    leaving = _leaving_faces(system, atom, x0, direction)
    if leaving:
        plane, side = leaving[0]
        x = np.asarray(x0, dtype=float).copy()
        return CrossingEvent(t=0.0, x=x, plane=plane.id, from_atom=atom,
                             to_atom=_neighbour(system, plane, side, x))
    flow = _AtomFlow(system, atom, x0, direction)
    tol = crossing_tolerance(system)
    step = bracket_step(system)
    h_start = flow.h(np.array([0.0]))[:, 0]
    on_face = np.abs(h_start) <= tol
    tau0 = 0.0
    h_prev = h_start
    dh_prev = flow.dh(np.array([0.0]))[:, 0]
    while tau0 < t_max:
        n = min(_CHUNK, int(math.ceil((t_max - tau0) / step)))
        taus = tau0 + step * np.arange(1, n + 1)
        taus[-1] = min(taus[-1], t_max)
        H = flow.h(taus)
        D = flow.dh(taus)
        Hall = np.concatenate([h_prev[:, None], H], axis=1)
        Dall = np.concatenate([dh_prev[:, None], D], axis=1)
        Tall = np.concatenate([[tau0], taus])
        if tau0 == 0.0 and on_face.any():
            # ignore the root at t = 0 for faces the start point sits on
            Hall[on_face, 0] = np.where(Dall[on_face, 0] >= 0, 1.0, Hall[on_face, 0])
        cross = (Hall[:, :-1] > 0) & (Hall[:, 1:] <= 0)
        dip = (Hall[:, :-1] > 0) & (Hall[:, 1:] > 0) & (Dall[:, :-1] < 0) & (Dall[:, 1:] > 0)
        hits = cross | dip
        if hits.any():
            cols = np.nonzero(hits.any(axis=0))[0]
            for k in cols:
                found = _refine_bracket(flow, Tall[k], Tall[k + 1], cross[:, k], dip[:, k], tol)
                if found is not None:
                    return _make_event(system, flow, found, direction)
        tau0 = taus[-1]
        h_prev = H[:, -1]
        dh_prev = D[:, -1]
    return None


def _refine_bracket(flow: _AtomFlow, lo: float, hi: float, cross, dip, tol):
    candidates = []
    for j in np.nonzero(cross | dip)[0]:
        fj = lambda tau, j=j: float(flow.h(np.array([tau]))[j, 0])
        if cross[j]:
            root = brentq(fj, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            candidates.append((root, j, False))
            continue
        dfj = lambda tau, j=j: float(flow.dh(np.array([tau]))[j, 0])
        t_min = brentq(dfj, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        h_min = fj(t_min)
        if h_min < -tol:
            root = brentq(fj, lo, t_min, xtol=1e-15, rtol=4 * np.finfo(float).eps)
            candidates.append((root, j, False))
        elif h_min <= tol:
            candidates.append((t_min, j, True))
    if not candidates:
        return None
    # earliest root; ties broken by lower plane id
    candidates.sort(key=lambda c: (c[0], flow.faces[c[1]][0].id.value))
    best = candidates[0]
    ties = [c for c in candidates if abs(c[0] - best[0]) < 1e-13]
    ties.sort(key=lambda c: flow.faces[c[1]][0].id.value)
    return ties[0]


def _make_event(system, flow: _AtomFlow, found, direction) -> CrossingEvent:
    tau, j, grazing = found
    plane, side = flow.faces[j]
    x = flow.x(tau)
    to_atom = flow.atom if grazing else _neighbour(system, plane, side, x)
    if to_atom == flow.atom and not grazing:
        # exit through a face whose far side is ambiguous at this precision
        to_atom = _neighbour(system, plane, side, x + (x - flow.x(tau * (1 - 1e-9))))
    return CrossingEvent(t=direction * float(tau), x=x, plane=plane.id,
                         from_atom=flow.atom, to_atom=int(to_atom), grazing=grazing)


def _leaving_faces(system: PwlSystem, atom: int, x, direction: int):
    """Faces of ``atom`` that ``x`` lies on while the flow points clearly out of the atom.

    Outward speeds at round-off level (grazing contacts) do not count.
    """
    tol = crossing_tolerance(system)
    out = []
    vel = direction * system.field(atom, x)
    min_speed = 1e-9 * float(np.linalg.norm(vel))
    for plane, side in system.atom(atom).bounding_planes:
        if abs(plane.value(x)) <= tol and side * (plane.normal @ vel) < -min_speed:
            out.append((plane, side))
    return sorted(out, key=lambda ps: ps[0].id.value)


@dataclass
class _SegmentRecord:
    atom: int
    t_start: float
    x_start: np.ndarray
    duration: float
    event: CrossingEvent | None


def iter_segments(system: PwlSystem, x0, t_end: float, direction: int = FORWARD,
                  max_events: int = 10**6, atom: int | None = None) -> Iterator[_SegmentRecord]:
    """Yield consecutive closed-form segments covering ``[0, t_end]``.

    Each record carries the atom, absolute start time, start point, duration and
    the event that ends it (``None`` for the final segment). Grazing contacts end
    a segment without changing the atom.
    """
    x = np.asarray(x0, dtype=float).copy()
    current = atom_of(system, x) if atom is None else atom
    t = 0.0
    n_events = 0
    for _ in range(4):
        leaving = _leaving_faces(system, current, x, direction)
        if not leaving:
            break
        plane, side = leaving[0]
        nxt = _neighbour(system, plane, side, x)
        ev = CrossingEvent(t=0.0, x=x.copy(), plane=plane.id, from_atom=current, to_atom=nxt)
        yield _SegmentRecord(current, 0.0, x.copy(), 0.0, ev)
        current = nxt
    while t < t_end:
        if not np.max(np.abs(x)) < DIVERGENCE_LIMIT:
            raise DivergenceError(f"trajectory diverged: |x| = {np.max(np.abs(x)):.3g} at t = {t:g}")
        ev = first_crossing(system, current, x, t_end - t, direction)
        if ev is None:
            yield _SegmentRecord(current, t, x, t_end - t, None)
            return
        dur = abs(ev.t)
        absolute = CrossingEvent(t=direction * (t + dur), x=ev.x, plane=ev.plane,
                                 from_atom=ev.from_atom, to_atom=ev.to_atom, grazing=ev.grazing)
        yield _SegmentRecord(current, t, x, dur, absolute)
        n_events += 1
        if n_events > max_events:
            raise EventStormError(
                f"more than {max_events} switching events before t = {t + dur:g}; "
                f"last at x = {ev.x} on {ev.plane.value}"
            )
        t += dur
        x = ev.x
        current = ev.to_atom


def sample_segment(system: PwlSystem, rec: _SegmentRecord, sample_dt: float,
                   direction: int = FORWARD):
    """Sample times (absolute, on the global ``sample_dt`` grid) and states of one segment."""
    t0, t1 = rec.t_start, rec.t_start + rec.duration
    k0 = math.floor(t0 / sample_dt) + 1
    k1 = math.ceil(t1 / sample_dt)
    grid = sample_dt * np.arange(k0, k1)
    grid = grid[(grid > t0) & (grid < t1)]
    ts = np.concatenate([[t0], grid, [t1]]) if rec.duration > 0 else np.array([t0])
    xs = flow_in_atom(system, rec.atom, rec.x_start, direction * (ts - t0))
    if rec.event is not None and rec.duration > 0:
        xs[-1] = rec.event.x
    return direction * ts, xs


def integrate(system: PwlSystem, x0, t_end: float, sample_dt: float,
              direction: int = FORWARD, max_events: int = 10**6) -> Trajectory:
    """Switched trajectory from ``x0`` over ``[0, t_end]`` (or ``[-t_end, 0]`` backwards).

    Samples fall on multiples of ``sample_dt`` plus every event point.
    """
    if t_end <= 0:
        raise ValueError(f"t_end must be positive (got {t_end})")
    if sample_dt <= 0:
        raise ValueError(f"sample_dt must be positive (got {sample_dt})")
    segments, events, grazes = [], [], []
    for rec in iter_segments(system, x0, t_end, direction, max_events):
        ts, xs = sample_segment(system, rec, sample_dt, direction)
        if rec.duration > 0 or not segments:
            if segments and segments[-1].atom == rec.atom:
                last = segments[-1]
                last.t = np.concatenate([last.t, ts[1:]])
                last.x = np.concatenate([last.x, xs[1:]])
            else:
                segments.append(Segment(atom=rec.atom, t=ts, x=xs))
        if rec.event is not None:
            (grazes if rec.event.grazing else events).append(rec.event)
            if not rec.event.grazing and rec.duration == 0 and segments:
                # zero-length hop at the start: the first sample belongs to the new atom
                if len(segments) == 1 and len(segments[0].t) == 1:
                    segments[0].atom = rec.event.to_atom
    return Trajectory(segments=segments, events=events, t_total=float(t_end), grazes=grazes)


def rk4_oracle(system: PwlSystem, atom: int, x0, t: float, h: float = 1e-5) -> np.ndarray:
    """Classical RK4 on ``x' = A x + f B`` with fixed ``atom``; a test oracle only."""
    A = system.A
    fB = system.atom(atom).f_value * system.B
    x = np.asarray(x0, dtype=float).copy()
    n = max(1, int(round(abs(t) / h)))
    dt = t / n
    for _ in range(n):
        k1 = A @ x + fB
        k2 = A @ (x + 0.5 * dt * k1) + fB
        k3 = A @ (x + 0.5 * dt * k2) + fB
        k4 = A @ (x + dt * k3) + fB
        x = x + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    return x
