"""Experiment drivers: capture detection, transitory sweeps, hidden-attractor probes, basin scans.

A trajectory counts as captured by the double-scroll attractor of a pair of
equilibria ``(i, j)`` once it stays inside the slab
``x1 in [x1(eq_i) - m, x1(eq_j) + m]`` for a whole window. The pairs are
``(1, 2)`` and, for four-atom systems, ``(3, 4)``. All runs stream closed-form
segments and stop as soon as the outcome is known.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (ParameterError, PlaneId, PreconditionError, PwlSystem, SystemParams, Variant,
                   build_system, stable_manifold)
from .flow import FORWARD, Trajectory, iter_segments, sample_segment
from .heteroclinic import gamma_interval

DEFAULT_HIDDEN_HORIZON = 5.0e4
DEFAULT_TRANSITORY_HORIZON = 5.0e4
DEFAULT_SCAN_HORIZON = 5.0e3


def default_sample_dt(system: PwlSystem) -> float:
    """64 samples per turn of the spiral."""
    return 2.0 * math.pi / system.params.b / 64.0


def candidate_pairs(system: PwlSystem) -> tuple[tuple[int, int], ...]:
    return ((1, 2),) if system.variant is Variant.TWO_ATOM else ((1, 2), (3, 4))


@dataclass(frozen=True)
class CaptureCriterion:
    """Slab-residency rule for being captured by a double-scroll attractor.

    Parameters
    ----------
    window : float
        Residency time required, in a.u.
    margin : float
        Slab margin ``m`` beyond the pair's equilibria along ``x1``.
    pairs : tuple of (int, int), optional
        Equilibrium pairs to test; ``None`` means every pair of the system.
    """

    window: float
    margin: float
    pairs: tuple[tuple[int, int], ...] | None = None

    def __post_init__(self):
        if not self.window > 0:
            raise PreconditionError(f"capture window must be > 0 (got {self.window})")
        if not self.margin > 0:
            raise PreconditionError(f"capture margin must be > 0 (got {self.margin})")

    @classmethod
    def default(cls, system: PwlSystem) -> "CaptureCriterion":
        """Twenty turns of the spiral and a margin of ``alpha``."""
        return cls(window=20.0 * 2.0 * math.pi / system.params.b, margin=system.params.alpha)

    def slabs(self, system: PwlSystem) -> dict[tuple[int, int], tuple[float, float]]:
        pairs = self.pairs or candidate_pairs(system)
        return {(i, j): (system.atom(i).equilibrium[0] - self.margin,
                         system.atom(j).equilibrium[0] + self.margin) for i, j in pairs}

    def describe(self) -> dict:
        return {"window": self.window, "margin": self.margin,
                "pairs": [list(p) for p in self.pairs] if self.pairs else "all"}


class CaptureMonitor:
    """Streaming form of :func:`detect_capture`; feed samples in time order."""

    def __init__(self, system: PwlSystem, criterion: CaptureCriterion):
        self.criterion = criterion
        self._slabs = criterion.slabs(system)
        self._since = {pair: None for pair in self._slabs}
        self.result: tuple[float, tuple[int, int]] | None = None

    def feed(self, t: np.ndarray, x1: np.ndarray) -> tuple[float, tuple[int, int]] | None:
        if self.result is not None:
            return self.result
        t = np.asarray(t, dtype=float)
        x1 = np.asarray(x1, dtype=float)
        found = []
        for pair, (lo, hi) in self._slabs.items():
            inside = (x1 >= lo) & (x1 <= hi)
            if not inside.size:
                continue
            since = self._since[pair]
            prev = np.concatenate([[since is not None], inside[:-1]])
            marks = np.where(inside & ~prev, t, -np.inf)
            base = -np.inf if since is None else since
            # start time of the inside run each sample belongs to
            start = np.maximum.accumulate(np.concatenate([[base], marks]))[1:]
            ok = inside & (t - start >= self.criterion.window)
            if ok.any():
                k = int(np.argmax(ok))
                found.append((float(t[k]), float(start[k]), pair))
            self._since[pair] = float(start[-1]) if inside[-1] else None
        if found:
            # the earliest completed window wins
            found.sort()
            self.result = (found[0][1], found[0][2])
        return self.result


def detect_capture(trajectory: Trajectory, criterion: CaptureCriterion,
                   system: PwlSystem) -> tuple[float, tuple[int, int]] | None:
    """Earliest time from which the trajectory stays in one pair's slab for a full window."""
    monitor = CaptureMonitor(system, criterion)
    return monitor.feed(trajectory.t, trajectory.x[:, 0])


def escape_radius(system: PwlSystem) -> float:
    """Spiral radius beyond which an orbit cannot come back.

    Out there one turn grows the radius by ``exp(2 pi a / b) - 1`` of itself,
    far more than the few switches per turn can move the rotation centre
    (each by at most the spread of the equilibria).
    """
    p = system.params
    return 1.0e3 * (p.gamma + p.alpha)


def _spiral_radius(system: PwlSystem, atom: int, x: np.ndarray) -> float:
    z = system.frame.Qinv @ (x - system.atom(atom).equilibrium)
    return math.hypot(z[1], z[2])


@dataclass
class RunSummary:
    """Streaming run statistics; ``t_end`` is where integration stopped.

    ``escaped`` is set when the orbit left every attractor for good (see
    :func:`escape_radius`).
    """

    capture: tuple[float, tuple[int, int]] | None
    t_end: float
    max_norm: float
    n_events: int
    sw23_times: list[float] = field(default_factory=list)
    n_grazes: int = 0
    escaped: bool = False


def run(system: PwlSystem, x0, horizon: float, criterion: CaptureCriterion | None = None,
        sample_dt: float | None = None, stop_on_capture: bool = True,
        record_sw23: bool = False) -> RunSummary:
    """Integrate from ``x0`` feeding the capture monitor, stopping early once captured."""
    criterion = criterion or CaptureCriterion.default(system)
    sample_dt = sample_dt or default_sample_dt(system)
    monitor = CaptureMonitor(system, criterion)
    max_norm = float(np.linalg.norm(x0))
    n_events = n_grazes = 0
    sw23 = []
    t_end = 0.0
    escaped = False
    r_escape = escape_radius(system)
    for rec in iter_segments(system, x0, horizon, FORWARD):
        ts, xs = sample_segment(system, rec, sample_dt)
        max_norm = max(max_norm, float(np.max(np.linalg.norm(xs, axis=1))))
        t_end = float(ts[-1])
        ev = rec.event
        if ev is not None:
            if ev.grazing:
                n_grazes += 1
            else:
                n_events += 1
                if record_sw23 and ev.plane is PlaneId.SW23:
                    sw23.append(ev.t)
        if monitor.feed(ts, xs[:, 0]) is not None and stop_on_capture:
            break
        if monitor.result is None and _spiral_radius(system, rec.atom, xs[-1]) > r_escape:
            escaped = True
            break
    return RunSummary(capture=monitor.result, t_end=t_end, max_norm=max_norm,
                      n_events=n_events, sw23_times=sw23, n_grazes=n_grazes, escaped=escaped)


@dataclass(frozen=True)
class TransitoryResult:
    """Capture outcome for one ``gamma``; ``t_capture`` is ``None`` if not captured."""

    gamma: float
    t_capture: float | None
    captured_pair: tuple[int, int] | None
    horizon: float

    @property
    def captured(self) -> bool:
        return self.t_capture is not None


def transitory_sweep(params_base: SystemParams, gamma_list: Sequence[float], x0=(0.0, 0.0, 0.0),
                     horizon: float = DEFAULT_TRANSITORY_HORIZON,
                     criterion: CaptureCriterion | None = None) -> list[TransitoryResult]:
    """Capture time of the trajectory from ``x0`` for each ``gamma`` (slanted four-atom systems).

    Raises
    ------
    ParameterError
        If some ``gamma`` does not exceed ``gamma_U`` (the sweep targets the
        bistable regime).
    """
    gi = gamma_interval(params_base.a, params_base.b, params_base.alpha)
    out = []
    for g in gamma_list:
        if g <= gi.gamma_U:
            raise ParameterError(f"gamma = {g} is not above gamma_U = {gi.gamma_U:.6g}")
        system = build_system(params_base.replace(gamma=g, variant=Variant.FOUR_ATOM_SLANTED))
        crit = criterion or CaptureCriterion.default(system)
        summary = run(system, np.asarray(x0, dtype=float), horizon, crit)
        cap = summary.capture
        out.append(TransitoryResult(gamma=float(g), t_capture=None if cap is None else cap[0],
                                    captured_pair=None if cap is None else cap[1],
                                    horizon=float(horizon)))
    return out


def strictly_increasing(results: Sequence[TransitoryResult]) -> bool:
    times = [r.t_capture for r in results]
    if any(t is None for t in times):
        return False
    return all(t1 < t2 for t1, t2 in zip(times, times[1:]))


class Verdict(str, enum.Enum):
    HIDDEN_ATTRACTOR_EVIDENCE = "HiddenAttractorEvidence"
    SELF_EXCITED_ONLY = "SelfExcitedOnly"
    INCONCLUSIVE = "Inconclusive"


@dataclass(frozen=True)
class SeedOutcome:
    eq: int
    x0: np.ndarray
    capture: tuple[float, tuple[int, int]] | None


@dataclass(frozen=True)
class HiddenVerdict:
    """Evidence for a hidden attractor.

    ``persists`` is true when the origin trajectory keeps crossing the central
    plane throughout the last tenth of the horizon, with no gap longer than the
    capture window. ``equilibrium_basins_disjoint`` is true when every seed on
    the small spheres around the equilibria is captured by a self-excited pair.
    """

    persists: bool
    equilibrium_basins_disjoint: bool
    verdict: Verdict
    final_window_crossings: int
    max_crossing_gap: float
    origin_capture: tuple[float, tuple[int, int]] | None
    seeds: list[SeedOutcome]
    horizon: float

    @property
    def n_unresolved(self) -> int:
        return sum(s.capture is None for s in self.seeds)


def equilibrium_seeds(system: PwlSystem, epsilon: float, seeds_per_eq: int,
                      rng_seed: int = 0) -> list[tuple[int, np.ndarray]]:
    """Deterministic points on spheres of radius ``epsilon`` around each equilibrium.

    Points within 1e-6 of an equilibrium's stable line are redrawn.
    """
    if not epsilon > 0:
        raise PreconditionError(f"epsilon must be > 0 (got {epsilon})")
    if seeds_per_eq < 1:
        raise PreconditionError(f"seeds_per_eq must be >= 1 (got {seeds_per_eq})")
    rng = np.random.default_rng(rng_seed)
    out = []
    for atom in system.atoms:
        line = stable_manifold(system, atom.index)
        count = 0
        while count < seeds_per_eq:
            d = rng.normal(size=3)
            x = atom.equilibrium + epsilon * d / np.linalg.norm(d)
            if line.distance(x) < 1e-6:
                continue
            out.append((atom.index, x))
            count += 1
    return out


def _persistence(times: Sequence[float], horizon: float, window: float) -> tuple[bool, int, float]:
    start = 0.9 * horizon
    late = [t for t in times if t >= start]
    if not late:
        return False, 0, horizon - start
    edges = np.concatenate([[start], late, [horizon]])
    gap = float(np.max(np.diff(edges)))
    return gap <= window, len(late), gap


def _seed_capture(args):
    system, x0, horizon, criterion = args
    return run(system, x0, horizon, criterion).capture


def _map(fn, items, workers):
    if workers and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items, chunksize=1))
    return [fn(item) for item in items]


def hidden_attractor_probe(system: PwlSystem, epsilon: float = 0.01,
                           horizon: float = DEFAULT_HIDDEN_HORIZON, seeds_per_eq: int = 8,
                           criterion: CaptureCriterion | None = None, rng_seed: int = 0,
                           workers: int | None = None) -> HiddenVerdict:
    """Look for an attractor reached from the origin but from no equilibrium neighbourhood.

    The origin run is integrated over the full horizon; each equilibrium seed
    runs until captured or until the horizon.
    """
    if not system.variant.four_atom:
        raise PreconditionError("hidden_attractor_probe needs a four-atom system")
    criterion = criterion or CaptureCriterion.default(system)
    seeds = equilibrium_seeds(system, epsilon, seeds_per_eq, rng_seed)
    origin = run(system, np.zeros(3), horizon, criterion, stop_on_capture=False, record_sw23=True)
    persists, n_late, gap = _persistence(origin.sw23_times, horizon, criterion.window)
    captures = _map(_seed_capture, [(system, x, horizon, criterion) for _, x in seeds], workers)
    outcomes = [SeedOutcome(eq=i, x0=x, capture=c) for (i, x), c in zip(seeds, captures)]
    disjoint = all(o.capture is not None for o in outcomes)
    if not disjoint:
        verdict = Verdict.INCONCLUSIVE
    elif persists:
        verdict = Verdict.HIDDEN_ATTRACTOR_EVIDENCE
    else:
        verdict = Verdict.SELF_EXCITED_ONLY
    return HiddenVerdict(persists=persists, equilibrium_basins_disjoint=disjoint, verdict=verdict,
                         final_window_crossings=n_late, max_crossing_gap=gap,
                         origin_capture=origin.capture, seeds=outcomes, horizon=float(horizon))


class BasinLabel(str, enum.Enum):
    ATTRACTOR_1 = "attractor1"
    ATTRACTOR_2 = "attractor2"
    PERSISTENT = "persistent"
    ESCAPED = "escaped"
    UNRESOLVED = "unresolved"

    def mirror(self) -> "BasinLabel":
        swap = {BasinLabel.ATTRACTOR_1: BasinLabel.ATTRACTOR_2,
                BasinLabel.ATTRACTOR_2: BasinLabel.ATTRACTOR_1}
        return swap.get(self, self)


@dataclass(frozen=True)
class GridSpec:
    """Planar grid ``center + s u + r v`` with ``s, r`` in ``[-1, 1]``."""

    center: tuple[float, float, float]
    u: tuple[float, float, float]
    v: tuple[float, float, float]
    n_u: int
    n_v: int

    def points(self) -> np.ndarray:
        s = np.linspace(-1.0, 1.0, self.n_u) if self.n_u > 1 else np.zeros(1)
        r = np.linspace(-1.0, 1.0, self.n_v) if self.n_v > 1 else np.zeros(1)
        S, R = np.meshgrid(s, r, indexing="ij")
        c, u, v = (np.asarray(w, dtype=float) for w in (self.center, self.u, self.v))
        return (c + S[..., None] * u + R[..., None] * v).reshape(-1, 3)


@dataclass(frozen=True)
class BasinScan:
    points: np.ndarray
    labels: list[BasinLabel]
    t_capture: list[float | None]
    horizon: float

    def counts(self) -> dict[str, int]:
        out = {lab.value: 0 for lab in BasinLabel}
        for lab in self.labels:
            out[lab.value] += 1
        return out


def _label_seed(args):
    system, x0, horizon, criterion = args
    summary = run(system, x0, horizon, criterion, record_sw23=True)
    if summary.capture is not None:
        pair = summary.capture[1]
        label = BasinLabel.ATTRACTOR_1 if pair == (1, 2) else BasinLabel.ATTRACTOR_2
        return label, summary.capture[0]
    if summary.escaped:
        return BasinLabel.ESCAPED, None
    persists, _, _ = _persistence(summary.sw23_times, horizon, criterion.window)
    return (BasinLabel.PERSISTENT if persists else BasinLabel.UNRESOLVED), None


def basin_scan(system: PwlSystem, grid, horizon: float = DEFAULT_SCAN_HORIZON,
               criterion: CaptureCriterion | None = None, workers: int | None = None) -> BasinScan:
    """Label each seed by the attractor that captures it.

    ``grid`` is a :class:`GridSpec` or an ``(n, 3)`` array of points. Seeds
    that are never captured but keep crossing the central plane in the last
    tenth of the horizon are labelled persistent; seeds whose orbit runs off
    to infinity are labelled escaped.
    """
    criterion = criterion or CaptureCriterion.default(system)
    pts = grid.points() if isinstance(grid, GridSpec) else np.atleast_2d(np.asarray(grid, float))
    if pts.ndim != 2 or pts.shape[1] != 3 or not np.all(np.isfinite(pts)):
        raise PreconditionError("basin_scan needs a finite (n, 3) array of seeds")
    results = _map(_label_seed, [(system, x, horizon, criterion) for x in pts], workers)
    return BasinScan(points=pts, labels=[r[0] for r in results],
                     t_capture=[r[1] for r in results], horizon=float(horizon))
