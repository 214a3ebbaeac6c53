"""Run configuration, trajectory CSV files, JSON reports and SVG projections.

Config files are YAML with four sections::

    system:  {a, b, c, alpha, gamma, variant}
    run:     {command, horizon, sample_dt, seeds, grid, rng_seed}
    output:  {csv, report, plot, projection}
    options: {...}          # command specific, see SECTION_KEYS["options"]

Unknown keys anywhere are rejected.
"""
from __future__ import annotations

import csv
import dataclasses
import enum
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from .core import ParameterError, PwlSystem, SystemParams, Variant
from .flow import Trajectory
from .lab import GridSpec

COMMANDS = ("simulate", "heteroclinic", "gamma-interval", "classify", "regions", "bounds",
            "transitory", "hidden-probe", "basin-scan", "hysteresis")
PROJECTIONS = ("x1x3", "x1x2", "x2x3", "z2z3")

SECTION_KEYS = {
    "system": {"a", "b", "c", "alpha", "gamma", "variant"},
    "run": {"command", "horizon", "sample_dt", "seeds", "grid", "rng_seed"},
    "output": {"csv", "report", "plot", "projection"},
    "options": {"k", "epsilon", "seeds_per_eq", "gamma_list", "n_samples", "label", "workers",
                "window", "margin", "k_gain", "l1", "l2", "d1", "d2", "t_end", "x0",
                "frame_atom"},
}
GRID_KEYS = {"center", "u", "v", "n_u", "n_v"}


class ConfigError(ValueError):
    """Malformed or invalid run configuration."""


@dataclass(frozen=True)
class OutputPaths:
    csv: str | None = None
    report: str | None = None
    plot: str | None = None
    projection: str = "x1x3"


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run needs; compares equal after a dump/parse round trip."""

    params: SystemParams
    command: str = "simulate"
    seeds: tuple[tuple[float, float, float], ...] = ((0.0, 0.0, 0.0),)
    grid: GridSpec | None = None
    horizon: float | None = None
    sample_dt: float | None = None
    rng_seed: int = 0
    output: OutputPaths = OutputPaths()
    options: dict = field(default_factory=dict)


def _key_lines(node, prefix=()) -> dict[tuple, int]:
    """1-based source line of every mapping key, keyed by its path."""
    out = {}
    if isinstance(node, yaml.MappingNode):
        for k, v in node.value:
            path = prefix + (k.value,)
            out[path] = k.start_mark.line + 1
            out.update(_key_lines(v, path))
    return out


def _vec3(value, where) -> tuple[float, float, float]:
    try:
        vec = tuple(float(v) for v in value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: expected three numbers, got {value!r}") from None
    if len(vec) != 3 or not all(math.isfinite(v) for v in vec):
        raise ConfigError(f"{where}: expected three finite numbers, got {value!r}")
    return vec


def parse_config(text: str) -> RunConfig:
    """Parse and validate a YAML run configuration.

    Raises
    ------
    ConfigError
        On YAML syntax errors, unknown sections or keys, wrong value types, or
        parameters the system family rejects (reported with their line).
    """
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML: {err}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping of sections")
    lines = _key_lines(root)

    def at(*path):
        line = lines.get(tuple(path))
        return f"line {line}" if line else "config"

    for section, body in data.items():
        if section not in SECTION_KEYS:
            raise ConfigError(f"{at(section)}: unknown section {section!r}")
        if body is None:
            data[section] = body = {}
        if not isinstance(body, dict):
            raise ConfigError(f"{at(section)}: section {section!r} must be a mapping")
        for key in body:
            if key not in SECTION_KEYS[section]:
                raise ConfigError(f"{at(section, key)}: unknown key {section}.{key}")

    sysd = data.get("system", {})
    try:
        params = SystemParams(
            a=float(sysd.get("a", 0.2)), b=float(sysd.get("b", 5.0)), c=float(sysd.get("c", -3.0)),
            alpha=float(sysd.get("alpha", 1.0)), gamma=float(sysd.get("gamma", 0.0)),
            variant=Variant(sysd.get("variant", Variant.TWO_ATOM.value)))
    except (TypeError, ValueError) as err:
        raise ConfigError(f"{at('system')}: {err}") from None
    try:
        params.validate()
    except ParameterError as err:
        # point at the most specific key the message names
        keys = [k for k in ("c", "a", "b", "alpha", "gamma", "variant") if k in sysd]
        culprit = next((k for k in keys if f"{k} " in str(err) or f"{k}=" in str(err)), None)
        where = at("system", culprit) if culprit else at("system")
        raise ConfigError(f"{where}: {err}") from None

    rund = data.get("run", {})
    command = rund.get("command", "simulate")
    if command not in COMMANDS:
        raise ConfigError(f"{at('run', 'command')}: unknown command {command!r}; "
                          f"choose from {', '.join(COMMANDS)}")
    seeds = ((0.0, 0.0, 0.0),)
    if "seeds" in rund:
        raw = rund["seeds"]
        if not isinstance(raw, list) or not raw:
            raise ConfigError(f"{at('run', 'seeds')}: seeds must be a non-empty list of 3-vectors")
        seeds = tuple(_vec3(s, at("run", "seeds")) for s in raw)
    grid = None
    if rund.get("grid") is not None:
        g = rund["grid"]
        if not isinstance(g, dict) or set(g) - GRID_KEYS or not GRID_KEYS <= set(g):
            raise ConfigError(f"{at('run', 'grid')}: grid needs exactly {sorted(GRID_KEYS)}")
        try:
            grid = GridSpec(center=_vec3(g["center"], at("run", "grid", "center")),
                            u=_vec3(g["u"], at("run", "grid", "u")),
                            v=_vec3(g["v"], at("run", "grid", "v")),
                            n_u=int(g["n_u"]), n_v=int(g["n_v"]))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"{at('run', 'grid')}: {err}") from None
        if grid.n_u < 1 or grid.n_v < 1:
            raise ConfigError(f"{at('run', 'grid')}: n_u and n_v must be >= 1")

    def positive(section, key, value):
        if value is None:
            return None
        try:
            v = float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{at(section, key)}: {key} must be a number") from None
        if not v > 0 or not math.isfinite(v):
            raise ConfigError(f"{at(section, key)}: {key} must be positive")
        return v

    horizon = positive("run", "horizon", rund.get("horizon"))
    sample_dt = positive("run", "sample_dt", rund.get("sample_dt"))
    rng_seed = rund.get("rng_seed", 0)
    if not isinstance(rng_seed, int) or isinstance(rng_seed, bool):
        raise ConfigError(f"{at('run', 'rng_seed')}: rng_seed must be an integer")

    outd = data.get("output", {})
    projection = outd.get("projection", "x1x3")
    if projection not in PROJECTIONS:
        raise ConfigError(f"{at('output', 'projection')}: projection must be one of {PROJECTIONS}")
    output = OutputPaths(csv=outd.get("csv"), report=outd.get("report"), plot=outd.get("plot"),
                         projection=projection)
    options = dict(data.get("options", {}))
    return RunConfig(params=params, command=command, seeds=seeds, grid=grid, horizon=horizon,
                     sample_dt=sample_dt, rng_seed=rng_seed, output=output, options=options)


def load_config(path: str | Path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err.strerror}") from None
    return parse_config(text)


def dump_config(cfg: RunConfig) -> str:
    """YAML text that :func:`parse_config` maps back to ``cfg``."""
    p = cfg.params
    run: dict[str, Any] = {"command": cfg.command, "seeds": [list(s) for s in cfg.seeds],
                           "rng_seed": cfg.rng_seed}
    if cfg.horizon is not None:
        run["horizon"] = cfg.horizon
    if cfg.sample_dt is not None:
        run["sample_dt"] = cfg.sample_dt
    if cfg.grid is not None:
        run["grid"] = {"center": list(cfg.grid.center), "u": list(cfg.grid.u),
                       "v": list(cfg.grid.v), "n_u": cfg.grid.n_u, "n_v": cfg.grid.n_v}
    out = {k: v for k, v in dataclasses.asdict(cfg.output).items() if v is not None}
    doc = {"system": {"a": p.a, "b": p.b, "c": p.c, "alpha": p.alpha, "gamma": p.gamma,
                      "variant": p.variant.value},
           "run": run, "output": out}
    if cfg.options:
        doc["options"] = cfg.options
    return yaml.safe_dump(doc, sort_keys=False)


# -- trajectory CSV -----------------------------------------------------------

CSV_COLUMNS = ("kind", "t", "x1", "x2", "x3", "atom", "plane")


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


@dataclass
class TrajectoryFile:
    """Parsed trajectory CSV: header metadata, sample rows and event rows."""

    header: dict[str, str]
    t: np.ndarray
    x: np.ndarray
    atoms: np.ndarray
    events: list[tuple[float, np.ndarray, int, str]]


def trajectory_csv(trajectory: Trajectory, params: SystemParams | None = None, seed=None,
                   sample_dt: float | None = None) -> str:
    """CSV text for ``trajectory``; floats carry 17 significant digits."""
    buf = io.StringIO()
    buf.write("# pwl-hidden trajectory v1\n")
    if params is not None:
        for name in ("a", "b", "c", "alpha", "gamma"):
            buf.write(f"# {name}={_fmt(getattr(params, name))}\n")
        buf.write(f"# variant={params.variant.value}\n")
    if seed is not None:
        buf.write("# seed=" + ",".join(_fmt(v) for v in seed) + "\n")
    if sample_dt is not None:
        buf.write(f"# sample_dt={_fmt(sample_dt)}\n")
    buf.write(f"# t_total={_fmt(trajectory.t_total)}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    if trajectory.segments:
        for t, x, atom in zip(trajectory.t, trajectory.x, trajectory.atoms):
            w.writerow(["S", _fmt(t), _fmt(x[0]), _fmt(x[1]), _fmt(x[2]), int(atom), ""])
    for ev in trajectory.events:
        w.writerow(["E", _fmt(ev.t), _fmt(ev.x[0]), _fmt(ev.x[1]), _fmt(ev.x[2]),
                    int(ev.to_atom), ev.plane.value])
    return buf.getvalue()


def _write_text(path, text: str):
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as err:
        raise OSError(err.errno, f"cannot write {path}: {err.strerror}") from None


def export_trajectory(trajectory: Trajectory, path, params: SystemParams | None = None, seed=None,
                      sample_dt: float | None = None) -> None:
    _write_text(path, trajectory_csv(trajectory, params, seed, sample_dt))


def parse_trajectory_csv(text: str) -> TrajectoryFile:
    header = {}
    body = []
    for line in text.splitlines():
        if line.startswith("#"):
            if "=" in line:
                k, v = line[1:].strip().split("=", 1)
                header[k] = v
        elif line:
            body.append(line)
    rows = list(csv.reader(body))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise ValueError("trajectory CSV is missing its column header")
    t, x, atoms, events = [], [], [], []
    for r in rows[1:]:
        vals = [float(v) for v in r[1:5]]
        if r[0] == "S":
            t.append(vals[0])
            x.append(vals[1:])
            atoms.append(int(r[5]))
        elif r[0] == "E":
            events.append((vals[0], np.array(vals[1:]), int(r[5]), r[6]))
        else:
            raise ValueError(f"unknown row kind {r[0]!r}")
    return TrajectoryFile(header=header, t=np.array(t), x=np.array(x).reshape(-1, 3),
                          atoms=np.array(atoms, dtype=int), events=events)


def read_trajectory(path) -> TrajectoryFile:
    return parse_trajectory_csv(Path(path).read_text())


# -- reports ------------------------------------------------------------------

def to_jsonable(obj):
    """Convert dataclasses, enums and numpy values into plain JSON types."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {f.name: to_jsonable(getattr(obj, f.name)) for f in dataclasses.fields(obj)}
    if isinstance(obj, enum.Enum):
        return obj.value
    if isinstance(obj, dict):
        return {str(to_jsonable(k)) if not isinstance(k, str) else k: to_jsonable(v)
                for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else str(v)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def write_report(report: dict, path) -> None:
    _write_text(path, json.dumps(to_jsonable(report), indent=2, sort_keys=False) + "\n")


# -- plots --------------------------------------------------------------------

_AXES = {"x1x3": (0, 2), "x1x2": (0, 1), "x2x3": (1, 2), "z2z3": (1, 2)}
_LABELS = {"x1x3": ("x1", "x3"), "x1x2": ("x1", "x2"), "x2x3": ("x2", "x3"),
           "z2z3": ("z2", "z3")}


def _project(points, projection, system, frame_atom):
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    if projection == "z2z3":
        pts = (pts - system.atom(frame_atom).equilibrium) @ system.frame.Qinv.T
    i, j = _AXES[projection]
    return pts[:, i], pts[:, j]


def emit_plot(data, projection: str, path, system: PwlSystem | None = None, regions=(),
              frame_atom: int | None = None, title: str | None = None) -> None:
    """Write an SVG projection of one or more trajectories.

    ``data`` is a :class:`Trajectory`, a list of ``(label, Trajectory)`` pairs,
    a basin scan or a hysteresis trajectory. Equilibria, switching-plane traces
    (where they project to lines) and region outlines are drawn when
    ``system`` is given. Output is byte-stable: no timestamps, fixed hash salt.
    """
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from .lab import BasinScan
    from .regions import HysteresisTrajectory

    if projection not in PROJECTIONS:
        raise ValueError(f"projection must be one of {PROJECTIONS} (got {projection!r})")
    if projection == "z2z3" and system is None and not isinstance(data, HysteresisTrajectory):
        raise ValueError("the z2z3 projection needs the system")
    if frame_atom is None and system is not None:
        frame_atom = 1 if system.variant is Variant.TWO_ATOM else 2
    plt.rcParams["svg.hashsalt"] = "pwl-hidden"
    fig, ax = plt.subplots(figsize=(6, 4.5))
    xl, yl = _LABELS[projection]
    if isinstance(data, HysteresisTrajectory):
        ax.plot(data.x[:, 0], data.x[:, 1], lw=0.8)
        ax.plot(*data.x[0], "k.", ms=4)
        xl, yl = "z2", "z3"
    elif isinstance(data, BasinScan):
        labels = sorted({lab.value for lab in data.labels})
        for lab in labels:
            sel = [k for k, l in enumerate(data.labels) if l.value == lab]
            px, py = _project(data.points[sel], projection, system, frame_atom)
            ax.plot(px, py, ".", ms=3, label=lab)
        ax.legend(fontsize=7)
    else:
        series = [("", data)] if isinstance(data, Trajectory) else list(data)
        for label, traj in series:
            if len(traj) == 0:
                continue
            px, py = _project(traj.x, projection, system, frame_atom)
            ax.plot(px, py, lw=0.4, label=label or None)
        if any(label for label, _ in series):
            ax.legend(fontsize=7)
    if system is not None and not isinstance(data, HysteresisTrajectory):
        ex, ey = _project(system.equilibria, projection, system, frame_atom)
        ax.plot(ex, ey, "k+", ms=7, mew=1.2)
        if projection == "x1x3":
            lo, hi = ax.get_xlim()
            for plane in system.planes:
                if plane.normal[2] == 0:
                    ax.axvline(plane.offset / plane.normal[0], color="0.6", lw=0.6, ls="--")
                    continue
                # half planes of the hidden layout only on their side of x1 = 0
                xs = np.array([lo if plane.x1_sign <= 0 else 0.0, hi if plane.x1_sign >= 0 else 0.0])
                ys = (plane.offset - plane.normal[0] * xs) / plane.normal[2]
                ax.plot(xs, ys, color="0.6", lw=0.6, ls="--")
            ax.set_xlim(lo, hi)
        elif projection == "x1x2" and system.variant is Variant.FOUR_ATOM_HIDDEN:
            ax.axvline(0.0, color="0.6", lw=0.6, ls="--")
        for reg in regions:
            ring = np.vstack([reg.corners, reg.corners[:1]])
            rx, ry = _project(ring, projection, system, frame_atom)
            ax.plot(rx, ry, color="k", lw=0.8)
    ax.set_xlabel(xl)
    ax.set_ylabel(yl)
    if title:
        ax.set_title(title, fontsize=9)
    fig.tight_layout()
    try:
        fig.savefig(path, format="svg", metadata={"Date": None})
    except OSError as err:
        raise OSError(err.errno, f"cannot write {path}: {err.strerror}") from None
    finally:
        plt.close(fig)

