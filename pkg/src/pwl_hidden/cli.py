"""Command-line entry point ``pwl-hidden``.

Exit codes: 0 success, 2 config error, 3 numeric or precondition error,
4 unresolved or inconclusive result.
"""
from __future__ import annotations

import argparse
import dataclasses
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import heteroclinic as het
from . import lab, regions
from .cli_io import (COMMANDS, PROJECTIONS, ConfigError, OutputPaths, RunConfig, emit_plot,
                     export_trajectory, load_config, to_jsonable, write_report)
from .core import ParameterError, PreconditionError, SystemParams, Variant, build_system
from .flow import DivergenceError, EventStormError, integrate

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_UNRESOLVED = 0, 2, 3, 4

DEFAULT_HORIZON = {"simulate": 200.0, "regions": 200.0, "transitory": lab.DEFAULT_TRANSITORY_HORIZON,
                   "hidden-probe": lab.DEFAULT_HIDDEN_HORIZON, "basin-scan": lab.DEFAULT_SCAN_HORIZON}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pwl-hidden",
                                description="Piecewise-linear double-scroll and hidden-attractor lab.")
    p.add_argument("command", nargs="?", choices=COMMANDS,
                   help="what to run (defaults to run.command of the config)")
    p.add_argument("--config", help="YAML run configuration")
    for name in ("a", "b", "c", "alpha", "gamma"):
        p.add_argument(f"--{name}", type=float, help=f"override system.{name}")
    p.add_argument("--variant", choices=[v.value for v in Variant], help="override system.variant")
    p.add_argument("--horizon", type=float, help="integration horizon in a.u.")
    p.add_argument("--seed", type=int, help="RNG seed for sampled seeds (default 0)")
    p.add_argument("--x0", help="initial condition 'x1,x2,x3' (replaces run.seeds)")
    p.add_argument("--projection", choices=PROJECTIONS, help="plot projection")
    p.add_argument("--out", help="output directory; files are named after the command")
    p.add_argument("--workers", type=int, help="process pool size for seed-parallel commands")
    return p


def resolve_config(args) -> RunConfig:
    """Merge the config file (if any) with flag overrides and re-validate."""
    cfg = load_config(args.config) if args.config else RunConfig(params=SystemParams(0.2, 5, -3, 1))
    p = cfg.params
    overrides = {k: getattr(args, k) for k in ("a", "b", "c", "alpha", "gamma")
                 if getattr(args, k) is not None}
    if args.variant:
        overrides["variant"] = Variant(args.variant)
    if overrides:
        p = p.replace(**overrides)
        try:
            p.validate()
        except ParameterError as err:
            raise ConfigError(f"command line: {err}") from None
    changes = {"params": p}
    if args.command:
        changes["command"] = args.command
    if args.horizon is not None:
        if not args.horizon > 0:
            raise ConfigError("command line: --horizon must be positive")
        changes["horizon"] = args.horizon
    if args.seed is not None:
        changes["rng_seed"] = args.seed
    if args.x0:
        try:
            x0 = tuple(float(v) for v in args.x0.split(","))
        except ValueError:
            raise ConfigError(f"command line: bad --x0 {args.x0!r}") from None
        if len(x0) != 3:
            raise ConfigError("command line: --x0 needs three comma-separated numbers")
        changes["seeds"] = (x0,)
    out = cfg.output
    if args.projection:
        out = dataclasses.replace(out, projection=args.projection)
    if args.out:
        d = Path(args.out)
        d.mkdir(parents=True, exist_ok=True)
        stem = changes.get("command", cfg.command)
        out = OutputPaths(csv=out.csv or str(d / f"{stem}.csv"),
                          report=out.report or str(d / f"{stem}.json"),
                          plot=out.plot or str(d / f"{stem}.svg"), projection=out.projection)
    changes["output"] = out
    if args.workers is not None:
        changes["options"] = {**cfg.options, "workers": args.workers}
    return dataclasses.replace(cfg, **changes)


def _horizon(cfg: RunConfig):
    return cfg.horizon if cfg.horizon is not None else DEFAULT_HORIZON.get(cfg.command)


def _criterion(cfg, system):
    crit = lab.CaptureCriterion.default(system)
    o = cfg.options
    if "window" in o or "margin" in o:
        crit = lab.CaptureCriterion(window=float(o.get("window", crit.window)),
                                    margin=float(o.get("margin", crit.margin)))
    return crit


def run_command(cfg: RunConfig) -> tuple[dict, int]:
    """Execute ``cfg`` and return ``(report, exit_code)``; writes requested outputs."""
    handler = _HANDLERS[cfg.command]
    report, status = handler(cfg)
    report = {"command": cfg.command, "params": cfg.params, **report}
    if cfg.output.report:
        write_report(report, cfg.output.report)
    return report, status


def _cmd_simulate(cfg):
    system = build_system(cfg.params)
    horizon = _horizon(cfg)
    dt = cfg.sample_dt or lab.default_sample_dt(system)
    crit = _criterion(cfg, system)
    runs, trajs = [], []
    for k, seed in enumerate(cfg.seeds):
        tr = integrate(system, seed, horizon, dt)
        trajs.append((f"seed {k}", tr))
        cap = lab.detect_capture(tr, crit, system)
        runs.append({"seed": seed, "n_events": len(tr.events), "n_grazes": len(tr.grazes),
                     "n_samples": len(tr), "max_norm": float(np.max(np.linalg.norm(tr.x, axis=1))),
                     "final_state": tr.x[-1], "final_atom": int(tr.atoms[-1]),
                     "capture": None if cap is None else {"t": cap[0], "pair": cap[1]}})
        if cfg.output.csv:
            path = cfg.output.csv if len(cfg.seeds) == 1 else _suffixed(cfg.output.csv, k)
            export_trajectory(tr, path, cfg.params, seed, dt)
    if cfg.output.plot:
        emit_plot(trajs[0][1] if len(trajs) == 1 else trajs, cfg.output.projection, cfg.output.plot,
                  system, frame_atom=cfg.options.get("frame_atom"))
    return {"horizon": horizon, "sample_dt": dt, "capture_criterion": crit.describe(),
            "runs": runs}, EXIT_OK


def _suffixed(path, k):
    p = Path(path)
    return str(p.with_name(f"{p.stem}_{k}{p.suffix}"))


def _cmd_heteroclinic(cfg):
    system = build_system(cfg.params)
    k = int(cfg.options.get("k", 50))
    pairs = ((1, 2), (2, 1)) if system.variant is Variant.TWO_ATOM else het.CANDIDATE_ORBITS
    if system.variant is Variant.FOUR_ATOM_HIDDEN:
        raise PreconditionError("heteroclinic seeds are defined for the two-atom and slanted layouts")
    orbits = []
    for i, j in pairs:
        spec = het.heteroclinic_spec(system, i, j, k)
        ok, err = het.verify_heteroclinic(system, spec, cfg.horizon)
        orbits.append({"from_eq": i, "to_eq": j, "seed": spec.x0, "target": spec.target,
                       "verified": ok, "closure_error": err})
    if cfg.output.plot:
        horizon = 2.0 * k * math.pi / system.params.b * 1.05
        trajs = [(f"{o['from_eq']}->{o['to_eq']}",
                  integrate(system, o["seed"], horizon, lab.default_sample_dt(system)))
                 for o in orbits]
        emit_plot(trajs, cfg.output.projection, cfg.output.plot, system)
    return {"k": k, "orbits": orbits}, EXIT_OK


def _cmd_gamma_interval(cfg):
    p = cfg.params
    gi = het.gamma_interval(p.a, p.b, p.alpha)
    rep = {"interval": gi}
    if p.variant.four_atom:
        rep["regime"] = het.analytic_regime(p.gamma, gi)
    return rep, EXIT_OK


def _cmd_classify(cfg):
    system = build_system(cfg.params)
    census = het.classify_structure(system, k=int(cfg.options.get("k", 50)), horizon=cfg.horizon,
                                    workers=cfg.options.get("workers"))
    status = EXIT_OK if census.consistent else EXIT_UNRESOLVED
    return {"census": census, "consistent": census.consistent}, status


def _cmd_regions(cfg):
    system = build_system(cfg.params)
    r1, r2 = regions.region(system, "R1"), regions.region(system, "R2")
    rep = {"tangency_lines": regions.tangency_lines(system), "key_points": regions.key_points(system),
           "regions": [r1, r2],
           "regime_violations": regions.regime_violations(cfg.params)}
    status = EXIT_OK
    n = int(cfg.options.get("n_samples", 7))
    label = cfg.options.get("label", "R1")
    res = regions.verify_region_mapping(system, label, n, _horizon(cfg), cfg.rng_seed,
                                        _criterion(cfg, system))
    rep["mapping"] = {"from": label, "fractions": res.as_tuple(), "seeds": res.seeds,
                      "outcomes": res.outcomes, "times": res.times}
    if res.fraction_unresolved > 0:
        status = EXIT_UNRESOLVED
    if cfg.output.plot:
        dt = lab.default_sample_dt(system)
        trajs = [(f"seed {k}", integrate(system, x, t or _horizon(cfg), dt))
                 for k, (x, t) in enumerate(zip(res.seeds, res.times))]
        emit_plot(trajs, cfg.output.projection, cfg.output.plot, system, regions=[r1, r2])
    return rep, status


def _cmd_bounds(cfg):
    rep = regions.bound_report(cfg.params)
    return {"bounds": rep, "matches": {n: rep.matches(n) for n in rep.constants},
            "all_hold": rep.all_hold}, EXIT_OK


def _cmd_transitory(cfg):
    gammas = [float(g) for g in cfg.options.get("gamma_list", [5, 15, 100, 1000])]
    seed = cfg.seeds[0]
    res = lab.transitory_sweep(cfg.params, gammas, seed, _horizon(cfg))
    status = EXIT_OK if all(r.captured for r in res) else EXIT_UNRESOLVED
    crit = {"window": 20.0 * 2.0 * math.pi / cfg.params.b, "margin": cfg.params.alpha}
    return {"results": res, "strictly_increasing": lab.strictly_increasing(res),
            "capture_criterion": crit}, status


def _cmd_hidden_probe(cfg):
    system = build_system(cfg.params)
    o = cfg.options
    v = lab.hidden_attractor_probe(system, float(o.get("epsilon", 0.01)), _horizon(cfg),
                                   int(o.get("seeds_per_eq", 8)), _criterion(cfg, system),
                                   cfg.rng_seed, o.get("workers"))
    status = EXIT_UNRESOLVED if v.verdict is lab.Verdict.INCONCLUSIVE else EXIT_OK
    return {"verdict": v}, status


def _cmd_basin_scan(cfg):
    system = build_system(cfg.params)
    grid = cfg.grid if cfg.grid is not None else np.array(cfg.seeds)
    scan = lab.basin_scan(system, grid, _horizon(cfg), _criterion(cfg, system),
                          cfg.options.get("workers"))
    if cfg.output.plot:
        emit_plot(scan, cfg.output.projection, cfg.output.plot, system)
    status = EXIT_UNRESOLVED if lab.BasinLabel.UNRESOLVED in scan.labels else EXIT_OK
    return {"scan": scan, "counts": scan.counts()}, status


def _cmd_hysteresis(cfg):
    p, o = cfg.params, cfg.options
    g = p.gamma if p.gamma > 0 else 10.0 * p.alpha
    l1 = float(o.get("l1", 2 * (g - p.alpha) / 3))
    l2 = float(o.get("l2", l1))
    t_end = float(o.get("t_end", 3 * math.pi / (2 * p.b)))
    x0 = o.get("x0")
    tr = regions.hysteresis_companion(p.a, p.b, float(o.get("k_gain", 1.0)), l1, l2,
                                      float(o.get("d1", 2 * p.alpha / 3)), float(o.get("d2", 0.0)),
                                      t_end, x0=x0)
    ratio = tr.radius_ratio()
    expected = math.exp(p.a * t_end)
    if cfg.output.plot:
        emit_plot(tr, "z2z3", cfg.output.plot)
    return {"l1": l1, "l2": l2, "t_end": t_end, "switch_times": tr.switch_times,
            "radius_ratio": ratio, "spiral_ratio": expected,
            "relative_deviation": ratio / expected - 1.0}, EXIT_OK


_HANDLERS = {"simulate": _cmd_simulate, "heteroclinic": _cmd_heteroclinic,
             "gamma-interval": _cmd_gamma_interval, "classify": _cmd_classify,
             "regions": _cmd_regions, "bounds": _cmd_bounds, "transitory": _cmd_transitory,
             "hidden-probe": _cmd_hidden_probe, "basin-scan": _cmd_basin_scan,
             "hysteresis": _cmd_hysteresis}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = resolve_config(args)
    except ConfigError as err:
        print(f"pwl-hidden: config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as err:
        print(f"pwl-hidden: {err}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        report, status = run_command(cfg)
    except (PreconditionError, ParameterError, EventStormError, DivergenceError, ValueError) as err:
        print(f"pwl-hidden: {cfg.command}: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    except OSError as err:
        print(f"pwl-hidden: {err}", file=sys.stderr)
        return EXIT_NUMERIC
    if not cfg.output.report:
        json.dump(to_jsonable(report), sys.stdout, indent=2)
        sys.stdout.write("\n")
    return status


if __name__ == "__main__":
    sys.exit(main())
