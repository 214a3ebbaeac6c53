"""Piecewise-linear systems with double-scroll, four-scroll and hidden attractors.

The vector field is ``x' = A x + f(x) B`` with ``f`` constant on each atom of a
partition of R^3 by switching planes. Trajectories are chained exact
solutions of the affine pieces; see :mod:`pwl_hidden.flow`.
"""
from .core import (AtomSpec, Eigenframe, Manifold, ManifoldKind, ParameterError, PlaneId,
                   PreconditionError, PwlSystem, SwitchPlane, SystemParams, Variant, atom_of,
                   build_system, divergence, manifolds, stable_manifold, unstable_manifold)
from .flow import (BACKWARD, FORWARD, CrossingEvent, DivergenceError, EventStormError, Trajectory,
                   ZCoords, first_crossing, flow_in_atom, from_z, integrate, to_z)
from .heteroclinic import (GammaInterval, HeteroclinicCensus, HeteroclinicSpec, Regime,
                           classify_structure, gamma_interval, heteroclinic_spec, ho_seed,
                           intersection_points, verify_heteroclinic)
from .lab import (BasinLabel, CaptureCriterion, GridSpec, HiddenVerdict, TransitoryResult, Verdict,
                  basin_scan, detect_capture, hidden_attractor_probe, transitory_sweep)
from .regions import (BoundReport, Region, RegionLabel, TangencyLine, bound_report,
                      hysteresis_companion, key_points, region, tangency_lines,
                      verify_region_mapping)

__version__ = "0.1.0"

__all__ = [
    "AtomSpec",
    "Eigenframe",
    "Manifold",
    "ManifoldKind",
    "ParameterError",
    "PlaneId",
    "PreconditionError",
    "PwlSystem",
    "SwitchPlane",
    "SystemParams",
    "Variant",
    "atom_of",
    "build_system",
    "divergence",
    "manifolds",
    "stable_manifold",
    "unstable_manifold",
    "BACKWARD",
    "FORWARD",
    "CrossingEvent",
    "DivergenceError",
    "EventStormError",
    "Trajectory",
    "ZCoords",
    "first_crossing",
    "flow_in_atom",
    "from_z",
    "integrate",
    "to_z",
    "GammaInterval",
    "HeteroclinicCensus",
    "HeteroclinicSpec",
    "Regime",
    "classify_structure",
    "gamma_interval",
    "heteroclinic_spec",
    "ho_seed",
    "intersection_points",
    "verify_heteroclinic",
    "BasinLabel",
    "CaptureCriterion",
    "GridSpec",
    "HiddenVerdict",
    "TransitoryResult",
    "Verdict",
    "basin_scan",
    "detect_capture",
    "hidden_attractor_probe",
    "transitory_sweep",
    "BoundReport",
    "Region",
    "RegionLabel",
    "TangencyLine",
    "bound_report",
    "hysteresis_companion",
    "key_points",
    "region",
    "tangency_lines",
    "verify_region_mapping",
]
