"""Hidden attractor of the four-atom system with a vertical central plane.

Seeds near every equilibrium are captured by the self-excited scrolls while the
orbit from the origin keeps crossing the central plane. Takes about a minute.
"""
import sys

import numpy as np

from pwl_hidden import (SystemParams, Variant, build_system, hidden_attractor_probe, integrate,
                        region)
from pwl_hidden.cli_io import emit_plot


def main(out="hidden_attractor.svg"):
    system = build_system(SystemParams(0.2, 5.0, -7.0, 1.0, 10.0, Variant.FOUR_ATOM_HIDDEN))
    verdict = hidden_attractor_probe(system, epsilon=0.01, horizon=50100.0, seeds_per_eq=8)
    captured = sum(s.capture is not None for s in verdict.seeds)
    print(f"verdict: {verdict.verdict.value}")
    print(f"origin orbit persists: {verdict.persists}, {captured}/{len(verdict.seeds)} seeds captured")
    tr = integrate(system, np.zeros(3), 500.0, 0.01)
    emit_plot(tr, "x1x3", out, system=system, regions=[region(system, "R1"), region(system, "R2")])
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
