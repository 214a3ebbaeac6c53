"""Two-atom double scroll from the origin, plotted in the x1-x3 plane."""
import sys

import numpy as np

from pwl_hidden import SystemParams, build_system, integrate
from pwl_hidden.cli_io import emit_plot


def main(out="double_scroll.svg"):
    system = build_system(SystemParams(a=0.2, b=5.0, c=-3.0, alpha=1.0))
    tr = integrate(system, np.zeros(3), 300.0, 0.01)
    print(f"{len(tr.events)} plane crossings, max |x| = {np.abs(tr.x).max():.3f}")
    emit_plot(tr, "x1x3", out, system=system)
    print(f"wrote {out}")


if __name__ == "__main__":
    main(*sys.argv[1:])
