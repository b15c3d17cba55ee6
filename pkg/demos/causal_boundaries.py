#!/usr/bin/env python3
"""Which states are forced to pass through a region, and which can escape.

Cauchy development: with no wind and A the unit disk, every boat that stays
inside A up to time t started at least t away from the rim, so the future
development is the cone t = 1 - |y|.  A uniform drift tilts that cone, and
individual space-time points are certified by propagating their past.

K-horizon: a wind that ramps from 0 to 2 between x = 0 and x = 2 is
stronger than the boat beyond x = 1.  Boats starting left of x = 1 can still
reach the calm half-plane x < 0; boats to the right are swept away.
"""
import argparse
import math
from pathlib import Path

import numpy as np

from windnav.export import SvgFigure, contour_segments
from windnav.reachability import cauchy_development, certify_cauchy_point, disk_mask, k_horizon
from windnav.scenario import GridSpec, Scenario, load_scenario_file

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_out")
    out = Path(ap.parse_args().out)
    out.mkdir(parents=True, exist_ok=True)

    S = Scenario.analytic((-1.5, 1.5, -1.5, 1.5), wind=("0", "0"))
    g = GridSpec(S.chart, 128)
    cd = cauchy_development(S, disk_mask(g, (0, 0), 1.0), g, None, 1.2)
    X, Y = g.mesh()
    print("calm water, A = unit disk")
    for k in range(0, len(cd.times), len(cd.times) // 5):
        inside = cd.D_plus[k]
        r = np.hypot(X[inside], Y[inside]).max() if inside.any() else float("nan")
        print(f"  t = {cd.times[k]:.3f}: development reaches radius {r:.3f} (cone {max(0.0, 1 - cd.times[k]):.3f})")

    S = Scenario.analytic((-2, 2, -2, 2), wind=("0.5", "0"))
    g = GridSpec(S.chart, 96)
    A = disk_mask(g, (0, 0), 1.0)
    cd = cauchy_development(S, A, g, None, 0.8)
    print("\nuniform drift 0.5 to the east")
    for t, y in [(0.2, (0.3, 0.0)), (0.2, (-0.75, 0.0)), (0.5, (0.4, 0.1)), (0.5, (0.0, 0.5))]:
        k = int(round(t / cd.dt))
        swept = bool(cd.D_plus[k][g.index_of(y)])
        direct, margin = certify_cauchy_point(S, A, cd.times[k], y, g, cd.dt)
        exact = math.hypot(y[0] - 0.5 * cd.times[k], y[1]) + cd.times[k] <= 1
        print(f"  t = {cd.times[k]:.3f}, y = {y}: sweep {swept}, backward ball {direct} "
              f"(margin {margin:+.3f}), exact {exact}")

    S = load_scenario_file(HERE / "scenarios" / "ramp.json")
    g = GridSpec(S.chart, 256)
    X, _ = g.mesh()
    kh = k_horizon(S, X < 0, g)
    xs = X[kh.horizon]
    print(f"\nramped wind: horizon between x = {xs.min():.4f} and {xs.max():.4f} (cell {g.cell:.4f})")
    fig = SvgFigure(S.chart)
    fig.segments(contour_segments(g, 0.5 - kh.reach.astype(float)), "firebrick", 2, "K-horizon")
    fig.save(out / "ramp_horizon.svg")
    print(f"figure written to {out / 'ramp_horizon.svg'}")


if __name__ == "__main__":
    main()
