#!/usr/bin/env python3
"""Fastest and slowest crossings of a uniform strong wind.

With |W| = 2 the boat cannot head upwind at all: every reachable target lies
in a cone around the wind and is reached by two lightlike geodesics, a fast
one (F) and a slow one (F_l).  The script compares both solvers with the
closed-form travel times, then shows what changes at and below |W| = 1.
"""
import argparse
from pathlib import Path

import numpy as np

from windnav.export import SvgFigure
from windnav.navigation import NoMaximizer, constant_wind_oracle, max_time_path, min_time_path
from windnav.scenario import Scenario


def uniform(W):
    return Scenario.analytic((-3, 3, -3, 3), wind=(repr(W[0]), repr(W[1])))


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_out")
    out = Path(ap.parse_args().out)
    out.mkdir(parents=True, exist_ok=True)

    W, d = (2.0, 0.0), (2.0, 0.5)
    S = uniform(W)
    fast = min_time_path(S, (0, 0), d)
    slow = max_time_path(S, (0, 0), d)
    orc = constant_wind_oracle(np.eye(2), W, (0, 0), d)
    print(f"wind {W}, target {d}")
    print(f"  fastest  T = {fast.T:.5f}  closed form {orc.T_min:.5f}  ({fast.classification.value})")
    print(f"  slowest  T = {slow.T:.5f}  closed form {float(orc.T_max):.5f}  ({slow.classification.value})")

    upwind = min_time_path(S, (0, 0), (-1.0, 0.0))
    print(f"  target (-1, 0) is upwind: {upwind.verdict.value}")

    fig = SvgFigure(S.chart)
    fig.polyline(fast.path, "steelblue", 2, "fastest")
    fig.polyline(slow.path, "firebrick", 2, "slowest")
    fig.marker((0, 0), "black")
    fig.marker(d, "green")
    fig.save(out / "strong_wind_paths.svg")

    print("\nsame target, weaker winds:")
    for W in [(1.0, 0.0), (0.5, 0.0), (0.0, 0.0)]:
        S = uniform(W)
        fast = min_time_path(S, (0, 0), d)
        orc = constant_wind_oracle(np.eye(2), W, (0, 0), d)
        try:
            max_time_path(S, (0, 0), d)
            note = "slowest path exists"
        except NoMaximizer:
            note = "no slowest path: the boat can dawdle forever"
        print(f"  |W| = {np.hypot(*W):.1f}: T_min = {fast.T:.5f} (closed form {orc.T_min:.5f}); {note}")
    print(f"\nfigure written to {out / 'strong_wind_paths.svg'}")


if __name__ == "__main__":
    main()
