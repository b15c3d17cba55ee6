#!/usr/bin/env python3
"""Reachable sets in a sheared jet, checked against random steering.

The front propagation sweeps a level set outward at the local boat speed
plus the wind.  Independently, thousands of boats steer at random for the
same time; their union should fill the same region.  The script reports the
cell agreement and writes the fronts as SVG contours and the first-arrival
time as a PGM image.
"""
import argparse
import time
from pathlib import Path

from windnav.export import SvgFigure, contour_segments, write_pgm
from windnav.reachability import arrival_field, propagate_front, simulate_random_controls
from windnav.scenario import GridSpec, load_scenario_file

HERE = Path(__file__).parent


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="demo_out")
    out = Path(ap.parse_args().out)
    out.mkdir(parents=True, exist_ok=True)

    S = load_scenario_file(HERE / "scenarios" / "gusty_jet.json")
    x0 = (0.0, 0.2)
    g = GridSpec(S.chart, 96)

    t = time.perf_counter()
    stack = propagate_front(S, x0, 1.0, None, g)
    print(f"front to t = {stack.times[-1]:.3f} in {len(stack.times) - 1} steps ({time.perf_counter() - t:.1f}s)")

    t = time.perf_counter()
    cloud = simulate_random_controls(S, x0, stack.times[-1], g)
    agree = 1.0 - (stack.masks[-1] ^ cloud).mean()
    print(f"random steering covers {cloud.sum()} cells, the front {stack.masks[-1].sum()}; "
          f"agreement {100 * agree:.2f}% ({time.perf_counter() - t:.1f}s)")

    fig = SvgFigure(S.chart)
    for k in range(0, len(stack.times), max(1, len(stack.times) // 5)):
        edge = contour_segments(g, 0.5 - stack.masks[k].astype(float))
        fig.segments(edge, "steelblue", 1.5, f"t = {stack.times[k]:.2f}")
    fig.segments(contour_segments(g, stack.phi), "firebrick", 2, "final front")
    fig.marker(x0, "black")
    fig.save(out / "jet_fronts.svg")

    af = arrival_field(S, x0, 128)
    write_pgm(out / "jet_arrival.pgm", af.tau)
    print(f"latest first arrival inside the chart: {af.tau[af.finite].max():.3f}")
    print(f"figures written to {out}")


if __name__ == "__main__":
    main()
