import math

import numpy as np
import pytest

from windnav.scenario import Scenario

SQ3 = math.sqrt(3.0)


def constant_wind(W, chart=(-3, 3, -3, 3), g0=("1", "0", "1")):
    return Scenario.analytic(chart, g0=g0, wind=(repr(float(W[0])), repr(float(W[1]))))


def smooth_random_scenario(rng, kind="mild", chart=(-20, 20, -20, 20)):
    """Slowly varying trigonometric fields; ``kind`` keeps the wind speed
    well inside the mild (< 0.75) or strong (> 1.3) regime."""
    a, c = rng.uniform(-0.3, 0.3, 2)
    b = rng.uniform(-0.1, 0.1)
    k = rng.uniform(0.05, 0.3, 6)
    ph = rng.uniform(0, 2 * math.pi, 4)
    g0 = (f"1+{a:.6f}*sin({k[0]:.6f}*x+{ph[0]:.6f})",
          f"{b:.6f}*cos({k[1]:.6f}*y)",
          f"1+{c:.6f}*cos({k[2]:.6f}*y+{ph[1]:.6f})")
    if kind == "mild":
        base, amp = rng.uniform(0.1, 0.4), rng.uniform(0.0, 0.15)
    else:
        base, amp = rng.uniform(1.9, 2.6), rng.uniform(0.0, 0.2)
    ang = rng.uniform(0, 2 * math.pi)
    # |W|_{g_R} varies with g0 only mildly; the bands above leave margin
    speed = f"({base:.6f}+{amp:.6f}*sin({k[3]:.6f}*x+{k[4]:.6f}*y+{ph[2]:.6f}))"
    turn = f"({ang:.6f}+0.3*sin({k[5]:.6f}*y+{ph[3]:.6f}))"
    wind = (f"{speed}*cos({turn})", f"{speed}*sin({turn})")
    return Scenario.analytic(chart, g0=g0, wind=wind)


@pytest.fixture
def strong():
    return constant_wind((2.0, 0.0))


@pytest.fixture
def mild():
    return constant_wind((0.5, 0.0))


@pytest.fixture
def critical():
    return constant_wind((1.0, 0.0))


@pytest.fixture
def calm():
    return constant_wind((0.0, 0.0))


def pytest_terminal_summary(terminalreporter):
    """One line per acceptance criterion, collected from ``record_property``."""
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            for key, value in getattr(rep, "user_properties", []):
                if key == "acceptance":
                    lines.append(value)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
