"""Two-point Zermelo problems: fastest and slowest wind curves between points.

The lattice arrival field supplies a global estimate and the reachability
verdict; shooting on the geodesic equations refines the time and decides the
kind of extremal.
"""
from __future__ import annotations

import csv
import enum
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .geodesics import (
    Branch,
    GeodesicAbort,
    GeodesicClass,
    GeodesicTrace,
    ShotHit,
    shoot,
    shoot_boundary,
    t_reparametrize,
)
from .metrics import INF, LAMBDA_TOL, MetricDomainError, WindClass, classify, metric_arrays
from .reachability import ArrivalField, arrival_field
from .scenario import OutOfChartError, Scenario

__all__ = [
    "Kind",
    "Verdict",
    "NoMaximizer",
    "NavigationSolution",
    "OracleResult",
    "min_time_path",
    "max_time_path",
    "constant_wind_oracle",
]


class Kind(enum.Enum):
    MIN_TIME = "MinTime"
    MAX_TIME = "MaxTime"


class Verdict(enum.Enum):
    REACHABLE = "Reachable"
    UNREACHABLE = "Unreachable"
    TRUNCATED_UNKNOWN = "TruncatedUnknown"


class NoMaximizer(MetricDomainError):
    """``F_l`` is infinite at the origin, so arrival times are unbounded."""


@dataclass
class NavigationSolution:
    kind: Kind
    verdict: Verdict
    T: float | None = None
    classification: GeodesicClass | None = None  # None for an unrefined lattice path
    path: np.ndarray = field(default_factory=lambda: np.empty((0, 2)))
    times: np.ndarray = field(default_factory=lambda: np.empty(0))
    lattice_time: float | None = None
    angle: float | None = None
    trace: GeodesicTrace | None = field(default=None, repr=False)
    hit: ShotHit | None = field(default=None, repr=False)
    F: np.ndarray | None = field(default=None, repr=False)
    Fl: np.ndarray | None = field(default=None, repr=False)
    h: np.ndarray | None = field(default=None, repr=False)

    @property
    def reachable(self) -> bool:
        return self.verdict is Verdict.REACHABLE

    def summary(self) -> dict:
        return {
            "T": self.T,
            "kind": self.kind.value,
            "classification": None if self.classification is None else self.classification.value,
            "verdict": self.verdict.value,
        }

    def to_json(self, path=None) -> str:
        text = json.dumps(self.summary(), indent=2, sort_keys=True) + "\n"
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["t", "x", "y", "F", "Fl", "h"])
            for k in range(len(self.times)):
                row = [self.times[k], self.path[k, 0], self.path[k, 1]]
                row += [np.nan if a is None else a[k] for a in (self.F, self.Fl, self.h)]
                w.writerow([repr(float(v)) for v in row])


# --- constant-wind oracle ------------------------------------------------------------

class OracleResult(NamedTuple):
    T_min: float | None
    T_max: object  # float, INF, or None when unreachable
    verdict: Verdict


def constant_wind_oracle(g_R, W, x0, y0) -> OracleResult:
    """Closed-form travel times for constant ``g_R`` and ``W``: the roots of
    the lightlike condition on ``(T, d)`` with ``d = y0 - x0``."""
    G = np.asarray(g_R, float)
    if G.shape != (2, 2) or not np.allclose(G, G.T) or np.linalg.eigvalsh(G)[0] <= 0:
        raise ValueError("g_R must be symmetric positive definite")
    W = np.asarray(W, float)
    d = np.asarray(y0, float) - np.asarray(x0, float)
    q = float(d @ G @ d)
    if q == 0.0:
        raise ValueError("x0 and y0 coincide")
    om = -float(d @ G @ W)
    ww = float(W @ G @ W)
    lam = 1.0 - ww
    if abs(lam) <= LAMBDA_TOL * (1.0 + ww):
        lam = 0.0
    h = lam * q + om * om
    if h < -1e-12 * q or (lam <= 0 and -om <= 0):
        return OracleResult(None, None, Verdict.UNREACHABLE)
    rad = math.sqrt(max(h, 0.0))
    T_min = q / (-om + rad)
    T_max = q / (-om - rad) if lam < 0 else INF
    return OracleResult(T_min, T_max, Verdict.REACHABLE)


# --- solvers -----------------------------------------------------------------------------

def _endpoints(scenario: Scenario, x0, y0):
    x0 = tuple(map(float, x0))
    y0 = tuple(map(float, y0))
    for name, p in (("origin", x0), ("target", y0)):
        if not scenario.chart.contains(p):
            raise OutOfChartError(f"{name} outside chart", p)
    if np.allclose(x0, y0):
        raise ValueError("x0 and y0 coincide")
    return x0, y0


def _path_columns(scenario: Scenario, trace: GeodesicTrace):
    tr = t_reparametrize(trace, scenario)
    v = tr.xdot
    gxx, gxy, gyy, ox, oy, lam = scenario.triple_array(tr.x[:, 0], tr.x[:, 1])
    F, Fl, _, _ = metric_arrays(gxx, gxy, gyy, ox, oy, lam, v[:, 0], v[:, 1])
    w = ox * v[:, 0] + oy * v[:, 1]
    h = lam * (gxx * v[:, 0] ** 2 + 2 * gxy * v[:, 0] * v[:, 1] + gyy * v[:, 1] ** 2) + w * w
    return tr, np.asarray(F, float), np.asarray(Fl, float), np.asarray(h, float)


def _from_hit(scenario: Scenario, kind: Kind, hit: ShotHit, lattice_time) -> NavigationSolution:
    tr, F, Fl, h = _path_columns(scenario, hit.trace)
    cls = GeodesicClass.BOUNDARY if hit.branch is Branch.BOUNDARY else hit.trace.classification
    return NavigationSolution(kind=kind, verdict=Verdict.REACHABLE, T=hit.arrival_time, classification=cls,
                              path=tr.x, times=tr.t, lattice_time=lattice_time, angle=hit.angle, trace=tr,
                              hit=hit, F=F, Fl=Fl, h=h)


def _lattice_estimate(af: ArrivalField, y0) -> float:
    """Arrival estimate at ``y0``; the best reached cell among its 3x3 block
    when its own cell is not reached."""
    T = af.value_at(y0)
    if math.isfinite(T):
        return T
    i, j = af.grid.index_of(y0)
    block = af.tau[max(i - 1, 0):i + 2, max(j - 1, 0):j + 2]
    return float(block.min()) if np.isfinite(block).any() else math.inf


def _unreached_verdict(af: ArrivalField, y0) -> Verdict:
    if af.graph_reachable is not None and af.graph_reachable[af.grid.index_of(y0)]:
        return Verdict.TRUNCATED_UNKNOWN
    return Verdict.UNREACHABLE


def _shoot_all(scenario, x0, y0, branch, angular_samples, step, s_max):
    hits = []
    try:
        hits += shoot(scenario, x0, y0, branch, angular_samples=angular_samples, s_max=s_max, step=step)
    except MetricDomainError:
        pass
    try:
        hits += shoot_boundary(scenario, x0, y0, s_max=s_max, step=step)
    except (GeodesicAbort, MetricDomainError):
        pass
    return hits


def min_time_path(scenario: Scenario, x0, y0, grid=256, T_max: float | None = None, neighbor_order: int = 2,
                  domain: np.ndarray | None = None, angular_samples: int = 720, step: float | None = None,
                  s_max: float | None = None) -> NavigationSolution:
    """Fastest wind curve from ``x0`` to ``y0``.

    Paths are confined to the chart. With a ``domain`` mask the lattice path
    is returned without geodesic refinement, since minimizers may graze the
    mask.
    """
    x0, y0 = _endpoints(scenario, x0, y0)
    af = arrival_field(scenario, x0, grid, neighbor_order, domain, T_max=T_max)
    T_est = _lattice_estimate(af, y0)
    if domain is None:
        hits = [h for h in _shoot_all(scenario, x0, y0, Branch.F, angular_samples, step, s_max)
                if T_max is None or h.arrival_time <= T_max]
        if hits:
            best = min(hits, key=lambda h: h.arrival_time)
            return _from_hit(scenario, Kind.MIN_TIME, best, T_est if math.isfinite(T_est) else None)
    if not math.isfinite(T_est):
        return NavigationSolution(kind=Kind.MIN_TIME, verdict=_unreached_verdict(af, y0))
    path = af.path_to(y0)
    path = np.vstack([path, y0]) if len(path) else np.array([x0, y0])
    times = np.array([af.value_at(p) for p in path[:-1]] + [T_est])
    times[0] = 0.0
    return NavigationSolution(kind=Kind.MIN_TIME, verdict=Verdict.REACHABLE, T=T_est, path=path, times=times,
                              lattice_time=T_est)


def max_time_path(scenario: Scenario, x0, y0, grid=256, T_max: float | None = None, neighbor_order: int = 2,
                  angular_samples: int = 720, step: float | None = None,
                  s_max: float | None = None) -> NavigationSolution:
    """Slowest wind curve from ``x0`` to ``y0``: the largest stationary
    arrival time among ``F_l`` and boundary geodesics.

    Raises :class:`NoMaximizer` unless the wind is strong at ``x0``.
    """
    x0, y0 = _endpoints(scenario, x0, y0)
    if classify(scenario.local_data(x0)) is not WindClass.STRONG:
        raise NoMaximizer("wind is not strong at the origin; arrival times are unbounded")
    hits = [h for h in _shoot_all(scenario, x0, y0, Branch.FL, angular_samples, step, s_max)
            if T_max is None or h.arrival_time <= T_max]
    if hits:
        best = max(hits, key=lambda h: h.arrival_time)
        return _from_hit(scenario, Kind.MAX_TIME, best, None)
    af = arrival_field(scenario, x0, grid, neighbor_order, T_max=T_max)
    if math.isfinite(_lattice_estimate(af, y0)):
        # reached, but no slow extremal found up to the horizon
        return NavigationSolution(kind=Kind.MAX_TIME, verdict=Verdict.TRUNCATED_UNKNOWN)
    return NavigationSolution(kind=Kind.MAX_TIME, verdict=_unreached_verdict(af, y0))
