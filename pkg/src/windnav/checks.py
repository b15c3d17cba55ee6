"""Invariant suite run against a single scenario (the ``check`` subcommand)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geodesics import Branch, GeodesicAbort, GeodesicClass, integrate, t_reparametrize
from .metrics import (
    ConeStatus,
    MetricDomainError,
    WindClass,
    classify,
    cone_membership,
    eval_F,
    eval_Fl,
    fundamental_tensor,
    fundamental_tensor_fd,
    metric_arrays,
)
from .scenario import Scenario, sample

__all__ = ["CheckResult", "run_checks"]

GEODESIC_STEP = 1e-3  # conservation tolerances below are stated at this step


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str


def _points(scenario: Scenario, rng, n):
    c = scenario.chart
    mx, my = 0.1 * (c.x_max - c.x_min), 0.1 * (c.y_max - c.y_min)
    return np.column_stack([rng.uniform(c.x_min + mx, c.x_max - mx, n), rng.uniform(c.y_min + my, c.y_max - my, n)])


def _check_jets(scenario, pts):
    worst_sharp = worst_sym = 0.0
    for p in pts:
        L = scenario.local_data(p)
        worst_sharp = max(worst_sharp, float(np.max(np.abs(L.g0 @ L.omega_sharp - L.omega))))
        worst_sym = max(worst_sym, float(np.max(np.abs(L.christoffel - L.christoffel.transpose(0, 2, 1)))))
        if np.linalg.det(L.g0) <= 0 or L.lam + L.omega_norm2 <= 0:
            return CheckResult("scenario", False, f"invalid triple at {tuple(p)}")
    ok = worst_sharp <= 1e-12 and worst_sym == 0.0
    return CheckResult("scenario", ok, f"omega# residual {worst_sharp:.2e}, Christoffel asymmetry {worst_sym:.2e}")


def _check_metric(scenario, pts, rng):
    worst = 0.0
    order_ok = True
    count = 0
    for p in pts:
        L = scenario.local_data(p)
        gR, W = L.g_R, L.wind
        for _ in range(8):
            th = rng.uniform(0, 2 * math.pi)
            v = rng.uniform(0.2, 2.0) * np.array([math.cos(th), math.sin(th)])
            if cone_membership(L, v) is not ConeStatus.IN_A:
                continue
            for Z in (eval_F(L, v), eval_Fl(L, v)):
                if isinstance(Z, float) and math.isfinite(Z):
                    u = v / Z - W
                    worst = max(worst, abs(float(u @ gR @ u) - 1.0))
            Fl = eval_Fl(L, v)
            if isinstance(Fl, float) and eval_F(L, v) > Fl * (1 + 1e-12):
                order_ok = False
            count += 1
    ok = worst <= 1e-10 and order_ok
    return CheckResult("metric", ok, f"{count} samples, indicatrix residual {worst:.2e}, F <= F_l {order_ok}")


def _check_conformal(scenario, pts, rng):
    worst = 0.0
    for p in pts:
        L = scenario.local_data(p)
        g, w, lam = L.g0, L.omega, L.lam
        for _ in range(4):
            c = math.exp(rng.uniform(-2, 2))
            th = rng.uniform(0, 2 * math.pi)
            v = np.array([math.cos(th), math.sin(th)])
            a = metric_arrays(g[0, 0], g[0, 1], g[1, 1], w[0], w[1], lam, v[0], v[1])
            b = metric_arrays(c * g[0, 0], c * g[0, 1], c * g[1, 1], c * w[0], c * w[1], c * lam, v[0], v[1])
            for x, y in zip(a[:2], b[:2]):
                x, y = float(x), float(y)
                if math.isfinite(x) and x > 0:
                    worst = max(worst, abs(x - y) / x)
    return CheckResult("conformal", worst <= 1e-12, f"max relative change {worst:.2e}")


def _check_geodesics(scenario, pts, rng, step):
    worst_C = worst_N = worst_unit = 0.0
    runs = 0
    s_max = 0.25 * scenario.chart.diagonal
    for p in pts:
        L = scenario.local_data(p)
        branches = [Branch.F] + ([Branch.FL] if classify(L) is WindClass.STRONG else [])
        for br in branches:
            for _ in range(6):
                th = rng.uniform(0, 2 * math.pi)
                v = np.array([math.cos(th), math.sin(th)])
                try:
                    if cone_membership(L, v) is not ConeStatus.IN_A:
                        continue
                    tr = integrate(scenario, p, v, br, s_max, step)
                except (GeodesicAbort, MetricDomainError):
                    continue
                runs += 1
                scale = 1.0 + abs(tr.C0)
                worst_C = max(worst_C, tr.C_drift / scale)
                worst_N = max(worst_N, tr.max_null_residual)
                if len(tr.s) > 1 and np.all(tr.tdot > 0):
                    rt = t_reparametrize(tr, scenario)
                    Z = rt.F_of_xdot if tr.classification is GeodesicClass.F_GEODESIC else rt.Fl_of_xdot
                    worst_unit = max(worst_unit, float(np.max(np.abs(Z - 1.0))))
                break
    ok = runs > 0 and worst_C <= 1e-8 and worst_N <= 1e-8 and worst_unit <= 1e-6
    return CheckResult("geodesics", ok,
                       f"{runs} traces, dC {worst_C:.2e}, null {worst_N:.2e}, unit speed {worst_unit:.2e}")


def _check_tensor(scenario, pts, rng):
    worst = 0.0
    sig_ok = True
    count = 0
    for p in pts:
        L = scenario.local_data(p)
        if abs(L.lam) < 1e-3 * (1.0 + L.omega_norm2):
            continue  # the strong cone is too thin for a difference stencil
        eps_list = (1, -1) if classify(L) is WindClass.STRONG else (1,)
        for _ in range(4):
            th = rng.uniform(0, 2 * math.pi)
            v = np.array([math.cos(th), math.sin(th)])
            if cone_membership(L, v) is not ConeStatus.IN_A:
                continue
            for eps in eps_list:
                G = fundamental_tensor(L, v, eps)
                Gfd = fundamental_tensor_fd(L, v, eps)
                worst = max(worst, float(np.max(np.abs(G - Gfd))) / max(1.0, float(np.max(np.abs(G)))))
                ev = np.linalg.eigvalsh(G)
                if eps == 1 and ev[0] <= 0:
                    sig_ok = False
                if eps == -1 and not (ev[0] < 0 < ev[1]):
                    sig_ok = False
                count += 1
    return CheckResult("fundamental tensor", worst <= 1e-5 and sig_ok,
                       f"{count} samples, FD mismatch {worst:.2e}, signature {sig_ok}")


def _check_sampling(scenario, pts):
    worst = 0.0
    for p in pts:
        a = scenario.local_data(p)
        b = sample(scenario, p)
        scale = 1.0 + float(np.max(np.abs(a.dg)))
        worst = max(worst, float(np.max(np.abs(a.dg - b.dg))) / scale)
    return CheckResult("finite differences", worst <= 1e-5, f"jet vs central differences {worst:.2e}")


def run_checks(scenario: Scenario, seed: int = 0, n_points: int = 12,
               step: float = GEODESIC_STEP) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    pts = _points(scenario, rng, n_points)
    return [
        _check_jets(scenario, pts),
        _check_metric(scenario, pts, rng),
        _check_conformal(scenario, pts, rng),
        _check_geodesics(scenario, pts[:4], rng, step),
        _check_tensor(scenario, pts, rng),
        _check_sampling(scenario, pts),
    ]
