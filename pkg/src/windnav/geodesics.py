"""Lightlike geodesics of ``-lam dt^2 + 2 omega dt + g0`` and their projections.

State layout is ``(t, x, y, tdot, xdot, ydot)`` in an affine parameter ``s``.
The spatial equation comes from Euler-Lagrange,

    g0 xddot + omega tddot = -c(xdot) - 1/2 tdot^2 dlam + tdot dw * J xdot

(``c`` the Christoffel covector of ``g0``, ``dw`` the coefficient of
``d omega``, ``J(u1, u2) = (u2, -u1)``), and ``tddot`` from differentiating
the Killing constant ``C = -lam tdot + omega(xdot)``.
"""
from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.optimize import brentq

from .metrics import (
    INF,
    ConeStatus,
    MetricDomainError,
    WindClass,
    classify,
    cone_membership,
    eval_F,
    eval_Fl,
    metric_arrays,
)
from .scenario import LocalData, Scenario

__all__ = [
    "Branch",
    "GeodesicClass",
    "GeodesicAbort",
    "GeodesicTrace",
    "ShotHit",
    "FermatResult",
    "NoAdmissibleSector",
    "lift_initial",
    "geodesic_rhs",
    "killing_constant",
    "null_residual",
    "integrate",
    "t_reparametrize",
    "admissible_sector",
    "boundary_directions",
    "shoot",
    "fermat_stationarity",
    "broken_path_stationarity",
    "is_exceptional_point",
    "NULL_ABORT",
]

NULL_ABORT = 1e-6
NULL_GROWTH = 1e-9
C_TOL_REL = 1e-7
MAX_HALVINGS = 20
STEP_BUDGET = 20  # accepted steps allowed per nominal step


class Branch(enum.Enum):
    F = "F"
    FL = "Fl"
    BOUNDARY = "Boundary"

    @classmethod
    def parse(cls, b) -> "Branch":
        if isinstance(b, cls):
            return b
        for m in cls:
            if str(b).lower() == m.value.lower():
                return m
        raise ValueError(f"unknown branch {b!r}")


class GeodesicClass(enum.Enum):
    F_GEODESIC = "FGeodesic"
    FL_GEODESIC = "FlGeodesic"
    BOUNDARY = "Boundary"
    EXCEPTIONAL = "Exceptional"


class GeodesicAbort(RuntimeError):
    def __init__(self, message, s=None, residual=None):
        super().__init__(message)
        self.s = s
        self.residual = residual


class NoAdmissibleSector(MetricDomainError):
    pass


# --- pointwise pieces --------------------------------------------------------------

def _jet_of(local: LocalData):
    g, dg, w, dw = local.g0, local.dg, local.omega, local.domega_jac
    return (g[0, 0], g[0, 1], g[1, 1],
            dg[0, 0, 0], dg[1, 0, 0], dg[0, 0, 1], dg[1, 0, 1], dg[0, 1, 1], dg[1, 1, 1],
            w[0], w[1], dw[0, 0], dw[0, 1], dw[1, 0], dw[1, 1],
            local.lam, local.dlam[0], local.dlam[1])


def _rhs(J, td, u1, u2):
    """Accelerations ``(tddot, xddot, yddot)``; works on floats and arrays alike."""
    (gxx, gxy, gyy, gxx_x, gxx_y, gxy_x, gxy_y, gyy_x, gyy_y,
     w1, w2, w1x, w1y, w2x, w2y, lam, lx, ly) = J
    dgxx = gxx_x * u1 + gxx_y * u2
    dgxy = gxy_x * u1 + gxy_y * u2
    dgyy = gyy_x * u1 + gyy_y * u2
    qx = gxx_x * u1 * u1 + 2.0 * gxy_x * u1 * u2 + gyy_x * u2 * u2
    qy = gxx_y * u1 * u1 + 2.0 * gxy_y * u1 * u2 + gyy_y * u2 * u2
    c1 = dgxx * u1 + dgxy * u2 - 0.5 * qx
    c2 = dgxy * u1 + dgyy * u2 - 0.5 * qy
    cdw = w2x - w1y
    half_td2 = 0.5 * td * td
    a1 = -c1 - half_td2 * lx + td * cdw * u2
    a2 = -c2 - half_td2 * ly - td * cdw * u1
    det = gxx * gyy - gxy * gxy
    acc1 = (gyy * a1 - gxy * a2) / det
    acc2 = (gxx * a2 - gxy * a1) / det
    s1 = (gyy * w1 - gxy * w2) / det
    s2 = (gxx * w2 - gxy * w1) / det
    n2 = w1 * s1 + w2 * s2
    dwuu = (w1x * u1 + w1y * u2) * u1 + (w2x * u1 + w2y * u2) * u2
    tdd = (dwuu + w1 * acc1 + w2 * acc2 - td * (lx * u1 + ly * u2)) / (lam + n2)
    return tdd, acc1 - tdd * s1, acc2 - tdd * s2


def _monitors(J, td, u1, u2):
    gxx, gxy, gyy = J[0], J[1], J[2]
    w1, w2, lam = J[9], J[10], J[15]
    wu = w1 * u1 + w2 * u2
    C = -lam * td + wu
    N = -lam * td * td + 2.0 * wu * td + gxx * u1 * u1 + 2.0 * gxy * u1 * u2 + gyy * u2 * u2
    return C, N


def killing_constant(local: LocalData, tdot: float, v) -> float:
    return float(-local.lam * tdot + local.omega @ np.asarray(v, float))


def null_residual(local: LocalData, tdot: float, v) -> float:
    v = np.asarray(v, float)
    return float(-local.lam * tdot ** 2 + 2.0 * (local.omega @ v) * tdot + v @ local.g0 @ v)


def geodesic_rhs(local: LocalData, state) -> tuple:
    """Derivative of ``(t, x, y, tdot, xdot, ydot)`` at a point with jet ``local``."""
    t, x, y, td, u1, u2 = (float(c) for c in state)
    tdd, a1, a2 = _rhs(_jet_of(local), td, u1, u2)
    return (td, u1, u2, tdd, a1, a2)


def lift_initial(local: LocalData, v, branch) -> tuple[float, np.ndarray]:
    """Lightlike lift ``(tdot, xdot)`` of a spatial velocity on the given branch."""
    branch = Branch.parse(branch)
    v = np.asarray(v, float)
    status = cone_membership(local, v)
    if status is ConeStatus.OUTSIDE:
        raise MetricDomainError(f"initial velocity {tuple(map(float, v))} outside the admissible cone")
    if branch is Branch.F:
        if status is ConeStatus.KROPINA_ZERO:
            return 1.0, v
        return eval_F(local, v), v
    if branch is Branch.FL:
        if classify(local) is not WindClass.STRONG and status is not ConeStatus.KROPINA_ZERO:
            raise MetricDomainError("the F_l branch needs a strong-wind point")
        Fl = eval_Fl(local, v)
        if not np.any(v):
            raise MetricDomainError("the F_l branch needs a nonzero velocity")
        return float(Fl), v
    if status not in (ConeStatus.BOUNDARY_AE, ConeStatus.KROPINA_ZERO):
        raise MetricDomainError("the boundary branch needs a BoundaryAE velocity or a Kropina zero")
    if status is ConeStatus.KROPINA_ZERO:
        return 1.0, v
    return eval_F(local, v), v


# --- traces ---------------------------------------------------------------------------

@dataclass
class GeodesicTrace:
    s: np.ndarray
    t: np.ndarray
    x: np.ndarray  # (N, 2)
    tdot: np.ndarray
    xdot: np.ndarray  # (N, 2)
    C: np.ndarray
    null_residual: np.ndarray
    C0: float
    classification: GeodesicClass
    branch: Branch
    exit_reason: str
    boundary_flag: bool = False
    F_of_xdot: np.ndarray = field(default=None, repr=False)
    Fl_of_xdot: np.ndarray = field(default=None, repr=False)
    t_parametrized: bool = False

    @property
    def endpoint(self) -> np.ndarray:
        return self.x[-1]

    @property
    def C_drift(self) -> float:
        return float(np.max(np.abs(self.C - self.C0)))

    @property
    def max_null_residual(self) -> float:
        return float(np.max(np.abs(self.null_residual)))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["s", "t", "x", "y", "tdot", "xdot", "ydot", "C", "null_residual",
                        "F_of_xdot", "Fl_of_xdot"])
            for k in range(len(self.s)):
                w.writerow([repr(float(v)) for v in (
                    self.s[k], self.t[k], self.x[k, 0], self.x[k, 1], self.tdot[k],
                    self.xdot[k, 0], self.xdot[k, 1], self.C[k], self.null_residual[k],
                    self.F_of_xdot[k], self.Fl_of_xdot[k])])


def _classify_trace(C0: float, xdot: np.ndarray) -> tuple[GeodesicClass, bool]:
    tol = C_TOL_REL * (1.0 + abs(C0))
    if C0 < -tol:
        return GeodesicClass.F_GEODESIC, False
    if C0 > tol:
        return GeodesicClass.FL_GEODESIC, False
    if float(np.max(np.abs(xdot))) <= 1e-12:
        return GeodesicClass.EXCEPTIONAL, True
    return GeodesicClass.BOUNDARY, True


def _metric_columns(scenario: Scenario, x: np.ndarray, v: np.ndarray):
    gxx, gxy, gyy, ox, oy, lam = scenario.triple_array(x[:, 0], x[:, 1])
    F, Fl, _, _ = metric_arrays(gxx, gxy, gyy, ox, oy, lam, v[:, 0], v[:, 1])
    return F, Fl


def _rk4_step(jet, J0, st, h):
    t, x, y, td, u1, u2 = st
    a0 = _rhs(J0, td, u1, u2)
    hh = 0.5 * h
    x1, y1, td1, u11, u21 = x + hh * u1, y + hh * u2, td + hh * a0[0], u1 + hh * a0[1], u2 + hh * a0[2]
    a1 = _rhs(jet(x1, y1), td1, u11, u21)
    x2, y2, td2, u12, u22 = x + hh * u11, y + hh * u21, td + hh * a1[0], u1 + hh * a1[1], u2 + hh * a1[2]
    a2 = _rhs(jet(x2, y2), td2, u12, u22)
    x3, y3, td3, u13, u23 = x + h * u12, y + h * u22, td + h * a2[0], u1 + h * a2[1], u2 + h * a2[2]
    a3 = _rhs(jet(x3, y3), td3, u13, u23)
    h6 = h / 6.0
    return (
        t + h6 * (td + 2.0 * td1 + 2.0 * td2 + td3),
        x + h6 * (u1 + 2.0 * u11 + 2.0 * u12 + u13),
        y + h6 * (u2 + 2.0 * u21 + 2.0 * u22 + u23),
        td + h6 * (a0[0] + 2.0 * a1[0] + 2.0 * a2[0] + a3[0]),
        u1 + h6 * (a0[1] + 2.0 * a1[1] + 2.0 * a2[1] + a3[1]),
        u2 + h6 * (a0[2] + 2.0 * a1[2] + 2.0 * a2[2] + a3[2]),
    )


def integrate(scenario: Scenario, p, v, branch="F", s_max: float = 1.0, step: float | None = None,
              adaptive: bool = True, t0: float = 0.0) -> GeodesicTrace:
    """Classical RK4 from the lightlike lift of ``v`` at ``p``.

    Stops at ``s_max`` or when the next point leaves the chart.  The step is
    halved when the null residual grows by more than ``1e-9`` in one step and
    the run aborts once the residual exceeds ``1e-6``, or when halving has
    used up ``STEP_BUDGET`` times the nominal number of steps.
    """
    branch = Branch.parse(branch)
    if step is None:
        step = 1e-3 * scenario.chart.diagonal
    if not step > 0:
        raise ValueError("step must be positive")
    local = scenario.local_data(p)
    td0, v = lift_initial(local, v, branch)
    jet = scenario.jet_function
    chart = scenario.chart
    xmin, xmax, ymin, ymax = chart.x_min, chart.x_max, chart.y_min, chart.y_max
    st = (float(t0), float(p[0]), float(p[1]), float(td0), float(v[0]), float(v[1]))
    J = jet(st[1], st[2])
    C, N = _monitors(J, st[3], st[4], st[5])
    S, states, Cs, Ns = [0.0], [st], [C], [N]
    s = 0.0
    h = float(step)
    exit_reason = "s_max"
    budget = STEP_BUDGET * (int(math.ceil(s_max / step)) + 1)
    while s < s_max * (1.0 - 1e-14):
        if len(S) > budget:
            raise GeodesicAbort(f"step budget exhausted at s={s:.9g}", s, N)
        hstep = min(h, s_max - s)
        halvings = 0
        while True:
            new = _rk4_step(jet, J, st, hstep)
            if not (xmin <= new[1] <= xmax and ymin <= new[2] <= ymax):
                break
            Jn = jet(new[1], new[2])
            Cn, Nn = _monitors(Jn, new[3], new[4], new[5])
            if not math.isfinite(Nn):
                raise GeodesicAbort(f"non-finite state at s={s + hstep:.9g}", s + hstep, Nn)
            if adaptive and abs(Nn) - abs(N) > NULL_GROWTH and halvings < MAX_HALVINGS:
                hstep *= 0.5
                halvings += 1
                continue
            break
        if not (xmin <= new[1] <= xmax and ymin <= new[2] <= ymax):
            exit_reason = "chart_exit"
            break
        if abs(Nn) > NULL_ABORT:
            raise GeodesicAbort(f"null residual {abs(Nn):.3e} exceeds {NULL_ABORT:g} at s={s + hstep:.9g}",
                                s + hstep, Nn)
        s += hstep
        st, J, C, N = new, Jn, Cn, Nn
        S.append(s)
        states.append(st)
        Cs.append(C)
        Ns.append(N)
        if halvings:
            h = min(step, 2.0 * hstep)
    arr = np.array(states)
    xs = arr[:, 1:3]
    xdot = arr[:, 4:6]
    cls, flag = _classify_trace(Cs[0], xdot)
    F, Fl = _metric_columns(scenario, xs, xdot)
    return GeodesicTrace(
        s=np.array(S), t=arr[:, 0], x=xs, tdot=arr[:, 3], xdot=xdot,
        C=np.array(Cs), null_residual=np.array(Ns), C0=float(Cs[0]),
        classification=cls, branch=branch, exit_reason=exit_reason, boundary_flag=flag,
        F_of_xdot=F, Fl_of_xdot=Fl,
    )


def t_reparametrize(trace: GeodesicTrace, scenario: Scenario | None = None) -> GeodesicTrace:
    """Use ``t`` as the parameter: velocities become ``xdot / tdot``.

    The conserved quantities are reported for the reparametrised curve, i.e.
    ``C / tdot`` and ``null_residual / tdot^2``.
    """
    if np.any(trace.tdot <= 0):
        raise ValueError("t is not increasing along this trace")
    r = trace.tdot
    v = trace.xdot / r[:, None]
    if scenario is not None:
        F, Fl = _metric_columns(scenario, trace.x, v)
    else:
        F, Fl = trace.F_of_xdot / r, trace.Fl_of_xdot / r
    return replace(
        trace, s=trace.t.copy(), tdot=np.ones_like(r), xdot=v, C=trace.C / r,
        null_residual=trace.null_residual / r ** 2, F_of_xdot=F, Fl_of_xdot=Fl, t_parametrized=True,
    )


def position_at_time(trace: GeodesicTrace, tq):
    """Cubic Hermite interpolation of the projected path at times ``tq``."""
    spline = CubicHermiteSpline(trace.t, trace.x, trace.xdot / trace.tdot[:, None])
    return spline(tq)


def is_exceptional_point(local: LocalData, tol: float = 1e-8) -> bool:
    """Critical point where ``dlam`` vanishes on ``ker omega``: the vertical line
    through it lifts to a lightlike pregeodesic."""
    if classify(local) is not WindClass.CRITICAL:
        return False
    k = np.array([-local.omega[1], local.omega[0]])
    nk = float(np.linalg.norm(k))
    if nk == 0.0:
        return False
    return abs(float(local.dlam @ k)) <= tol * nk * (1.0 + float(np.linalg.norm(local.dlam)))


# --- shooting --------------------------------------------------------------------

def _angle(v) -> float:
    return math.atan2(v[1], v[0])


def boundary_directions(local: LocalData) -> list[np.ndarray]:
    """Unit (Euclidean) directions on the boundary of the strong cone."""
    if classify(local) is not WindClass.STRONG:
        return []
    H = local.lam * local.g0 + np.outer(local.omega, local.omega)
    evals, R = np.linalg.eigh(H)
    lneg, lpos = evals  # ascending
    out = []
    for sgn in (1.0, -1.0):
        u = R[:, 1] * math.sqrt(-lneg) + sgn * R[:, 0] * math.sqrt(lpos)
        if float(local.omega @ u) > 0:
            u = -u
        out.append(u / np.linalg.norm(u))
    return out


def admissible_sector(local: LocalData, branch) -> tuple[float, float, bool]:
    """``(a, b, periodic)``: launch angles lie in the open interval ``(a, b)``."""
    branch = Branch.parse(branch)
    wc = classify(local)
    if wc is WindClass.MILD:
        if branch is Branch.FL:
            raise NoAdmissibleSector("F_l is infinite at a mild point")
        return 0.0, 2.0 * math.pi, True
    if wc is WindClass.CRITICAL:
        if branch is Branch.FL:
            raise NoAdmissibleSector("F_l is infinite at a critical point")
        c = _angle(-local.omega)
        return c - 0.5 * math.pi, c + 0.5 * math.pi, False
    u1, u2 = boundary_directions(local)
    c = _angle(-np.linalg.solve(local.g0, local.omega))
    a1 = c + math.remainder(_angle(u1) - c, 2 * math.pi)
    a2 = c + math.remainder(_angle(u2) - c, 2 * math.pi)
    return min(a1, a2), max(a1, a2), False


def _unit_velocity(local: LocalData, theta, branch: Branch):
    u = np.array([math.cos(theta), math.sin(theta)])
    Z = eval_F(local, u) if branch is not Branch.FL else float(eval_Fl(local, u))
    return u / Z


@dataclass
class ShotHit:
    angle: float
    arrival_time: float
    trace: GeodesicTrace
    miss: float
    s_hit: float
    branch: Branch


def _segment_closest(p0, p1, y0):
    """Closest point parameter, distance and side of ``y0`` for segments p0->p1."""
    d = p1 - p0
    dd = np.sum(d * d, axis=-1)
    with np.errstate(invalid="ignore", divide="ignore"):
        lam = np.where(dd > 0, np.sum((y0 - p0) * d, axis=-1) / dd, 0.0)
    lam = np.clip(lam, 0.0, 1.0)
    c = p0 + lam[..., None] * d
    r = y0 - c
    dist = np.sqrt(np.sum(r * r, axis=-1))
    side = np.sign(d[..., 0] * r[..., 1] - d[..., 1] * r[..., 0])
    return lam, dist, side


def _batch_scan(scenario: Scenario, x0, vs: np.ndarray, tds: np.ndarray, y0, h: float, s_max: float):
    """Integrate many rays at once; track the closest approach to ``y0``."""
    n = len(vs)
    chart = scenario.chart
    jet = scenario.jet_array
    Y = np.array(y0, float)
    st = np.zeros((n, 6))
    st[:, 1], st[:, 2] = x0[0], x0[1]
    st[:, 3] = tds
    st[:, 4:6] = vs
    best_d = np.full(n, np.inf)
    best_signed = np.full(n, np.inf)
    best_s = np.zeros(n)
    best_t = np.zeros(n)
    active = np.arange(n)
    s = 0.0
    while active.size and s < s_max:
        hs = min(h, s_max - s)
        cur = st[active]
        t, x, y, td, u1, u2 = cur.T

        def f(xx, yy, tdv, a, b):
            return _rhs(jet(xx, yy), tdv, a, b)

        hh = 0.5 * hs
        k0 = f(x, y, td, u1, u2)
        x1, y1, td1, u11, u21 = x + hh * u1, y + hh * u2, td + hh * k0[0], u1 + hh * k0[1], u2 + hh * k0[2]
        k1 = f(x1, y1, td1, u11, u21)
        x2, y2, td2, u12, u22 = x + hh * u11, y + hh * u21, td + hh * k1[0], u1 + hh * k1[1], u2 + hh * k1[2]
        k2 = f(x2, y2, td2, u12, u22)
        x3, y3, td3, u13, u23 = x + hs * u12, y + hs * u22, td + hs * k2[0], u1 + hs * k2[1], u2 + hs * k2[2]
        k3 = f(x3, y3, td3, u13, u23)
        h6 = hs / 6.0
        new = np.empty_like(cur)
        new[:, 0] = t + h6 * (td + 2 * td1 + 2 * td2 + td3)
        new[:, 1] = x + h6 * (u1 + 2 * u11 + 2 * u12 + u13)
        new[:, 2] = y + h6 * (u2 + 2 * u21 + 2 * u22 + u23)
        new[:, 3] = td + h6 * (k0[0] + 2 * k1[0] + 2 * k2[0] + k3[0])
        new[:, 4] = u1 + h6 * (k0[1] + 2 * k1[1] + 2 * k2[1] + k3[1])
        new[:, 5] = u2 + h6 * (k0[2] + 2 * k1[2] + 2 * k2[2] + k3[2])
        inside = chart.contains_array(new[:, 1], new[:, 2]) & np.all(np.isfinite(new), axis=1)
        lam, dist, side = _segment_closest(cur[:, 1:3], new[:, 1:3], Y)
        better = inside & (dist < best_d[active])
        idx = active[better]
        best_d[idx] = dist[better]
        best_signed[idx] = side[better] * dist[better]
        best_s[idx] = s + lam[better] * hs
        best_t[idx] = cur[better, 0] + lam[better] * (new[better, 0] - cur[better, 0])
        st[active] = np.where(inside[:, None], new, cur)
        active = active[inside]
        s += hs
    return best_signed, best_s, best_t


def _closest_on_trace(trace: GeodesicTrace, y0):
    Y = np.asarray(y0, float)
    if len(trace.s) < 2:
        d = float(np.linalg.norm(trace.x[0] - Y))
        return d, 0.0, 0
    lam, dist, side = _segment_closest(trace.x[:-1], trace.x[1:], Y)
    k = int(np.argmin(dist))
    s = trace.s[k] + lam[k] * (trace.s[k + 1] - trace.s[k])
    return float(side[k] * dist[k]), float(s), k


def shoot(scenario: Scenario, x0, y0, branch="F", angular_samples: int = 720, s_max: float | None = None,
          step: float | None = None, scan_step: float | None = None, hit_tol: float | None = None,
          xtol: float = 1e-10) -> list[ShotHit]:
    """Launch rays with ``tdot(0) = 1`` across the admissible sector at ``x0``
    and return every direction whose geodesic passes through ``y0``.

    A coarse batched scan brackets sign changes of the signed miss distance,
    each bracket is refined by Brent's method on the angle at the fine
    ``step``, and hits farther than ``hit_tol`` from ``y0`` are discarded.
    """
    branch = Branch.parse(branch)
    x0 = np.asarray(x0, float)
    y0 = np.asarray(y0, float)
    if np.allclose(x0, y0):
        raise ValueError("x0 and y0 coincide")
    diag = scenario.chart.diagonal
    step = 1e-3 * diag if step is None else step
    scan_step = 10.0 * step if scan_step is None else scan_step
    s_max = 5.0 * diag if s_max is None else s_max
    hit_tol = 1e-6 * diag if hit_tol is None else hit_tol
    local = scenario.local_data(x0)
    a, b, periodic = admissible_sector(local, branch)
    n = int(angular_samples)
    if periodic:
        thetas = a + (b - a) * np.arange(n) / n
    else:
        thetas = a + (b - a) * (np.arange(n) + 0.5) / n
    vs = np.array([_unit_velocity(local, th, branch) for th in thetas])
    signed, s_at, _ = _batch_scan(scenario, x0, vs, np.ones(n), y0, scan_step, s_max)

    pairs = [(i, i + 1) for i in range(n - 1)]
    if periodic:
        pairs.append((n - 1, 0))

    def refined(theta, s_lim):
        v = _unit_velocity(local, theta, branch)
        tr = integrate(scenario, x0, v, branch, s_lim, step, adaptive=False)
        return tr

    hits: list[ShotHit] = []
    for i, j in pairs:
        fi, fj = signed[i], signed[j]
        if not (np.isfinite(fi) and np.isfinite(fj)) or fi * fj > 0:
            continue
        if min(abs(fi), abs(fj)) > 0.25 * float(np.linalg.norm(y0 - x0)) + 10 * scan_step:
            continue  # sign flip of the far side, not a crossing
        ta, tb = thetas[i], thetas[j] + (2 * math.pi if periodic and j == 0 else 0.0)
        s_lim = min(s_max, 1.5 * max(s_at[i], s_at[j]) + 20.0 * scan_step)

        def miss(theta):
            return _closest_on_trace(refined(theta, s_lim), y0)[0]

        try:
            ma, mb = miss(ta), miss(tb)
            if ma * mb > 0:
                # the coarse chords can misplace a root lying next to a sample
                w = tb - ta
                ta, tb, ma, mb = _widen(miss, ta, tb, ma, mb, w, a, b, periodic)
            if ma == 0.0:
                th = ta
            elif mb == 0.0:
                th = tb
            elif ma * mb > 0:
                continue
            else:
                th = brentq(miss, ta, tb, xtol=xtol, rtol=4 * np.finfo(float).eps)
        except (GeodesicAbort, MetricDomainError):
            continue
        tr = refined(th, s_lim)
        m, s_hit, _ = _closest_on_trace(tr, y0)
        if abs(m) > hit_tol or s_hit <= 0:
            continue
        tr = refined(th, s_hit)
        hits.append(ShotHit(angle=math.remainder(th, 2 * math.pi), arrival_time=float(tr.t[-1]), trace=tr,
                            miss=float(np.linalg.norm(tr.x[-1] - y0)), s_hit=s_hit, branch=branch))
    return _dedupe(hits)


def _widen(miss, ta, tb, ma, mb, w, a, b, periodic):
    """Look one scan sample beyond each end of a bracket for a sign change."""
    lo, hi = ta - w, tb + w
    if not periodic:
        lo, hi = max(lo, a), min(hi, b)
    if lo < ta:
        ml = miss(lo)
        if ml * ma <= 0:
            return lo, ta, ml, ma
    if hi > tb:
        mh = miss(hi)
        if mh * mb <= 0:
            return tb, hi, mb, mh
    return ta, tb, ma, mb


def _dedupe(hits: list[ShotHit]) -> list[ShotHit]:
    out: list[ShotHit] = []
    for h in sorted(hits, key=lambda h: h.arrival_time):
        if any(abs(math.remainder(h.angle - o.angle, 2 * math.pi)) < 1e-7 for o in out):
            continue
        out.append(h)
    return out


def shoot_boundary(scenario: Scenario, x0, y0, s_max: float | None = None, step: float | None = None,
                   hit_tol: float | None = None) -> list[ShotHit]:
    """Boundary-direction geodesics from ``x0`` that pass through ``y0``."""
    x0 = np.asarray(x0, float)
    diag = scenario.chart.diagonal
    step = 1e-3 * diag if step is None else step
    s_max = 5.0 * diag if s_max is None else s_max
    hit_tol = 1e-6 * diag if hit_tol is None else hit_tol
    local = scenario.local_data(x0)
    hits = []
    for u in boundary_directions(local):
        v = u / eval_F(local, u)
        try:
            tr = integrate(scenario, x0, v, Branch.BOUNDARY, s_max, step, adaptive=False)
        except GeodesicAbort:
            continue
        m, s_hit, _ = _closest_on_trace(tr, y0)
        if abs(m) <= hit_tol and s_hit > 0:
            tr = integrate(scenario, x0, v, Branch.BOUNDARY, s_hit, step, adaptive=False)
            hits.append(ShotHit(angle=_angle(u), arrival_time=float(tr.t[-1]), trace=tr,
                                miss=float(np.linalg.norm(tr.x[-1] - np.asarray(y0))), s_hit=s_hit,
                                branch=Branch.BOUNDARY))
    return hits


# --- Fermat stationarity ----------------------------------------------------------

@dataclass
class FermatResult:
    dT_dtheta: float
    T: float
    T_plus: float
    T_minus: float
    delta: float


def _length(scenario: Scenario, s, x, v, branch: Branch) -> float:
    F, Fl = _metric_columns(scenario, x, v)
    Z = Fl if branch is Branch.FL else F
    if not np.all(np.isfinite(Z)):
        raise MetricDomainError("varied curve left the admissible cone")
    return float(np.sum(0.5 * np.diff(s) * (Z[:-1] + Z[1:])))


def _central_difference(fn, theta: float, delta: float) -> FermatResult:
    tp, tm, t0 = fn(theta + delta), fn(theta - delta), fn(theta)
    return FermatResult((tp - tm) / (2.0 * delta), t0, tp, tm, delta)


def fermat_stationarity(scenario: Scenario, x0, y0, hit: ShotHit, delta: float = 1e-3,
                        step: float | None = None) -> FermatResult:
    """``dT/dtheta`` of the arrival time over a one-parameter family of curves
    from ``x0`` to ``y0`` through the hit.

    Member ``theta`` is the geodesic launched at angle ``theta`` plus the
    correction ``(s/s_hit)^2 (y0 - x(s_hit))``, which keeps the launch angle and
    lands on ``y0`` at ``s_hit``; its arrival time is the ``F`` (or ``F_l``)
    length.
    """
    x0 = np.asarray(x0, float)
    y0 = np.asarray(y0, float)
    branch = hit.branch
    local = scenario.local_data(x0)
    step = hit.trace.s[1] - hit.trace.s[0] if step is None and len(hit.trace.s) > 1 else step

    def T(theta):
        v = _unit_velocity(local, theta, branch)
        tr = integrate(scenario, x0, v, branch, hit.s_hit, step, adaptive=False)
        if tr.exit_reason != "s_max":
            raise MetricDomainError("varied geodesic left the chart before the target")
        w = tr.s / tr.s[-1]
        gap = y0 - tr.x[-1]
        x = tr.x + (w * w)[:, None] * gap
        v = tr.xdot + (2.0 * w / tr.s[-1])[:, None] * gap
        return _length(scenario, tr.s, x, v, branch)

    return _central_difference(T, hit.angle, delta)


def broken_path_stationarity(scenario: Scenario, x0, y0, theta: float, branch="F", delta: float = 1e-3,
                             samples: int = 400) -> FermatResult:
    """Same derivative for the two-segment family ``x0 -> m(theta) -> y0`` with
    ``m(theta)`` at half the target distance from ``x0`` in direction ``theta``."""
    branch = Branch.parse(branch)
    x0 = np.asarray(x0, float)
    y0 = np.asarray(y0, float)
    r = 0.5 * float(np.linalg.norm(y0 - x0))
    u = np.linspace(0.0, 1.0, samples)

    def T(th):
        m = x0 + r * np.array([math.cos(th), math.sin(th)])
        total = 0.0
        for a, b in ((x0, m), (m, y0)):
            x = a + u[:, None] * (b - a)
            v = np.broadcast_to(b - a, x.shape)
            total += _length(scenario, u, x, v, branch)
        return total

    return _central_difference(T, theta, delta)
