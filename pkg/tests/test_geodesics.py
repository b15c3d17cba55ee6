import csv
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from windnav.geodesics import (
    Branch,
    GeodesicAbort,
    GeodesicClass,
    NoAdmissibleSector,
    admissible_sector,
    boundary_directions,
    broken_path_stationarity,
    fermat_stationarity,
    geodesic_rhs,
    integrate,
    is_exceptional_point,
    killing_constant,
    lift_initial,
    null_residual,
    position_at_time,
    shoot,
    t_reparametrize,
)
from windnav.metrics import MetricDomainError, eval_F
from windnav.scenario import LocalData, Scenario, change_splitting

from conftest import SQ3, constant_wind, smooth_random_scenario

STRONG = LocalData.from_wind((2.0, 0.0))
BOUNDARY_V = (1.5, SQ3 / 2)


@pytest.mark.parametrize("v, branch, tdot, C", [
    ((3, 0), "F", 1.0, -3.0),
    ((1, 0), "Fl", 1.0, 1.0),
    (BOUNDARY_V, "Boundary", 1.0, 0.0),
])
def test_lift_initial(v, branch, tdot, C):
    td, u = lift_initial(STRONG, v, branch)
    assert td == pytest.approx(tdot, rel=1e-7)
    assert killing_constant(STRONG, td, u) == pytest.approx(C, abs=1e-6)
    assert abs(null_residual(STRONG, td, u)) <= 1e-12


def test_lift_initial_errors():
    with pytest.raises(MetricDomainError):
        lift_initial(STRONG, (0, 1), "F")
    with pytest.raises(MetricDomainError):
        lift_initial(LocalData.from_wind((0.5, 0)), (1, 0), "Fl")
    with pytest.raises(MetricDomainError):
        lift_initial(STRONG, (1, 0), "Boundary")


def test_rhs_constant_wind_is_free():
    d = geodesic_rhs(STRONG, (0, 0, 0, 1.0, 3.0, 0.0))
    assert d[3:] == (0.0, 0.0, 0.0)


def test_rhs_total_on_inadmissible_state():
    S = Scenario.analytic((-2, 2, -2, 2), wind=("x", "0"))
    d = geodesic_rhs(S.local_data((1, 0)), (0, 1, 0, 1.0, 0.0, 0.0))
    assert all(math.isfinite(c) for c in d)


def test_rhs_riemannian_reduces_to_levi_civita():
    S = Scenario.analytic((-2, 2, -2, 2), g0=("1+0.3*x^2", "0.1*y", "1+0.2*sin(x)"), wind=("0", "0"))
    L = S.local_data((0.4, -0.3))
    u = np.array([0.7, -0.2])
    td = math.sqrt(u @ L.g0 @ u)
    d = geodesic_rhs(L, (0, 0.4, -0.3, td, *u))
    want = -np.einsum("kij,i,j->k", L.christoffel, u, u)
    assert d[3] == pytest.approx(0.0, abs=1e-15)
    assert np.allclose(d[4:], want, atol=1e-14)


def _acc_3d(scenario, p, V, h=1e-5):
    """Accelerations from the Christoffel symbols of the full 3-metric."""
    def metric(x, y):
        gxx, gxy, gyy, ox, oy, lam = scenario.triple_at(x, y)
        return np.array([[-lam, ox, oy], [ox, gxx, gxy], [oy, gxy, gyy]])

    G = metric(*p)
    dG = np.zeros((3, 3, 3))
    for k, (dx, dy) in ((1, (h, 0)), (2, (0, h))):
        dG[k] = (metric(p[0] + dx, p[1] + dy) - metric(p[0] - dx, p[1] - dy)) / (2 * h)
    first = 0.5 * (np.einsum("bdc->dbc", dG) + np.einsum("cdb->dbc", dG) - dG)
    gam = np.einsum("ad,dbc->abc", np.linalg.inv(G), first)
    return -np.einsum("abc,b,c->a", gam, V, V)


@pytest.mark.parametrize("p, td, u", [((0.3, -0.4), 1.3, (0.7, -0.2)), ((-1.1, 0.9), 0.4, (-0.3, 1.1))])
def test_rhs_matches_spacetime_christoffel_symbols(p, td, u):
    S = Scenario.analytic((-2, 2, -2, 2), g0=("1+0.3*sin(x)*cos(y)", "0.1*x*y", "1+0.2*x^2"),
                          triple=("sin(y)-0.5", "cos(x)*y", "0.5+0.1*exp(-x^2)-0.1*y"))
    d = geodesic_rhs(S.local_data(p), (0, *p, td, *u))
    assert np.allclose(d[3:], _acc_3d(S, p, np.array([td, *u])), rtol=1e-7, atol=1e-8)


@pytest.mark.parametrize("v, branch, end, C, cls", [
    ((3, 0), "F", (3, 0), -3.0, GeodesicClass.F_GEODESIC),
    ((1, 0), "Fl", (1, 0), 1.0, GeodesicClass.FL_GEODESIC),
    (BOUNDARY_V, "Boundary", BOUNDARY_V, 0.0, GeodesicClass.BOUNDARY),
])
def test_integrate_constant_wind(v, branch, end, C, cls):
    S = constant_wind((2.0, 0.0), chart=(-5, 5, -5, 5))
    tr = integrate(S, (0, 0), v, branch, 1.0, 1e-3)
    assert np.allclose(tr.endpoint, end, atol=1e-8)
    assert tr.t[-1] == pytest.approx(1.0, abs=1e-7)
    assert tr.C0 == pytest.approx(C, abs=1e-6)
    assert tr.classification is cls
    assert tr.boundary_flag == (cls is GeodesicClass.BOUNDARY)


def test_t_reparametrize_constant_wind():
    S = constant_wind((2.0, 0.0), chart=(-5, 5, -5, 5))
    rt = t_reparametrize(integrate(S, (0, 0), (3, 0), "F", 1.0, 1e-2), S)
    assert np.allclose(rt.x, np.column_stack([3 * rt.s, 0 * rt.s]), atol=1e-12)
    assert np.allclose(rt.F_of_xdot, 1.0, atol=1e-12)
    rt = t_reparametrize(integrate(S, (0, 0), (1, 0), "Fl", 1.0, 1e-2), S)
    assert np.allclose(rt.x[:, 0], rt.s, atol=1e-12)
    assert np.allclose(rt.Fl_of_xdot, 1.0, atol=1e-12)


def test_t_reparametrize_riemannian_is_identity():
    S = constant_wind((0.0, 0.0))
    tr = integrate(S, (0, 0), (0.6, 0.8), "F", 2.0, 1e-2)
    rt = t_reparametrize(tr, S)
    assert np.allclose(rt.s, tr.s, atol=1e-12)
    assert np.allclose(rt.x, tr.x, atol=1e-12)


def test_integrate_stops_at_chart_exit():
    S = constant_wind((2.0, 0.0), chart=(-1, 1, -1, 1))
    tr = integrate(S, (0, 0), (3, 0), "F", 5.0, 1e-3)
    assert tr.exit_reason != "s_max"
    assert tr.endpoint[0] <= 1.0 and tr.s[-1] < 1.0


def test_integrate_aborts_on_monitor_blow_up():
    S = Scenario.analytic((-3, 3, -3, 3), g0=("1+0.1*x^2", "0.05", "1"), wind=("0.8*sin(y)", "0.6*cos(x)"))
    p = (0.6574161, 1.71554053)
    th = 3.8665786907160857
    v = np.array([math.cos(th), math.sin(th)])
    with pytest.raises(GeodesicAbort, match="null residual"):
        integrate(S, p, v, "F", 2.0, adaptive=False)
    with pytest.raises(GeodesicAbort, match="step budget"):
        integrate(S, p, v, "F", 2.0)


def test_trace_csv_columns(tmp_path):
    S = constant_wind((2.0, 0.0))
    tr = integrate(S, (0, 0), (3, 0), "F", 0.1, 1e-2)
    tr.to_csv(tmp_path / "t.csv")
    rows = list(csv.reader(open(tmp_path / "t.csv")))
    assert rows[0] == ["s", "t", "x", "y", "tdot", "xdot", "ydot", "C", "null_residual", "F_of_xdot", "Fl_of_xdot"]
    assert len(rows) == len(tr.s) + 1


def test_position_at_time_interpolates():
    S = constant_wind((0.5, 0.0))
    tr = integrate(S, (0, 0), (0.0, 1.0), "F", 1.0, 1e-2)
    p = position_at_time(tr, 0.5 * tr.t[-1])
    assert np.allclose(p, 0.5 * tr.endpoint, atol=1e-10)


def test_fourth_order_convergence():
    rng = np.random.default_rng(11)
    S = smooth_random_scenario(rng, "mild")
    v = (0.6, 0.5)
    ends = [integrate(S, (0.3, -0.4), v, "F", 5.0, h, adaptive=False).endpoint for h in (0.1, 0.05, 0.0125)]
    ratio = np.linalg.norm(ends[0] - ends[2]) / np.linalg.norm(ends[1] - ends[2])
    assert 12 <= ratio <= 20


def test_splitting_invariance():
    S = Scenario.analytic((-4, 4, -4, 4), wind=("0.4+0.2*sin(y)", "0.3*cos(x)"))
    f = "0.05*x*y + 0.1*sin(0.5*x)"
    Sf = change_splitting(S, f)
    for th in np.linspace(0, 2 * math.pi, 7)[:-1]:
        v = np.array([math.cos(th), math.sin(th)])
        a = integrate(S, (0.2, 0.1), v, "F", 2.5, 1e-3)
        b = integrate(Sf, (0.2, 0.1), v, "F", 2.5, 1e-3)
        n = min(len(a.s), len(b.s))
        assert np.max(np.abs(a.x[:n] - b.x[:n])) <= 1e-6
        # the time function shifts by f, so t_b - t_a = -(f(x) - f(x0)) along the curve
        fx = 0.05 * a.x[:n, 0] * a.x[:n, 1] + 0.1 * np.sin(0.5 * a.x[:n, 0])
        f0 = 0.05 * 0.2 * 0.1 + 0.1 * math.sin(0.1)
        assert np.allclose(b.t[:n] - a.t[:n], -(fx - f0), atol=1e-8)


def test_exceptional_point_detector():
    # lam = x - 1 + y^2 with omega = -dx: critical on the parabola, d lam on ker omega = 2y
    S = Scenario.analytic((-0.5, 2, -0.7, 0.7), triple=("-1", "0", "x-y^2"))
    assert is_exceptional_point(S.local_data((0.0, 0.0)))
    assert not is_exceptional_point(S.local_data((0.25, 0.5)))
    assert not is_exceptional_point(S.local_data((1.0, 0.0)))


def test_exceptional_vertical_geodesic_stands_still():
    S = Scenario.analytic((-0.5, 2, -0.7, 0.7), triple=("-1", "0", "x-y^2"))
    tr = integrate(S, (0.0, 0.0), (0.0, 0.0), "Boundary", 1.0, 1e-2)
    assert tr.classification is GeodesicClass.EXCEPTIONAL
    assert np.allclose(tr.x, 0.0)
    # tddot = tdot^2 / 2 on this line, so t = -2 log(1 - s/2)
    assert np.allclose(tr.t, -2 * np.log(1 - tr.s / 2), atol=1e-9)


def test_sectors_and_boundary_directions():
    a, b, periodic = admissible_sector(STRONG, "F")
    assert not periodic and b - a == pytest.approx(math.pi / 3)
    dirs = boundary_directions(STRONG)
    assert sorted(round(math.degrees(math.atan2(u[1], u[0])), 9) for u in dirs) == [-30.0, 30.0]
    a, b, periodic = admissible_sector(LocalData.from_wind((1.0, 0.0)), "F")
    assert b - a == pytest.approx(math.pi)
    assert admissible_sector(LocalData.from_wind((0.5, 0.0)), "F")[2]
    with pytest.raises(NoAdmissibleSector):
        admissible_sector(LocalData.from_wind((0.5, 0.0)), "Fl")


# --- shooting and Fermat -----------------------------------------------------------

@pytest.fixture(scope="module")
def strong5():
    return constant_wind((2.0, 0.0), chart=(-5, 5, -5, 5))


def test_shoot_worked_values(strong5):
    hits = shoot(strong5, (0, 0), (2, 0.5), "F")
    assert len(hits) == 1
    assert hits[0].arrival_time == pytest.approx(4.25 / (4 + math.sqrt(3.25)), abs=1e-3)
    hits = shoot(strong5, (0, 0), (2, 0.5), "Fl")
    assert len(hits) == 1
    assert hits[0].arrival_time == pytest.approx(4.25 / (4 - math.sqrt(3.25)), abs=1e-3)


def test_shoot_outside_cone_misses(strong5):
    assert shoot(strong5, (0, 0), (0, 1), "F") == []


def test_shoot_rejects_coincident_points(strong5):
    with pytest.raises(ValueError):
        shoot(strong5, (1, 1), (1, 1))


def test_fermat_strong_straight_line(strong5):
    hit = shoot(strong5, (0, 0), (3, 0), "F")[0]
    res = fermat_stationarity(strong5, (0, 0), (3, 0), hit)
    assert hit.arrival_time == pytest.approx(1.0, abs=1e-3)
    assert abs(res.dT_dtheta) <= 1e-3


def test_fermat_mild_crosswind():
    S = constant_wind((0.5, 0.0), chart=(-5, 5, -5, 5))
    hit = shoot(S, (0, 0), (0, 1), "F")[0]
    assert hit.arrival_time == pytest.approx(2 / SQ3, abs=1e-3)
    assert abs(fermat_stationarity(S, (0, 0), (0, 1), hit).dT_dtheta) <= 1e-3


def test_broken_path_negative_control(strong5):
    res = broken_path_stationarity(strong5, (0, 0), (3, 0), 0.3)
    assert abs(res.dT_dtheta) > 1e-2


# --- conservation properties -------------------------------------------------------

@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from(["mild", "strong"]), st.floats(0, 2 * math.pi))
def test_conservation_and_correspondence(seed, kind, th):
    rng = np.random.default_rng(seed)
    S = smooth_random_scenario(rng, kind)
    L = S.local_data((0.0, 0.0))
    a, b, _ = admissible_sector(L, "F")
    ang = a + (b - a) * (0.05 + 0.9 * th / (2 * math.pi))
    u = np.array([math.cos(ang), math.sin(ang)])
    branches = ["F", "Fl"] if kind == "strong" else ["F"]
    for br in branches:
        v = u / (eval_F(L, u) if br == "F" else float(__import__("windnav").metrics.eval_Fl(L, u)))
        tr = integrate(S, (0.0, 0.0), v, br, 3.0, 1e-3)
        assert tr.C_drift <= 1e-8 and tr.max_null_residual <= 1e-8
        rt = t_reparametrize(tr, S)
        Z = rt.F_of_xdot if br == "F" else rt.Fl_of_xdot
        assert np.max(np.abs(Z - 1)) <= 1e-6
        # C^2 = h(xdot, xdot) in the t parametrisation
        gxx, gxy, gyy, ox, oy, lam = S.triple_array(rt.x[:, 0], rt.x[:, 1])
        vx, vy = rt.xdot[:, 0], rt.xdot[:, 1]
        w = ox * vx + oy * vy
        h = lam * (gxx * vx * vx + 2 * gxy * vx * vy + gyy * vy * vy) + w * w
        assert np.max(np.abs(rt.C ** 2 - h)) <= 1e-8


def test_boundary_geodesic_is_h_null():
    rng = np.random.default_rng(5)
    S = smooth_random_scenario(rng, "strong")
    L = S.local_data((0.0, 0.0))
    for u in boundary_directions(L):
        tr = integrate(S, (0.0, 0.0), u / eval_F(L, u), Branch.BOUNDARY, 2.0, 1e-3)
        assert tr.classification is GeodesicClass.BOUNDARY
        rt = t_reparametrize(tr, S)
        gxx, gxy, gyy, ox, oy, lam = S.triple_array(rt.x[:, 0], rt.x[:, 1])
        vx, vy = rt.xdot[:, 0], rt.xdot[:, 1]
        w = ox * vx + oy * vy
        h = lam * (gxx * vx * vx + 2 * gxy * vx * vy + gyy * vy * vy) + w * w
        assert np.max(np.abs(h)) <= 1e-8
