import math

import numpy as np
import pytest
from scipy.spatial import cKDTree

from windnav.export import contour_segments
from windnav.geodesics import integrate, position_at_time
from windnav.metrics import eval_F
from windnav.reachability import (
    CFLViolation,
    EmptyRegion,
    arrival_field,
    ball_symmetry_check,
    boundary_cells,
    cauchy_development,
    cfl_limit,
    disk_mask,
    hausdorff,
    k_horizon,
    propagate_front,
    segment_mask,
    stencil,
)
from windnav.reachability import _edge_arrays
from windnav.scenario import GridSpec, OutOfChartError, Scenario

from conftest import constant_wind

X0 = (-0.5, 0.2)


@pytest.mark.parametrize("W", [(0.0, 0.0), (0.5, 0.0), (1.0, 0.0), (2.0, 0.0), (0.3, -1.7)])
def test_constant_wind_balls_are_displaced_disks(W):
    S = constant_wind(W)
    g = GridSpec(S.chart, 128)
    st = propagate_front(S, X0, 1.0, grid=g)
    for k in (len(st.masks) // 3, len(st.masks) - 1):
        t = st.times[k]
        disk = disk_mask(g, (X0[0] + t * W[0], X0[1] + t * W[1]), t)
        assert hausdorff(st.masks[k], disk, g) <= 2 * g.cell


def test_critical_origin_stays_on_the_boundary():
    S = constant_wind((1.0, 0.0))
    g = GridSpec(S.chart, 128)
    st = propagate_front(S, X0, 1.0, grid=g)
    for k in range(len(st.masks)):
        assert boundary_cells(st.masks[k])[g.index_of(X0)]


def test_backward_orientation_reverses_the_wind():
    S = constant_wind((0.5, 0.0))
    g = GridSpec(S.chart, 96)
    st = propagate_front(S, (0.5, 0.0), 1.0, grid=g, orientation="backward")
    t = st.times[-1]
    assert hausdorff(st.masks[-1], disk_mask(g, (0.5 - 0.5 * t, 0.0), t), g) <= 2 * g.cell


def test_front_errors():
    S = constant_wind((0.5, 0.0))
    g = GridSpec(S.chart, 64)
    with pytest.raises(CFLViolation):
        propagate_front(S, (0, 0), 1.0, 2 * cfl_limit(S, g), g)
    with pytest.raises(OutOfChartError):
        propagate_front(S, (5, 0), 1.0, grid=g)
    with pytest.raises(ValueError):
        propagate_front(S, (0, 0), 1.0, grid=g, orientation="sideways")


def test_slabs_contain_the_image_of_the_previous_slab():
    S = Scenario.analytic((-3, 3, -3, 3), wind=("0.8*sin(y)", "0.6*cos(x)"))
    g = GridSpec(S.chart, 96)
    st = propagate_front(S, (0.1, 0.05), 1.0, grid=g)
    X, Y = g.mesh()
    for k in (10, 20, len(st.masks) - 1):
        prev = st.masks[k - 1]
        # displace every cell of S_{k-1} with the local wind (the zero control)
        _, _, _, wx, wy = S.wind_array(X[prev], Y[prev])
        pts = np.column_stack([X[prev] + st.dt * wx, Y[prev] + st.dt * wy])
        near = np.array([st.masks[k][g.index_of(p)] for p in pts])
        assert near.mean() >= 0.99


def test_mild_origin_is_in_every_slab():
    S = Scenario.analytic((-3, 3, -3, 3), wind=("0.3*sin(y)", "0.2"))
    st = propagate_front(S, (0.1, 0.05), 1.0, grid=96)
    assert all(st.contains((0.1, 0.05), k) for k in range(len(st.masks)))


def test_front_converges_at_first_order():
    S = Scenario.analytic((-3, 3, -3, 3), wind=("0.8*sin(y)", "0.6*cos(x)"))
    r, ns = 1.2, (32, 64, 128)
    dt = 0.9 * cfl_limit(S, GridSpec(S.chart, ns[-1]))
    dt = r / math.ceil(r / dt)
    fronts = []
    for n in ns:
        g = GridSpec(S.chart, n)
        st = propagate_front(S, (0.1, 0.05), r, dt, g)
        fronts.append(np.array([p for seg in contour_segments(g, st.phi, 0.0) for p in seg]))

    def H(a, b):
        return max(cKDTree(b).query(a)[0].max(), cKDTree(a).query(b)[0].max())

    h1, h2 = H(fronts[0], fronts[1]), H(fronts[1], fronts[2])
    assert 0.4 <= h2 / h1 <= 0.6


def test_geodesic_endpoints_lie_on_the_front():
    S = Scenario.analytic((-3, 3, -3, 3), wind=("0.8*sin(y)", "0.6*cos(x)"))
    x0, r = (0.1, 0.05), 1.0
    g = GridSpec(S.chart, 128)
    st = propagate_front(S, x0, r, grid=g)
    k = int(math.ceil(r / st.dt - 1e-9))
    L = S.local_data(x0)
    for th in np.linspace(0, 2 * math.pi, 13)[:-1]:
        u = np.array([math.cos(th), math.sin(th)])
        tr = integrate(S, x0, u / eval_F(L, u), "F", 3.0, 1e-3)
        end = position_at_time(tr, st.times[k])
        assert st.distance_to(end, k) <= 2 * g.cell


# --- arrival field -----------------------------------------------------------------

def test_stencil_sizes():
    assert len(stencil(1)) == 8
    assert len(stencil(2)) == 16
    assert len(stencil(3)) == 32


@pytest.fixture(scope="module")
def mild_field():
    return arrival_field(constant_wind((0.5, 0.0)), (0, 0), 256)


@pytest.mark.parametrize("p, T", [((1, 0), 2 / 3), ((-1, 0), 2.0), ((0, 1), 2 / math.sqrt(3))])
def test_arrival_mild_worked_values(mild_field, p, T):
    assert mild_field.value_at(p) == pytest.approx(T, rel=0.02)


def test_arrival_origin_and_triangle_inequality(mild_field):
    af = mild_field
    assert af.value_at((0, 0)) == pytest.approx(0.0, abs=af.grid.cell)
    S = constant_wind((0.5, 0.0))
    src, dst, cost = _edge_arrays(S, af.grid, 2, None, strict=False)
    tau = af.tau.ravel()
    assert np.all(tau[dst] <= tau[src] + cost + 1e-12)


def test_arrival_calm_wind_matches_distance():
    S = constant_wind((0.0, 0.0))
    X, Y = GridSpec(S.chart, 256).mesh()
    r = np.hypot(X, Y)
    far = r >= 0.5
    af3 = arrival_field(S, (0, 0), 256, neighbor_order=3)
    assert np.max(np.abs(af3.tau[far] - r[far]) / r[far]) <= 0.02
    # a 16-point stencil is off by at most 1/cos(half the widest gap) - 1
    af2 = arrival_field(S, (0, 0), 256, neighbor_order=2)
    gap = math.atan2(1, 2)
    assert np.max(np.abs(af2.tau[far] - r[far]) / r[far]) <= 1 / math.cos(gap / 2) - 1 + 0.005
    for p in [(1.0, 0.0), (1.0, 1.0), (-2.0, 1.0)]:
        assert af2.value_at(p) == pytest.approx(math.hypot(*p), rel=0.02)


def test_arrival_critical_wind_half_plane():
    S = constant_wind((1.0, 0.0))
    for n in (128, 256):
        af = arrival_field(S, (0, 0), n)
        # every admissible velocity has a positive x component
        assert math.isinf(af.value_at((-0.2, 0.0)))
        assert af.value_at((1.0, 1.0)) == pytest.approx(1.0, rel=0.01)
        # lattice paths are admissible curves, so they never beat the exact time
        t = float(af.tau[af.grid.index_of((0.6, 1.0))])
        c = af.grid.center(*af.grid.index_of((0.6, 1.0)))
        assert math.isfinite(t) and t >= (c[0] ** 2 + c[1] ** 2) / (2 * c[0]) * (1 - 1e-12)


def test_arrival_agrees_with_front_membership():
    S = Scenario.analytic((-3, 3, -3, 3), wind=("0.3*sin(y)", "0.2"))
    g = GridSpec(S.chart, 128)
    st = propagate_front(S, (0.1, 0.05), 1.2, grid=g)
    af = arrival_field(S, (0.1, 0.05), g)
    mask = st.masks[-1]
    assert np.mean(mask == (af.tau <= st.times[-1])) >= 0.99


def test_arrival_T_max_distinguishes_truncation():
    S = constant_wind((2.0, 0.0))
    af = arrival_field(S, (0, 0), 96, T_max=0.5)
    i = af.grid.index_of((2.0, 0.5))
    assert math.isinf(af.tau[i]) and af.graph_reachable[i]
    assert not af.graph_reachable[af.grid.index_of((-1.0, 0.0))]


def test_path_to_ends_at_target(mild_field):
    path = mild_field.path_to((1.0, 0.5))
    assert np.allclose(path[0], (0, 0))
    assert np.linalg.norm(path[-1] - np.array([1.0, 0.5])) <= mild_field.grid.cell


# --- ball symmetry ------------------------------------------------------------------

@pytest.mark.parametrize("W", [(0.0, 0.0), (0.7, 0.3), (2.0, 0.0)])
def test_constant_wind_balls_are_symmetric(W):
    S = constant_wind(W, chart=(-2, 4, -3, 3))
    pairs = [((0, 0), (0.7 + W[0], 0.2 + W[1])), ((0, 0), (W[0] - 0.9, W[1] + 0.5)), ((0, 0), (2.0, -2.0))]
    for rep in ball_symmetry_check(S, pairs, 1.0, 96):
        assert rep.symmetric


def test_obstacle_breaks_ball_symmetry():
    # a thin wall across a strong wind: the backward ball of x1 wraps around the
    # tip while the forward ball of x0 is shadowed by it
    a, r = 0.5, 1.0
    s = r - 2 * a / math.sqrt(3)
    S = constant_wind((2.0, 0.0), chart=(-1.2, 1.6, -1.4, 1.4))
    g = GridSpec(S.chart, 96)
    aw = a + 1.5 * g.cell
    domain = ~segment_mask(g, (0, -aw), (0, aw), g.cell)
    x0, x1 = (-a * math.sqrt(3), 0.0), (2 * s, a)
    rep, = ball_symmetry_check(S, [(x0, x1)], r, g, domain=domain)
    assert rep.forward_in is False and rep.backward_in is True
    assert rep.counterexample
    # without the wall the same pair is symmetric
    rep, = ball_symmetry_check(S, [(x0, x1)], r, g)
    assert rep.symmetric


# --- Cauchy development and K-horizon ----------------------------------------------

def test_cauchy_calm_disk_is_a_light_cone():
    S = constant_wind((0.0, 0.0), chart=(-1.5, 1.5, -1.5, 1.5))
    g = GridSpec(S.chart, 96)
    cd = cauchy_development(S, disk_mask(g, (0, 0), 1.0), g, T_max=1.2)
    X, Y = g.mesh()
    R = np.hypot(X, Y)
    for t, D, H in zip(cd.times, cd.D_plus, cd.horizon()):
        if H.any():
            assert np.max(np.abs(R[H] - (1 - t))) <= 2 * g.cell
        assert not (D & (R > 1 - t + 2 * g.cell)).any()
    assert not cd.D_plus[-1].any()
    assert np.array_equal(cd.D_plus, cd.D_minus)


def test_cauchy_full_chart_shrinks_from_the_edges():
    S = constant_wind((0.0, 0.0), chart=(-1.5, 1.5, -1.5, 1.5))
    g = GridSpec(S.chart, 64)
    cd = cauchy_development(S, np.ones((64, 64), bool), g, T_max=0.5)
    X, Y = g.mesh()
    edge = 1.5 - np.maximum(np.abs(X), np.abs(Y))
    for t, D in zip(cd.times, cd.D_plus):
        assert D[edge > t + 2 * g.cell].all()


def test_empty_region_rejected():
    S = constant_wind((0.0, 0.0))
    with pytest.raises(EmptyRegion):
        cauchy_development(S, np.zeros((32, 32), bool), 32)
    with pytest.raises(EmptyRegion):
        k_horizon(S, np.zeros((32, 32), bool), 32)


def test_k_horizon_calm_is_empty():
    S = constant_wind((0.0, 0.0), chart=(-2, 2, -2, 2))
    g = GridSpec(S.chart, 128)
    X, _ = g.mesh()
    kh = k_horizon(S, X < 0, g)
    assert kh.reach.all() and not kh.horizon.any() and kh.converged


def test_k_horizon_strong_wind_is_the_edge_of_A():
    S = constant_wind((2.0, 0.0), chart=(-2, 2, -2, 2))
    g = GridSpec(S.chart, 128)
    X, _ = g.mesh()
    kh = k_horizon(S, X < 0, g)
    assert np.array_equal(kh.reach, X < 0)
    assert np.all(np.abs(X[kh.horizon]) <= g.cell)


def test_k_horizon_truncation_flag():
    S = constant_wind((0.0, 0.0), chart=(-2, 2, -2, 2))
    g = GridSpec(S.chart, 64)
    X, _ = g.mesh()
    kh = k_horizon(S, X < -1.5, g, T_max=0.5)
    assert kh.truncated
    assert np.all(X[kh.horizon] <= -1.5 + 0.5 + 2 * g.cell)
