"""Reachable sets, arrival times, Cauchy developments and K-horizons on a grid.

Exact-duration c-balls are propagated as the zero sublevel set of a value
function on cell centres,

    phi_{k+1}(y) = min_u phi_k(y - dt (W(y) + u)),    |u|_{g_R} <= 1

(the foot point uses ``y + dt (W + u)`` for backward balls).  Feet outside the
chart or touching a blocked cell get a large value, so the domain acts as a
hard wall.  First-arrival times come from a shortest-path solve on a lattice
whose edges cost ``F`` of the displacement at the edge midpoint.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy import ndimage
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, dijkstra

from .metrics import metric_arrays
from .scenario import Chart, GridSpec, OutOfChartError, Scenario

__all__ = [
    "ReachStack",
    "ArrivalField",
    "CauchyDevelopment",
    "KHorizon",
    "SymmetryReport",
    "CFLViolation",
    "EmptyRegion",
    "propagate_front",
    "propagate_set",
    "arrival_field",
    "ball_symmetry_check",
    "cauchy_development",
    "certify_cauchy_point",
    "k_horizon",
    "simulate_random_controls",
    "hausdorff",
    "boundary_cells",
    "stencil",
    "disk_mask",
    "segment_mask",
    "cfl_limit",
    "N_CONTROLS",
]

N_CONTROLS = 32
BAND = 6  # half width of the value-function band, in cells


class CFLViolation(ValueError):
    pass


class EmptyRegion(ValueError):
    pass


# --- helpers ---------------------------------------------------------------------------

def _as_grid(scenario: Scenario, grid) -> GridSpec:
    if isinstance(grid, GridSpec):
        return grid
    return GridSpec(scenario.chart, int(grid))


def disk_mask(grid: GridSpec, center, radius: float) -> np.ndarray:
    X, Y = grid.mesh()
    return (X - center[0]) ** 2 + (Y - center[1]) ** 2 <= radius ** 2


def segment_mask(grid: GridSpec, p, q, half_width: float | None = None) -> np.ndarray:
    """Cells within ``half_width`` (default half a cell) of the segment ``pq``."""
    hw = 0.5 * grid.cell if half_width is None else half_width
    X, Y = grid.mesh()
    p = np.asarray(p, float)
    d = np.asarray(q, float) - p
    lam = np.clip(((X - p[0]) * d[0] + (Y - p[1]) * d[1]) / float(d @ d), 0.0, 1.0)
    return np.hypot(X - p[0] - lam * d[0], Y - p[1] - lam * d[1]) <= hw


def boundary_cells(mask: np.ndarray, include_chart_edge: bool = False) -> np.ndarray:
    """Cells of ``mask`` with a 4-neighbour outside it."""
    m = np.asarray(mask, bool)
    pad = np.pad(m, 1, constant_values=not include_chart_edge)
    inner = pad[:-2, 1:-1] & pad[2:, 1:-1] & pad[1:-1, :-2] & pad[1:-1, 2:]
    return m & ~inner


def hausdorff(a: np.ndarray, b: np.ndarray, grid: GridSpec) -> float:
    """Hausdorff distance between two cell sets (chart units)."""
    a = np.asarray(a, bool)
    b = np.asarray(b, bool)
    if not a.any() and not b.any():
        return 0.0
    if not a.any() or not b.any():
        return math.inf
    sampling = (grid.dy, grid.dx)
    da = ndimage.distance_transform_edt(~a, sampling=sampling)
    db = ndimage.distance_transform_edt(~b, sampling=sampling)
    return float(max(db[a].max(), da[b].max()))


def _signed_distance(mask: np.ndarray, grid: GridSpec) -> np.ndarray:
    sampling = (grid.dy, grid.dx)
    out = ndimage.distance_transform_edt(~mask, sampling=sampling)
    inn = ndimage.distance_transform_edt(mask, sampling=sampling)
    # zero level halfway between a boundary cell centre and its outside neighbour
    return np.where(mask, 0.5 * grid.cell - inn, out - 0.5 * grid.cell)


def cfl_limit(scenario: Scenario, grid: GridSpec) -> float:
    """Largest admissible ``dt``: a cell divided by one plus the peak wind speed."""
    X, Y = grid.mesh()
    gxx, gxy, gyy, wx, wy = scenario.wind_array(X, Y)
    speed = np.sqrt(wx * wx + wy * wy)
    # Euclidean length of the largest g_R-unit control
    lam_min = 0.5 * (gxx + gyy) - np.sqrt(0.25 * (gxx - gyy) ** 2 + gxy ** 2)
    umax = 1.0 / np.sqrt(lam_min)
    return float(grid.cell / np.max(umax + speed))


def _controls(scenario: Scenario, grid: GridSpec, n_controls: int):
    """Displacement velocities ``W + u`` on the grid, one array per control."""
    X, Y = grid.mesh()
    gxx, gxy, gyy, wx, wy = scenario.wind_array(X, Y)
    lam = 1.0 - (gxx * wx * wx + 2 * gxy * wx * wy + gyy * wy * wy)
    # lower Cholesky factor of g_R: u = R^{-T} e has g_R(u, u) = 1
    r11 = np.sqrt(gxx)
    r21 = gxy / r11
    r22 = np.sqrt(gyy - r21 * r21)
    vel = []
    for k in range(n_controls):
        th = 2.0 * math.pi * k / n_controls
        e1, e2 = math.cos(th), math.sin(th)
        u2 = e2 / r22
        u1 = (e1 - r21 * u2) / r11
        vel.append((wx + u1, wy + u2))
    vel.append((wx, wy))  # pure drift
    still = lam >= 0
    vel.append((np.where(still, 0.0, wx), np.where(still, 0.0, wy)))  # stand still where allowed
    return vel


def _catmull_rom(t):
    t2 = t * t
    t3 = t2 * t
    return (0.5 * (-t3 + 2 * t2 - t), 0.5 * (3 * t3 - 5 * t2 + 2), 0.5 * (-3 * t3 + 4 * t2 + t), 0.5 * (t3 - t2))


class _Stepper:
    """Precomputed feet for every control on every cell.

    Values at the feet use separable Catmull-Rom interpolation; bilinear
    interpolation biases convex fronts inward by a fraction of a cell per step,
    which adds up over a sweep. The value function is clipped to a band of
    ``BAND`` cells so that blocked and off-chart cells hold bounded values;
    unbounded sentinels would leak through the negative lobes of the cubic.
    """

    def __init__(self, scenario: Scenario, grid: GridSpec, dt: float, sign: float, domain: np.ndarray | None,
                 n_controls: int):
        self.grid = grid
        n = grid.n
        X, Y = grid.mesh()
        free = np.ones((n, n), bool) if domain is None else np.asarray(domain, bool)
        self.free = free
        self.cap = BAND * grid.cell
        fl = free.ravel()
        self.feet = []
        for vx, vy in _controls(scenario, grid, n_controls):
            fx = X + sign * dt * vx
            fy = Y + sign * dt * vy
            fi, fj = grid.fractional_index(fx, fy)
            inside = grid.chart.contains_array(fx, fy)
            i0 = np.clip(np.floor(fi).astype(np.int64), 0, n - 2)
            j0 = np.clip(np.floor(fj).astype(np.int64), 0, n - 2)
            ti = np.clip(fi - i0, 0.0, 1.0)
            tj = np.clip(fj - j0, 0.0, 1.0)
            ok = inside.copy()
            # a foot touching a blocked cell is blocked
            for di, dj, wc in ((0, 0, (1 - ti) * (1 - tj)), (0, 1, (1 - ti) * tj),
                               (1, 0, ti * (1 - tj)), (1, 1, ti * tj)):
                ok &= fl[(i0 + di) * n + j0 + dj] | (wc == 0.0)
            rows = [np.clip(i0 + a, 0, n - 1) * n for a in (-1, 0, 1, 2)]
            cols = [np.clip(j0 + b, 0, n - 1) for b in (-1, 0, 1, 2)]
            self.feet.append((rows, cols, _catmull_rom(ti), _catmull_rom(tj), ok))

    def clip(self, phi: np.ndarray) -> np.ndarray:
        return np.where(self.free, np.clip(phi, -self.cap, self.cap), self.cap)

    def step(self, phi: np.ndarray, outside_in_set: bool = False) -> np.ndarray:
        outside_value = -self.cap if outside_in_set else self.cap
        flat = phi.ravel()
        best = np.full(phi.shape, np.inf)
        for rows, cols, wi, wj, ok in self.feet:
            v = 0.0
            for r, a in zip(rows, wi):
                line = wj[0] * flat[r + cols[0]] + wj[1] * flat[r + cols[1]] + wj[2] * flat[r + cols[2]] \
                    + wj[3] * flat[r + cols[3]]
                v = v + a * line
            v = np.where(ok, v, outside_value)
            np.minimum(best, v, out=best)
        return self.clip(best)


# --- front propagation -----------------------------------------------------------

@dataclass
class ReachStack:
    grid: GridSpec
    dt: float
    masks: np.ndarray  # (K+1, n, n) bool
    origin: tuple | None
    orientation: str
    phi: np.ndarray = field(repr=False)  # value function of the last slab
    domain: np.ndarray | None = field(default=None, repr=False)

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.masks))

    def ball(self, k: int) -> np.ndarray:
        return self.masks[k]

    def open_ball(self, k: int) -> np.ndarray:
        return ndimage.binary_erosion(self.masks[k])

    def slab_at(self, r: float) -> int:
        return int(round(r / self.dt))

    def contains(self, p, k: int | None = None) -> bool:
        k = len(self.masks) - 1 if k is None else k
        return bool(self.masks[k][self.grid.index_of(p)])

    def distance_to(self, p, k: int | None = None) -> float:
        """Chart distance from ``p``'s cell to the nearest cell of slab ``k``."""
        k = len(self.masks) - 1 if k is None else k
        m = self.masks[k]
        if not m.any():
            return math.inf
        d = ndimage.distance_transform_edt(~m, sampling=(self.grid.dy, self.grid.dx))
        return float(d[self.grid.index_of(p)])


def _check_dt(scenario: Scenario, grid: GridSpec, dt: float | None) -> float:
    lim = cfl_limit(scenario, grid)
    if dt is None:
        return 0.9 * lim
    if dt > lim * (1 + 1e-12):
        raise CFLViolation(f"dt={dt:.6g} exceeds the CFL limit {lim:.6g}")
    return float(dt)


def _frozen_ball_phi(scenario: Scenario, grid: GridSpec, x0, t: float, sign: float) -> np.ndarray:
    """Value function of the ball of radius ``t`` about ``x0`` with the fields
    frozen at ``x0``: a ``g_R`` disk of radius ``t`` centred at ``x0 +- t W``."""
    gxx, gxy, gyy, wx, wy = (float(np.ravel(v)[0]) for v in scenario.wind_array(np.array([x0[0]]), np.array([x0[1]])))
    X, Y = grid.mesh()
    dx = X - x0[0] - sign * t * wx
    dy = Y - x0[1] - sign * t * wy
    return np.sqrt(gxx * dx * dx + 2 * gxy * dx * dy + gyy * dy * dy) - t


def _sweep(stepper: _Stepper, phi: np.ndarray, k_start: int, K: int, masks: np.ndarray,
           outside: bool) -> np.ndarray:
    phi = stepper.clip(phi)
    for k in range(k_start + 1, K + 1):
        phi = stepper.step(phi, outside)
        masks[k] = phi <= 0.0
    return phi


def propagate_set(scenario: Scenario, initial: np.ndarray, r: float, dt: float | None = None,
                  grid=128, orientation: str = "forward", domain: np.ndarray | None = None,
                  outside_in_set: bool = False, n_controls: int = N_CONTROLS) -> ReachStack:
    """Exact-duration sweep of a cell set; ``outside_in_set`` treats everything
    beyond the chart as part of the initial set."""
    grid = _as_grid(scenario, grid)
    if r <= 0:
        raise ValueError("r must be positive")
    dt = _check_dt(scenario, grid, dt)
    if orientation not in ("forward", "backward"):
        raise ValueError("orientation must be 'forward' or 'backward'")
    sign = -1.0 if orientation == "forward" else 1.0
    stepper = _Stepper(scenario, grid, dt, sign, domain, n_controls)
    initial = np.asarray(initial, bool)
    if initial.any():
        phi = _signed_distance(initial, grid)
    else:
        phi = np.full(initial.shape, 10.0 * grid.chart.diagonal)
    K = int(math.ceil(r / dt - 1e-9))
    masks = np.empty((K + 1, grid.n, grid.n), bool)
    masks[0] = initial if domain is None else initial & domain
    phi = _sweep(stepper, phi, 0, K, masks, outside_in_set)
    return ReachStack(grid, dt, masks, None, orientation, phi, domain)


def propagate_front(scenario: Scenario, x0, r: float, dt: float | None = None, grid=128,
                    orientation: str = "forward", domain: np.ndarray | None = None,
                    n_controls: int = N_CONTROLS) -> ReachStack:
    """Stack of c-balls ``S_k`` of radius ``k dt`` about ``x0`` up to ``r``.

    Slabs thinner than a few cells are taken from the ball with the fields
    frozen at ``x0``; the sweep takes over from there.
    """
    grid = _as_grid(scenario, grid)
    if not scenario.chart.contains(x0):
        raise OutOfChartError("origin outside chart", tuple(map(float, x0)))
    if r <= 0:
        raise ValueError("r must be positive")
    dt = _check_dt(scenario, grid, dt)
    if orientation not in ("forward", "backward"):
        raise ValueError("orientation must be 'forward' or 'backward'")
    sign = 1.0 if orientation == "forward" else -1.0
    K = int(math.ceil(r / dt - 1e-9))
    masks = np.zeros((K + 1, grid.n, grid.n), bool)
    free = np.ones((grid.n, grid.n), bool) if domain is None else np.asarray(domain, bool)
    seed_radius = 3.0 * grid.cell
    k_seed = min(K, int(seed_radius / dt))
    phi = None
    for k in range(k_seed + 1):
        phi = _frozen_ball_phi(scenario, grid, x0, k * dt, sign)
        # sub-cell balls still own the cell they sit in
        m = phi <= (0.5 * grid.cell if k * dt < grid.cell else 0.0)
        if k == 0:
            m[grid.index_of(x0)] = True
        masks[k] = m & free
    stepper = _Stepper(scenario, grid, dt, -sign, domain, n_controls)
    phi = _sweep(stepper, phi, k_seed, K, masks, False)
    return ReachStack(grid, dt, masks, tuple(map(float, x0)), orientation, phi, domain)


# --- brute force ---------------------------------------------------------------------

def simulate_random_controls(scenario: Scenario, x0, r: float, grid=128, n_samples: int = 100_000,
                             segments: int = 3, substeps: int = 16, orientation: str = "forward",
                             domain: np.ndarray | None = None, seed: int = 0) -> np.ndarray:
    """Cells hit at time ``r`` by piecewise-constant random controls.

    A control is a heading plus per-segment angular jitter and magnitude in
    the ``g_R`` unit disk; most samples ride the disk boundary so that extreme
    trajectories are represented.
    """
    grid = _as_grid(scenario, grid)
    rng = np.random.default_rng(seed)
    sign = 1.0 if orientation == "forward" else -1.0
    n = n_samples
    P = np.tile(np.asarray(x0, float), (n, 1))
    alive = np.ones(n, bool)
    heading = rng.uniform(0.0, 2.0 * math.pi, n)
    spread = rng.uniform(0.0, math.pi, n) * (rng.random(n) < 0.7)
    h = r / (segments * substeps)
    free = None if domain is None else np.asarray(domain, bool)
    for _ in range(segments):
        ang = heading + spread * rng.standard_normal(n)
        mag = np.where(rng.random(n) < 0.6, 1.0, np.sqrt(rng.random(n)))
        e1, e2 = mag * np.cos(ang), mag * np.sin(ang)
        for _ in range(substeps):
            def vel(Q):
                gxx, gxy, gyy, wx, wy = scenario.wind_array(Q[:, 0], Q[:, 1])
                r11 = np.sqrt(gxx)
                r21 = gxy / r11
                r22 = np.sqrt(gyy - r21 * r21)
                u2 = e2 / r22
                u1 = (e1 - r21 * u2) / r11
                return np.stack([wx + u1, wy + u2], axis=1)

            mid = P + 0.5 * h * sign * vel(P)
            P = P + h * sign * vel(mid)
            alive &= grid.chart.contains_array(P[:, 0], P[:, 1])
            if free is not None:
                i = np.clip(((P[:, 1] - grid.chart.y_min) / grid.dy).astype(int), 0, grid.n - 1)
                j = np.clip(((P[:, 0] - grid.chart.x_min) / grid.dx).astype(int), 0, grid.n - 1)
                alive &= free[i, j]
    mask = np.zeros((grid.n, grid.n), bool)
    Q = P[alive]
    i = np.clip(((Q[:, 1] - grid.chart.y_min) / grid.dy).astype(int), 0, grid.n - 1)
    j = np.clip(((Q[:, 0] - grid.chart.x_min) / grid.dx).astype(int), 0, grid.n - 1)
    mask[i, j] = True
    return mask


# --- lattice arrival times ---------------------------------------------------------

def stencil(order: int) -> list[tuple[int, int]]:
    """Primitive lattice offsets with Chebyshev radius <= order (8, 16, 32, ...)."""
    out = []
    for a in range(-order, order + 1):
        for b in range(-order, order + 1):
            if (a or b) and gcd(abs(a), abs(b)) == 1:
                out.append((a, b))
    return out


def _edge_arrays(scenario: Scenario, grid: GridSpec, order: int, domain, strict: bool):
    """Lattice edges ``src -> dst`` with their ``F`` cost (admissible only)."""
    n = grid.n
    free = np.ones((n, n), bool) if domain is None else np.asarray(domain, bool)
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    X, Y = grid.mesh()
    srcs, dsts, costs = [], [], []
    for di, dj in stencil(order):
        i1, j1 = I + di, J + dj
        ok = (i1 >= 0) & (i1 < n) & (j1 >= 0) & (j1 < n)
        i0s, j0s, i1s, j1s = I[ok], J[ok], i1[ok], j1[ok]
        keep = free[i0s, j0s] & free[i1s, j1s]
        i0s, j0s, i1s, j1s = i0s[keep], j0s[keep], i1s[keep], j1s[keep]
        mx = 0.5 * (X[i0s, j0s] + X[i1s, j1s])
        my = 0.5 * (Y[i0s, j0s] + Y[i1s, j1s])
        dx, dy = dj * grid.dx, di * grid.dy
        gxx, gxy, gyy, ox, oy, lam = scenario.triple_array(mx, my)
        F, _, status, _ = metric_arrays(gxx, gxy, gyy, ox, oy, lam, np.full(mx.shape, dx), np.full(mx.shape, dy))
        good = (status == 0) if strict else (status <= 1)
        good &= np.isfinite(F)
        srcs.append(i0s[good] * n + j0s[good])
        dsts.append(i1s[good] * n + j1s[good])
        costs.append(F[good])
    return np.concatenate(srcs), np.concatenate(dsts), np.concatenate(costs)


@dataclass
class ArrivalField:
    grid: GridSpec
    tau: np.ndarray  # (n, n); np.inf where unreachable
    origin: tuple
    predecessors: np.ndarray = field(repr=False)
    neighbor_order: int = 2
    T_max: float | None = None
    graph_reachable: np.ndarray | None = field(default=None, repr=False)  # reachable at any time

    def value_at(self, p) -> float:
        """Bilinear interpolation between cell centres (nearest cell where a
        neighbour is unreachable)."""
        fi, fj = self.grid.fractional_index(p[0], p[1])
        n = self.grid.n
        i0 = int(np.clip(np.floor(fi), 0, n - 2))
        j0 = int(np.clip(np.floor(fj), 0, n - 2))
        ti = float(np.clip(fi - i0, 0, 1))
        tj = float(np.clip(fj - j0, 0, 1))
        q = self.tau[i0:i0 + 2, j0:j0 + 2]
        if np.all(np.isfinite(q)):
            return float((1 - ti) * ((1 - tj) * q[0, 0] + tj * q[0, 1]) + ti * ((1 - tj) * q[1, 0] + tj * q[1, 1]))
        return float(self.tau[self.grid.index_of(p)])

    def path_to(self, p) -> np.ndarray:
        """Lattice path (cell centres) from the origin to the cell of ``p``."""
        n = self.grid.n
        i, j = self.grid.index_of(p)
        node = i * n + j
        if not np.isfinite(self.tau[i, j]):
            return np.empty((0, 2))
        pts = []
        while node >= 0 and node < n * n:
            pts.append(self.grid.center(node // n, node % n))
            node = int(self.predecessors[node])
        pts.append(self.origin)
        return np.array(pts[::-1])

    @property
    def finite(self) -> np.ndarray:
        return np.isfinite(self.tau)


def arrival_field(scenario: Scenario, x0, grid=256, neighbor_order: int = 2,
                  domain: np.ndarray | None = None, T_max: float | None = None) -> ArrivalField:
    """First-arrival times from ``x0`` by Dijkstra on the lattice graph.

    ``x0`` joins the graph as an extra node linked to the stencil neighbours of
    its cell (and to the cell itself) at their exact ``F`` costs. Cells later
    than ``T_max`` stay at infinity; ``graph_reachable`` tells them apart from
    cells that are never reached.
    """
    grid = _as_grid(scenario, grid)
    if not scenario.chart.contains(x0):
        raise OutOfChartError("origin outside chart", tuple(map(float, x0)))
    n = grid.n
    src, dst, cost = _edge_arrays(scenario, grid, neighbor_order, domain, strict=False)
    i0, j0 = grid.index_of(x0)
    free = np.ones((n, n), bool) if domain is None else np.asarray(domain, bool)
    local = scenario.local_data(x0)
    g, w = local.g0, local.omega
    extra_d, extra_c = [], []
    for di, dj in [(0, 0)] + stencil(neighbor_order):
        i1, j1 = i0 + di, j0 + dj
        if not (0 <= i1 < n and 0 <= j1 < n) or not free[i1, j1]:
            continue
        c = grid.center(i1, j1)
        d = (c[0] - x0[0], c[1] - x0[1])
        F, _, st, _ = metric_arrays(g[0, 0], g[0, 1], g[1, 1], w[0], w[1], local.lam, d[0], d[1])
        if int(st) != 3 and np.isfinite(F):
            extra_d.append(i1 * n + j1)
            extra_c.append(float(F))
    S = n * n
    rows = np.concatenate([src, np.full(len(extra_d), S)])
    cols = np.concatenate([dst, np.array(extra_d, dtype=int)])
    data = np.concatenate([cost, np.array(extra_c)])
    # zero-cost edges vanish in sparse storage; nudge them
    data = np.where(data > 0, data, 1e-300)
    G = csr_matrix((data, (rows, cols)), shape=(S + 1, S + 1))
    limit = np.inf if T_max is None else float(T_max)
    dist, pred = dijkstra(G, directed=True, indices=S, return_predecessors=True, limit=limit)
    tau = dist[:S].reshape(n, n)
    if T_max is None:
        reach = np.isfinite(tau)
    else:
        order = breadth_first_order(G, S, directed=True, return_predecessors=False)
        reach = np.zeros(S + 1, bool)
        reach[order] = True
        reach = reach[:S].reshape(n, n)
    if domain is not None:
        tau = np.where(free, tau, np.inf)
        reach &= free
    return ArrivalField(grid, tau, tuple(map(float, x0)), pred[:S], neighbor_order, T_max, reach)


# --- K-horizon -------------------------------------------------------------------------

@dataclass
class KHorizon:
    grid: GridSpec
    reach: np.ndarray  # cells from which A is reachable
    horizon: np.ndarray  # boundary of ``reach`` inside the chart
    converged: bool
    time_to_A: np.ndarray = field(repr=False)

    @property
    def truncated(self) -> bool:
        return not self.converged


def k_horizon(scenario: Scenario, A: np.ndarray, grid=256, T_max: float | None = None,
              neighbor_order: int = 2, domain: np.ndarray | None = None) -> KHorizon:
    """Boundary of the set of cells from which ``A`` is reachable along
    strictly admissible lattice moves, within ``T_max`` when given."""
    grid = _as_grid(scenario, grid)
    A = np.asarray(A, bool)
    if not A.any():
        raise EmptyRegion("A is empty")
    n = grid.n
    src, dst, cost = _edge_arrays(scenario, grid, neighbor_order, domain, strict=True)
    # reversed graph: distances from A back to every start cell
    cost = np.where(cost > 0, cost, 1e-300)
    G = csr_matrix((cost, (dst, src)), shape=(n * n, n * n))
    sources = np.flatnonzero(A.ravel())
    full = dijkstra(G, directed=True, indices=sources, min_only=True)
    if T_max is None:
        dist = full
    else:
        dist = dijkstra(G, directed=True, indices=sources, min_only=True, limit=T_max)
    reach = np.isfinite(dist).reshape(n, n)
    converged = bool(np.array_equal(reach, np.isfinite(full).reshape(n, n)))
    return KHorizon(grid, reach, boundary_cells(reach), converged, dist.reshape(n, n))


# --- Cauchy development ------------------------------------------------------------

@dataclass
class CauchyDevelopment:
    grid: GridSpec
    dt: float
    D_plus: np.ndarray  # (K+1, n, n)
    D_minus: np.ndarray
    A: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return self.dt * np.arange(len(self.D_plus))

    def horizon(self, future: bool = True) -> list[np.ndarray]:
        """Per-slab boundary cells of ``D+`` (or ``D-``)."""
        D = self.D_plus if future else self.D_minus
        return [boundary_cells(m) for m in D]

    def horizon_samples(self, future: bool = True) -> np.ndarray:
        """``(t, x, y)`` rows on the Cauchy horizon (``t`` negative for ``H-``)."""
        X, Y = self.grid.mesh()
        rows = []
        sgn = 1.0 if future else -1.0
        for t, b in zip(self.times, self.horizon(future)):
            rows.append(np.column_stack([np.full(b.sum(), sgn * t), X[b], Y[b]]))
        return np.vstack(rows) if rows else np.empty((0, 3))


def cauchy_development(scenario: Scenario, A: np.ndarray, grid=128, dt: float | None = None,
                       T_max: float = 1.0, n_controls: int = N_CONTROLS) -> CauchyDevelopment:
    """``D+`` slabs as the complement of the forward sweep from the complement
    of ``A`` (the exterior of the chart counts as outside ``A``); ``D-`` the
    same with backward sweeps.  Outer estimates unless the chart slices are
    Cauchy."""
    grid = _as_grid(scenario, grid)
    A = np.asarray(A, bool)
    if not A.any():
        raise EmptyRegion("A is empty")
    comp = ~A
    out = []
    for orientation in ("forward", "backward"):
        st = propagate_set(scenario, comp, T_max, dt, grid, orientation, outside_in_set=True,
                           n_controls=n_controls)
        out.append((~st.masks, st.dt))
    (Dp, dtp), (Dm, _) = out
    return CauchyDevelopment(grid, dtp, Dp, Dm, A)


def certify_cauchy_point(scenario: Scenario, A: np.ndarray, t: float, y, grid=128, dt: float | None = None,
                         n_controls: int = N_CONTROLS) -> tuple[bool, float]:
    """Direct check of ``(t, y)``: is the backward c-ball of ``y`` of radius
    ``t`` inside ``A``?  Returns the verdict and how far (chart units) the
    ball pokes out of ``A`` (negative: clearance)."""
    grid = _as_grid(scenario, grid)
    A = np.asarray(A, bool)
    if t <= 0:
        inside = bool(A[grid.index_of(y)])
        return inside, 0.0
    st = propagate_front(scenario, y, t, dt, grid, orientation="backward", n_controls=n_controls)
    ball = st.masks[-1]
    sampling = (grid.dy, grid.dx)
    if (ball & ~A).any():
        excursion = ndimage.distance_transform_edt(~A, sampling=sampling)
        return False, float(excursion[ball].max())
    clearance = ndimage.distance_transform_edt(A, sampling=sampling)
    return True, -float(clearance[ball].min())


# --- ball symmetry --------------------------------------------------------------

@dataclass
class SymmetryReport:
    x0: tuple
    x1: tuple
    forward_distance: float  # from x1 to the forward ball of x0
    backward_distance: float  # from x0 to the backward ball of x1
    forward_in: bool | None  # None: inside the grey band
    backward_in: bool | None
    symmetric: bool

    @property
    def counterexample(self) -> bool:
        return not self.symmetric


def ball_symmetry_check(scenario: Scenario, pairs, r: float, grid=128, dt: float | None = None,
                        domain: np.ndarray | None = None, tol_in: float = 4.0,
                        tol_out: float = 8.0) -> list[SymmetryReport]:
    """Compare ``x1 in cl B+(x0, r)`` with ``x0 in cl B-(x1, r)`` for each pair.

    Closure membership is read off the grid as distance to the computed ball:
    within ``tol_in`` cells counts as in, beyond ``tol_out`` cells as out, and
    anything between is undecided.  A pair is reported asymmetric only when
    one side is decidedly in and the other decidedly out.
    """
    grid = _as_grid(scenario, grid)
    reports = []

    def verdict(d):
        if d <= tol_in * grid.cell:
            return True
        if d > tol_out * grid.cell:
            return False
        return None

    for x0, x1 in pairs:
        fwd = propagate_front(scenario, x0, r, dt, grid, "forward", domain)
        bwd = propagate_front(scenario, x1, r, dt, grid, "backward", domain)
        kf, kb = fwd.slab_at(r), bwd.slab_at(r)
        df = fwd.distance_to(x1, kf)
        db = bwd.distance_to(x0, kb)
        vf, vb = verdict(df), verdict(db)
        symmetric = not (vf is not None and vb is not None and vf != vb)
        reports.append(SymmetryReport(tuple(map(float, x0)), tuple(map(float, x1)), df, db, vf, vb, symmetric))
    return reports
