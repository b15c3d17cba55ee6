"""Wind scenarios on a 2-D chart and their pointwise jets.

A scenario stores both descriptions of the wind:

* the Zermelo pair ``(g_R, W)`` -- background Riemannian metric and wind, and
* the spacetime triple ``(g0, omega, lam)`` of ``-lam dt^2 + 2 omega dt + g0``.

Whichever one the document provides, the other is derived once at load time
(``g0 = g_R``, ``omega = -g_R(., W)``, ``lam = 1 - g_R(W, W)`` in one direction,
``W = -omega#`` and ``g_R = g0 / (lam + |omega|^2)`` in the other).

Everything downstream consumes *jets*: the 18-tuple

    (gxx, gxy, gyy, gxx_x, gxx_y, gxy_x, gxy_y, gyy_x, gyy_y,
     wx, wy, wx_x, wx_y, wy_x, wy_y, lam, lam_x, lam_y)

where ``w`` is the one-form ``omega`` and ``_x``/``_y`` are partial derivatives.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable

import numpy as np

from . import expr as E

__all__ = [
    "Chart",
    "GridSpec",
    "LocalData",
    "Scenario",
    "ScenarioError",
    "OutOfChartError",
    "load_scenario",
    "load_scenario_file",
    "sample",
    "change_splitting",
    "JET_SIZE",
]

JET_SIZE = 18
VALIDATION_LATTICE = 64


class ScenarioError(ValueError):
    """Schema or positivity violation; ``point`` carries the offending location."""

    def __init__(self, message: str, point: tuple[float, float] | None = None):
        if point is not None:
            message = f"{message} at ({point[0]:.6g}, {point[1]:.6g})"
        super().__init__(message)
        self.point = point


class OutOfChartError(ScenarioError):
    pass


@dataclass(frozen=True)
class Chart:
    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if not (self.x_max > self.x_min and self.y_max > self.y_min):
            raise ScenarioError("chart bounds must satisfy lo < hi")

    @property
    def diagonal(self) -> float:
        return math.hypot(self.x_max - self.x_min, self.y_max - self.y_min)

    def contains(self, p, margin: float = 0.0) -> bool:
        x, y = p
        return (self.x_min + margin <= x <= self.x_max - margin
                and self.y_min + margin <= y <= self.y_max - margin)

    def contains_array(self, x, y, margin: float = 0.0):
        return ((x >= self.x_min + margin) & (x <= self.x_max - margin)
                & (y >= self.y_min + margin) & (y <= self.y_max - margin))


@dataclass(frozen=True)
class GridSpec:
    """Cell-centred lattice of ``n x n`` cells over a chart (row index = y)."""

    chart: Chart
    n: int

    @property
    def dx(self) -> float:
        return (self.chart.x_max - self.chart.x_min) / self.n

    @property
    def dy(self) -> float:
        return (self.chart.y_max - self.chart.y_min) / self.n

    @property
    def cell(self) -> float:
        return max(self.dx, self.dy)

    @property
    def xs(self) -> np.ndarray:
        return self.chart.x_min + (np.arange(self.n) + 0.5) * self.dx

    @property
    def ys(self) -> np.ndarray:
        return self.chart.y_min + (np.arange(self.n) + 0.5) * self.dy

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ys)

    def index_of(self, p) -> tuple[int, int]:
        """(row, col) of the cell containing ``p``."""
        j = int(np.clip(np.floor((p[0] - self.chart.x_min) / self.dx), 0, self.n - 1))
        i = int(np.clip(np.floor((p[1] - self.chart.y_min) / self.dy), 0, self.n - 1))
        return i, j

    def center(self, i: int, j: int) -> tuple[float, float]:
        return float(self.xs[j]), float(self.ys[i])

    def fractional_index(self, x, y):
        """Continuous (row, col) coordinates such that cell centres are integers."""
        return (np.asarray(y) - self.chart.y_min) / self.dy - 0.5, (np.asarray(x) - self.chart.x_min) / self.dx - 0.5


@dataclass(frozen=True)
class LocalData:
    """Pointwise jet of a scenario.

    ``domega`` is the coefficient ``c`` of ``d omega = c dx^dy``;
    ``christoffel[k, i, j]`` is ``Gamma^k_ij`` of ``g0``.
    """

    point: np.ndarray
    g0: np.ndarray
    omega: np.ndarray
    lam: float
    domega: float
    grad_lam: np.ndarray
    christoffel: np.ndarray
    omega_sharp: np.ndarray
    dlam: np.ndarray = field(repr=False)
    domega_jac: np.ndarray = field(repr=False)  # [i, j] = d_j omega_i
    dg: np.ndarray = field(repr=False)  # [k, i, j] = d_k g_ij

    @classmethod
    def from_jet(cls, p, J) -> "LocalData":
        J = [float(v) for v in J]
        g = np.array([[J[0], J[1]], [J[1], J[2]]])
        dg = np.array([
            [[J[3], J[5]], [J[5], J[7]]],
            [[J[4], J[6]], [J[6], J[8]]],
        ])
        w = np.array([J[9], J[10]])
        djw = np.array([[J[11], J[12]], [J[13], J[14]]])
        lam = J[15]
        dlam = np.array([J[16], J[17]])
        ginv = np.linalg.inv(g)
        # Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
        first = 0.5 * (np.einsum("ilj->lij", dg) + np.einsum("jli->lij", dg) - dg)
        gamma = np.einsum("kl,lij->kij", ginv, first)
        return cls(
            point=np.array([float(p[0]), float(p[1])]),
            g0=g,
            omega=w,
            lam=lam,
            domega=float(djw[1, 0] - djw[0, 1]),
            grad_lam=ginv @ dlam,
            christoffel=gamma,
            omega_sharp=ginv @ w,
            dlam=dlam,
            domega_jac=djw,
            dg=dg,
        )

    @property
    def omega_norm2(self) -> float:
        return float(self.omega @ self.omega_sharp)

    @property
    def wind(self) -> np.ndarray:
        return -self.omega_sharp

    @property
    def g_R(self) -> np.ndarray:
        return self.g0 / (self.lam + self.omega_norm2)

    @classmethod
    def constant(cls, g0, omega, lam, p=(0.0, 0.0)) -> "LocalData":
        g0 = np.asarray(g0, float)
        J = (g0[0, 0], g0[0, 1], g0[1, 1], 0, 0, 0, 0, 0, 0,
             omega[0], omega[1], 0, 0, 0, 0, lam, 0, 0)
        return cls.from_jet(p, J)

    @classmethod
    def from_wind(cls, W, g_R=((1.0, 0.0), (0.0, 1.0)), p=(0.0, 0.0)) -> "LocalData":
        g = np.asarray(g_R, float)
        W = np.asarray(W, float)
        return cls.constant(g, -(g @ W), 1.0 - W @ g @ W, p)


# --- field back-ends ----------------------------------------------------------

class _AnalyticFields:
    def __init__(self, triple: dict[str, E.Node]):
        self.triple = triple
        nodes = []
        for name in ("gxx", "gxy", "gyy"):
            nodes.append(triple[name])
        for name in ("gxx", "gxy", "gyy"):
            n = triple[name]
            nodes += [E.differentiate(n, "x"), E.differentiate(n, "y")]
        jet_nodes = list(nodes)
        wx, wy, lam = triple["omega_x"], triple["omega_y"], triple["lambda"]
        jet_nodes += [wx, wy,
                      E.differentiate(wx, "x"), E.differentiate(wx, "y"),
                      E.differentiate(wy, "x"), E.differentiate(wy, "y"),
                      lam, E.differentiate(lam, "x"), E.differentiate(lam, "y")]
        self.jet_nodes = jet_nodes
        self._jet_math = E.compile_many(jet_nodes, "math")
        self._jet_raw = self._jet_math.raw
        self._jet_np = E.compile_many(jet_nodes, "numpy")
        order = [triple[k] for k in ("gxx", "gxy", "gyy", "omega_x", "omega_y", "lambda")]
        self._vals_math = E.compile_many(order, "math")
        self._vals_np = E.compile_many(order, "numpy")

    def jet(self, x, y):
        return self._jet_math(x, y)

    def jet_array(self, x, y):
        x = np.asarray(x, float)
        with np.errstate(all="ignore"):
            return tuple(np.broadcast_to(np.asarray(v, float), x.shape) for v in self._jet_np(x, y))

    def values(self, x, y):
        return self._vals_math(x, y)

    def values_array(self, x, y):
        x = np.asarray(x, float)
        with np.errstate(all="ignore"):
            return tuple(np.broadcast_to(np.asarray(v, float), x.shape) for v in self._vals_np(x, y))


class _GridFields:
    """Bilinear interpolation of node-sampled fields; derivative grids by
    ``np.gradient`` (central inside, one-sided in the boundary cells)."""

    def __init__(self, chart: Chart, arrays: dict[str, np.ndarray]):
        self.chart = chart
        n = arrays["gxx"].shape[0]
        self.n = n
        self.xs = np.linspace(chart.x_min, chart.x_max, n)
        self.ys = np.linspace(chart.y_min, chart.y_max, n)
        stack = []
        for name in ("gxx", "gxy", "gyy"):
            stack.append(arrays[name])
        for name in ("gxx", "gxy", "gyy"):
            dy_, dx_ = np.gradient(arrays[name], self.ys, self.xs)
            stack += [dx_, dy_]
        stack += [arrays["omega_x"], arrays["omega_y"]]
        for name in ("omega_x", "omega_y"):
            dy_, dx_ = np.gradient(arrays[name], self.ys, self.xs)
            stack += [dx_, dy_]
        dy_, dx_ = np.gradient(arrays["lambda"], self.ys, self.xs)
        stack += [arrays["lambda"], dx_, dy_]
        self.jet_grids = np.stack(stack)  # (18, n, n)
        self.val_grids = np.stack([arrays[k] for k in ("gxx", "gxy", "gyy", "omega_x", "omega_y", "lambda")])

    def _interp(self, grids, x, y):
        c = self.chart
        fx = (np.asarray(x, float) - c.x_min) / (c.x_max - c.x_min) * (self.n - 1)
        fy = (np.asarray(y, float) - c.y_min) / (c.y_max - c.y_min) * (self.n - 1)
        j0 = np.clip(np.floor(fx).astype(int), 0, self.n - 2)
        i0 = np.clip(np.floor(fy).astype(int), 0, self.n - 2)
        tx = fx - j0
        ty = fy - i0
        g00 = grids[:, i0, j0]
        g01 = grids[:, i0, j0 + 1]
        g10 = grids[:, i0 + 1, j0]
        g11 = grids[:, i0 + 1, j0 + 1]
        return (1 - ty) * ((1 - tx) * g00 + tx * g01) + ty * ((1 - tx) * g10 + tx * g11)

    def jet(self, x, y):
        return tuple(float(v) for v in self._interp(self.jet_grids, x, y))

    def jet_array(self, x, y):
        return tuple(self._interp(self.jet_grids, x, y))

    def values(self, x, y):
        return tuple(float(v) for v in self._interp(self.val_grids, x, y))

    def values_array(self, x, y):
        return tuple(self._interp(self.val_grids, x, y))


# --- scenario ------------------------------------------------------------------

def _as_node(v, where: str) -> E.Node:
    if isinstance(v, bool):
        raise ScenarioError(f"{where}: expected expression or number")
    if isinstance(v, (int, float)):
        return E.const(v)
    if isinstance(v, str):
        try:
            return E.parse_expression(v)
        except E.ExpressionError as exc:
            raise ScenarioError(f"{where}: {exc}") from exc
    raise ScenarioError(f"{where}: expected expression string or number")


def _triple_from_wind_nodes(g, W):
    gxx, gxy, gyy = g
    wx, wy = W
    ox = E.neg(E.add(E.mul(gxx, wx), E.mul(gxy, wy)))
    oy = E.neg(E.add(E.mul(gxy, wx), E.mul(gyy, wy)))
    gww = E.add(E.add(E.mul(gxx, E.mul(wx, wx)), E.mul(E.const(2.0), E.mul(gxy, E.mul(wx, wy)))),
                E.mul(gyy, E.mul(wy, wy)))
    return ox, oy, E.sub(E.const(1.0), gww)


def _wind_from_triple_nodes(g, ox, oy, lam):
    gxx, gxy, gyy = g
    det = E.sub(E.mul(gxx, gyy), E.mul(gxy, gxy))
    sx = E.div(E.sub(E.mul(gyy, ox), E.mul(gxy, oy)), det)
    sy = E.div(E.sub(E.mul(gxx, oy), E.mul(gxy, ox)), det)
    norm2 = E.add(E.mul(ox, sx), E.mul(oy, sy))
    conf = E.add(lam, norm2)
    gR = tuple(E.div(c, conf) for c in g)
    return gR, (E.neg(sx), E.neg(sy))


class Scenario:
    """Immutable wind scenario; build with :func:`load_scenario` or the
    ``analytic`` / ``grid`` constructors."""

    def __init__(self, chart: Chart, mode: str, fields, *, representation: str,
                 document: dict | None = None, grid_resolution: int | None = None,
                 wind_nodes=None, triple_nodes=None):
        self.chart = chart
        self.mode = mode
        self.representation = representation
        self.document = document
        self.grid_resolution = grid_resolution
        self._fields = fields
        self.wind_nodes = wind_nodes
        self.triple_nodes = triple_nodes

    # construction ----------------------------------------------------------
    @classmethod
    def analytic(cls, chart, g0=("1", "0", "1"), wind=None, triple=None, validate: bool = True) -> "Scenario":
        """``g0`` is ``(xx, xy, yy)``; pass ``wind=(Wx, Wy)`` or ``triple=(omega_x, omega_y, lam)``."""
        doc = {
            "chart": {"x": [chart[0], chart[1]], "y": [chart[2], chart[3]]} if not isinstance(chart, Chart)
            else {"x": [chart.x_min, chart.x_max], "y": [chart.y_min, chart.y_max]},
            "mode": "analytic",
            "g0": dict(zip(("xx", "xy", "yy"), g0)),
        }
        if (wind is None) == (triple is None):
            raise ScenarioError("exactly one of wind / triple must be given")
        if wind is not None:
            doc["wind"] = dict(zip(("x", "y"), wind))
        else:
            doc["triple"] = dict(zip(("omega_x", "omega_y", "lambda"), triple))
        return load_scenario(doc, validate=validate)

    # evaluation --------------------------------------------------------------
    def jet(self, x: float, y: float) -> tuple:
        """Exact jet (symbolic derivatives, or interpolated grid differences)."""
        return self._fields.jet(x, y)

    def jet_array(self, x, y) -> tuple:
        return self._fields.jet_array(x, y)

    @property
    def jet_function(self) -> Callable:
        """Fast scalar jet without error wrapping (for integrators)."""
        f = self._fields
        return f._jet_raw if isinstance(f, _AnalyticFields) else f.jet

    def triple_at(self, x: float, y: float) -> tuple:
        return self._fields.values(x, y)

    def triple_array(self, x, y) -> tuple:
        """Vectorised ``(gxx, gxy, gyy, omega_x, omega_y, lam)``."""
        return self._fields.values_array(x, y)

    def wind_array(self, x, y) -> tuple:
        """Vectorised ``(gRxx, gRxy, gRyy, Wx, Wy)``."""
        gxx, gxy, gyy, ox, oy, lam = self.triple_array(x, y)
        det = gxx * gyy - gxy * gxy
        sx = (gyy * ox - gxy * oy) / det
        sy = (gxx * oy - gxy * ox) / det
        conf = lam + ox * sx + oy * sy
        return gxx / conf, gxy / conf, gyy / conf, -sx, -sy

    def local_data(self, p) -> LocalData:
        self._check_inside(p)
        return LocalData.from_jet(p, self.jet(float(p[0]), float(p[1])))

    def _check_inside(self, p):
        if not self.chart.contains(p):
            raise OutOfChartError("point outside chart", (float(p[0]), float(p[1])))

    @property
    def default_fd_step(self) -> float:
        return 1e-4 * self.chart.diagonal

    # validation ----------------------------------------------------------------
    def validate(self, lattice: int = VALIDATION_LATTICE) -> None:
        c = self.chart
        X, Y = np.meshgrid(np.linspace(c.x_min, c.x_max, lattice), np.linspace(c.y_min, c.y_max, lattice))
        vals = self.triple_array(X, Y)
        finite = np.ones(X.shape, bool)
        for v in vals:
            finite &= np.isfinite(v)
        if not finite.all():
            i, j = np.argwhere(~finite)[0]
            raise ScenarioError("field not finite", (X[i, j], Y[i, j]))
        gxx, gxy, gyy, ox, oy, lam = vals
        det = gxx * gyy - gxy * gxy
        bad = ~((det > 0) & (gxx + gyy > 0))
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ScenarioError("g0 not positive definite", (X[i, j], Y[i, j]))
        norm2 = (gyy * ox * ox - 2 * gxy * ox * oy + gxx * oy * oy) / det
        bad = ~(lam + norm2 > 0)
        if bad.any():
            i, j = np.argwhere(bad)[0]
            raise ScenarioError("lambda + |omega|^2 not positive", (X[i, j], Y[i, j]))

    def __repr__(self):
        c = self.chart
        return (f"Scenario({self.mode}, {self.representation}, chart=[{c.x_min}, {c.x_max}]x"
                f"[{c.y_min}, {c.y_max}])")


# --- loading ---------------------------------------------------------------------

def _require(doc: dict, key: str, where: str = "document"):
    if not isinstance(doc, dict) or key not in doc:
        raise ScenarioError(f"{where}: missing key {key!r}")
    return doc[key]


def _parse_chart(doc) -> Chart:
    ch = _require(doc, "chart")
    try:
        (x0, x1), (y0, y1) = _require(ch, "x", "chart"), _require(ch, "y", "chart")
        return Chart(float(x0), float(x1), float(y0), float(y1))
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(f"chart: malformed bounds ({exc})") from exc


def _grid_field(v, n: int, chart: Chart, where: str) -> np.ndarray:
    if isinstance(v, (int, float)) and not isinstance(v, bool):
        return np.full((n, n), float(v))
    if isinstance(v, str):
        node = _as_node(v, where)
        X, Y = np.meshgrid(np.linspace(chart.x_min, chart.x_max, n), np.linspace(chart.y_min, chart.y_max, n))
        with np.errstate(all="ignore"):
            return np.broadcast_to(np.asarray(E.compile_expr(node, "numpy")(X, Y), float), (n, n)).copy()
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ScenarioError(f"{where}: grid must be numeric") from exc
    if a.size != n * n:
        raise ScenarioError(f"{where}: grid has {a.size} values, expected {n * n}")
    return a.reshape(n, n)


def _analytic_scenario(chart, g, ox, oy, lam, representation, document, wind_nodes) -> Scenario:
    triple = dict(zip(("gxx", "gxy", "gyy"), g), omega_x=ox, omega_y=oy, **{"lambda": lam})
    return Scenario(chart, "analytic", _AnalyticFields(triple), representation=representation,
                    document=document, wind_nodes=wind_nodes, triple_nodes=triple)


def load_scenario(document: Any, validate: bool = True) -> Scenario:
    """Build a :class:`Scenario` from a JSON string or an already-parsed dict."""
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise ScenarioError("scenario document must be a JSON object")
    chart = _parse_chart(document)
    mode = document.get("mode", "analytic")
    if mode not in ("analytic", "grid"):
        raise ScenarioError(f"mode must be 'analytic' or 'grid', got {mode!r}")
    g0 = _require(document, "g0")
    has_wind, has_triple = "wind" in document, "triple" in document
    if has_wind == has_triple:
        raise ScenarioError("exactly one of 'wind' or 'triple' must be present")
    representation = "wind" if has_wind else "triple"
    gkeys = ("xx", "xy", "yy")

    if mode == "analytic":
        g = tuple(_as_node(_require(g0, k, "g0"), f"g0.{k}") for k in gkeys)
        if has_wind:
            w = document["wind"]
            W = tuple(_as_node(_require(w, k, "wind"), f"wind.{k}") for k in ("x", "y"))
            ox, oy, lam = _triple_from_wind_nodes(g, W)
            wind_nodes = (g, W)
        else:
            t = document["triple"]
            ox, oy, lam = (_as_node(_require(t, k, "triple"), f"triple.{k}") for k in ("omega_x", "omega_y", "lambda"))
            wind_nodes = _wind_from_triple_nodes(g, ox, oy, lam)
        scen = _analytic_scenario(chart, g, ox, oy, lam, representation, document, wind_nodes)
    else:
        n = _require(document, "grid_resolution")
        if not isinstance(n, int) or isinstance(n, bool) or n < 2:
            raise ScenarioError("grid_resolution must be an integer >= 2")
        g = [_grid_field(_require(g0, k, "g0"), n, chart, f"g0.{k}") for k in gkeys]
        if has_wind:
            w = document["wind"]
            Wx, Wy = (_grid_field(_require(w, k, "wind"), n, chart, f"wind.{k}") for k in ("x", "y"))
            ox = -(g[0] * Wx + g[1] * Wy)
            oy = -(g[1] * Wx + g[2] * Wy)
            lam = 1.0 - (g[0] * Wx * Wx + 2 * g[1] * Wx * Wy + g[2] * Wy * Wy)
        else:
            t = document["triple"]
            ox, oy, lam = (_grid_field(_require(t, k, "triple"), n, chart, f"triple.{k}")
                           for k in ("omega_x", "omega_y", "lambda"))
        arrays = {"gxx": g[0], "gxy": g[1], "gyy": g[2], "omega_x": ox, "omega_y": oy, "lambda": lam}
        scen = Scenario(chart, mode, _GridFields(chart, arrays), representation=representation,
                        document=document, grid_resolution=n)
    if validate:
        scen.validate()
    return scen


def load_scenario_file(path) -> Scenario:
    return load_scenario(Path(path).read_text())


# --- finite-difference sampling ---------------------------------------------

def sample(scenario: Scenario, p, fd_step: float | None = None) -> LocalData:
    """LocalData at ``p`` with derivatives from central differences of step
    ``fd_step`` (analytic scenarios) or interpolated grid differences (grid
    scenarios).  Near the chart edge the stencil falls back to one-sided
    differences so that every sample stays inside the chart."""
    p = (float(p[0]), float(p[1]))
    scenario._check_inside(p)
    if scenario.mode == "grid":
        return LocalData.from_jet(p, scenario.jet(*p))
    h = scenario.default_fd_step if fd_step is None else float(fd_step)
    if h <= 0:
        raise ValueError("fd_step must be positive")
    c = scenario.chart
    f = scenario.triple_at
    v0 = np.array(f(*p))

    def partial(axis):
        lo, hi = (c.x_min, c.x_max) if axis == 0 else (c.y_min, c.y_max)
        q = p[axis]
        e = (h, 0.0) if axis == 0 else (0.0, h)
        plus = (p[0] + e[0], p[1] + e[1])
        minus = (p[0] - e[0], p[1] - e[1])
        if q + h <= hi and q - h >= lo:
            return (np.array(f(*plus)) - np.array(f(*minus))) / (2 * h)
        if q + h <= hi:
            return (np.array(f(*plus)) - v0) / h
        return (v0 - np.array(f(*minus))) / h

    dx, dy = partial(0), partial(1)
    # triple order: gxx gxy gyy ox oy lam
    J = (v0[0], v0[1], v0[2], dx[0], dy[0], dx[1], dy[1], dx[2], dy[2],
         v0[3], v0[4], dx[3], dy[3], dx[4], dy[4], v0[5], dx[5], dy[5])
    return LocalData.from_jet(p, J)


def change_splitting(scenario: Scenario, f: str, validate: bool = True) -> Scenario:
    """Scenario of the same spacetime in the time coordinate ``t - f(x, y)``.

    ``omega -> omega - lam df``, ``g0 -> g0 + omega*df + df*omega - lam df*df``,
    ``lam`` unchanged; travel costs shift by ``-df``.  Analytic scenarios only.
    """
    if scenario.mode != "analytic":
        raise ScenarioError("change_splitting needs an analytic scenario")
    fn = _as_node(f, "f")
    fx, fy = E.differentiate(fn, "x"), E.differentiate(fn, "y")
    t = scenario.triple_nodes
    gxx, gxy, gyy, ox, oy, lam = (t[k] for k in ("gxx", "gxy", "gyy", "omega_x", "omega_y", "lambda"))
    two = E.const(2.0)
    ngxx = E.sub(E.add(gxx, E.mul(two, E.mul(ox, fx))), E.mul(lam, E.mul(fx, fx)))
    ngxy = E.sub(E.add(gxy, E.add(E.mul(ox, fy), E.mul(oy, fx))), E.mul(lam, E.mul(fx, fy)))
    ngyy = E.sub(E.add(gyy, E.mul(two, E.mul(oy, fy))), E.mul(lam, E.mul(fy, fy)))
    nox = E.sub(ox, E.mul(lam, fx))
    noy = E.sub(oy, E.mul(lam, fy))
    g = (ngxx, ngxy, ngyy)
    scen = _analytic_scenario(scenario.chart, g, nox, noy, lam, "triple", None,
                              _wind_from_triple_nodes(g, nox, noy, lam))
    if validate:
        scen.validate()
    return scen
