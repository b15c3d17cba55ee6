"""Pointwise wind-Riemannian algebra.

At a point with data ``(g0, omega, lam)`` a velocity ``v`` has the two
candidate travel costs

    F(v)   = g0(v,v) / (-omega(v) + sqrt(h(v,v)))
    F_l(v) = g0(v,v) / (-omega(v) - sqrt(h(v,v)))      (strong wind only)

with ``h(v,v) = lam g0(v,v) + omega(v)^2``.  These are the roots ``Z`` of
``g0(v,v) + 2 omega(v) Z - lam Z^2 = 0``, written in the rationalised form so a
single code path covers mild, critical and strong wind.
"""
from __future__ import annotations

import enum
import math
from typing import NamedTuple

import numpy as np

from .scenario import LocalData, Scenario

__all__ = [
    "INF",
    "Infinite",
    "is_infinite",
    "WindClass",
    "ConeStatus",
    "MetricDomainError",
    "DecompositionUndefined",
    "Triple",
    "LAMBDA_TOL",
    "H_TOL",
    "lambda_tolerance",
    "classify",
    "cone_membership",
    "eval_F",
    "eval_Fl",
    "eval_h",
    "conformal_factor",
    "canonical_representative",
    "randers_decomposition",
    "reconstruct_from_randers",
    "reverse_eval",
    "fundamental_tensor",
    "fundamental_tensor_fd",
    "wind_length",
    "InadmissibleVelocity",
    "indicatrix_centroid_2d",
    "metric_arrays",
]

LAMBDA_TOL = 1e-10
H_TOL = 1e-9


class Infinite:
    """The ``+inf`` metric value.  Orders above every real; refuses arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INF"

    __str__ = __repr__

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("windnav.INF")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True

    def __float__(self):
        # explicit conversion only, e.g. for export
        return math.inf


INF = Infinite()


def is_infinite(x) -> bool:
    return x is INF


class WindClass(enum.Enum):
    MILD = "Mild"
    CRITICAL = "Critical"
    STRONG = "Strong"


class ConeStatus(enum.Enum):
    IN_A = "InA"
    BOUNDARY_AE = "BoundaryAE"
    KROPINA_ZERO = "KropinaZero"
    OUTSIDE = "Outside"


class MetricDomainError(ValueError):
    pass


class DecompositionUndefined(ValueError):
    pass


class Triple(NamedTuple):
    g0: np.ndarray
    omega: np.ndarray
    lam: float


# status codes used by the array kernel
_IN, _BD, _KZ, _OUT = 0, 1, 2, 3
_STATUS = {_IN: ConeStatus.IN_A, _BD: ConeStatus.BOUNDARY_AE, _KZ: ConeStatus.KROPINA_ZERO, _OUT: ConeStatus.OUTSIDE}


def lambda_tolerance(omega_norm2):
    return LAMBDA_TOL * (1.0 + omega_norm2)


def _norm2(gxx, gxy, gyy, ox, oy):
    det = gxx * gyy - gxy * gxy
    return (gyy * ox * ox - 2.0 * gxy * ox * oy + gxx * oy * oy) / det


def metric_arrays(gxx, gxy, gyy, ox, oy, lam, vx, vy):
    """Vectorised kernel.  Returns ``(F, Fl, status, wclass)``.

    ``status`` holds codes 0 InA, 1 BoundaryAE, 2 KropinaZero, 3 Outside;
    ``wclass`` is +1 mild, 0 critical, -1 strong.  ``F``/``Fl`` are NaN outside
    the cone and ``Fl`` is ``np.inf`` where it is infinite (array level only).
    """
    arrs = np.broadcast_arrays(*(np.asarray(a, float) for a in (gxx, gxy, gyy, ox, oy, lam, vx, vy)))
    gxx, gxy, gyy, ox, oy, lam, vx, vy = arrs
    n2 = _norm2(gxx, gxy, gyy, ox, oy)
    tol = lambda_tolerance(n2)
    wclass = np.where(lam > tol, 1, np.where(lam < -tol, -1, 0))
    lam_eff = np.where(wclass == 0, 0.0, lam)
    q = gxx * vx * vx + 2.0 * gxy * vx * vy + gyy * vy * vy
    wv = ox * vx + oy * vy
    h = lam_eff * q + wv * wv
    zero = q == 0.0
    band = np.abs(h) <= H_TOL * q
    status = np.full(q.shape, _OUT, dtype=np.int8)
    mild = wclass == 1
    crit = wclass == 0
    strong = wclass == -1
    status[mild] = _IN
    status[crit & zero] = _KZ
    status[crit & ~zero & (-wv > 0)] = _IN
    sfwd = strong & ~zero & (-wv > 0)
    status[sfwd & ~band & (h > 0)] = _IN
    status[sfwd & band] = _BD
    rad = np.where(status == _BD, 0.0, np.maximum(h, 0.0))
    root = np.sqrt(rad)
    admissible = status != _OUT
    with np.errstate(all="ignore"):
        F = np.where(zero, 0.0, q / (-wv + root))
        Fl = np.where(zero, 0.0, q / (-wv - root))
    F = np.where(admissible, F, np.nan)
    Fl = np.where(strong & admissible, Fl, np.where(admissible, np.inf, np.nan))
    kz = status == _KZ
    F = np.where(kz, 1.0, F)
    Fl = np.where(kz, 1.0, Fl)
    return F, Fl, status, wclass


def _scalar_kernel(local: LocalData, v):
    g, w = local.g0, local.omega
    F, Fl, st, wc = metric_arrays(g[0, 0], g[0, 1], g[1, 1], w[0], w[1], local.lam, v[0], v[1])
    return float(F), float(Fl), int(st), int(wc)


def classify(local: LocalData) -> WindClass:
    tol = lambda_tolerance(local.omega_norm2)
    if local.lam > tol:
        return WindClass.MILD
    if local.lam < -tol:
        return WindClass.STRONG
    return WindClass.CRITICAL


def cone_membership(local: LocalData, v) -> ConeStatus:
    """Zero vectors at mild points count as InA with ``F(0) = 0``."""
    return _STATUS[_scalar_kernel(local, v)[2]]


def eval_F(local: LocalData, v):
    F, _, st, _ = _scalar_kernel(local, v)
    if st == _OUT:
        raise MetricDomainError(f"vector {tuple(map(float, v))} outside the admissible cone")
    return F


def eval_Fl(local: LocalData, v):
    _, Fl, st, _ = _scalar_kernel(local, v)
    if st == _OUT:
        raise MetricDomainError(f"vector {tuple(map(float, v))} outside the admissible cone")
    return INF if math.isinf(Fl) else Fl


def eval_h(local: LocalData, v, w) -> float:
    v = np.asarray(v, float)
    w = np.asarray(w, float)
    lam = 0.0 if classify(local) is WindClass.CRITICAL else local.lam
    return float(lam * (v @ local.g0 @ w) + (local.omega @ v) * (local.omega @ w))


def reverse_eval(local: LocalData, v):
    """``(F(-v), F_l(-v))``: the metrics of the reversed wind structure."""
    mv = -np.asarray(v, float)
    return eval_F(local, mv), eval_Fl(local, mv)


# --- conformal class --------------------------------------------------------------

def conformal_factor(g0, omega, lam) -> float:
    g0 = np.asarray(g0, float)
    omega = np.asarray(omega, float)
    s = float(lam) + float(omega @ np.linalg.solve(g0, omega))
    if not s > 0:
        raise MetricDomainError("lambda + |omega|^2 must be positive")
    return 1.0 / s


def canonical_representative(g0, omega, lam) -> Triple:
    """The member of the conformal class with ``lam + |omega|^2 = 1``."""
    om = conformal_factor(g0, omega, lam)
    return Triple(om * np.asarray(g0, float), om * np.asarray(omega, float), om * float(lam))


# --- Randers description ----------------------------------------------------------

def randers_decomposition(local: LocalData):
    """``(h_tilde, beta)`` with ``F = +-sqrt(h_tilde) + beta``."""
    if classify(local) is WindClass.CRITICAL:
        raise DecompositionUndefined("no Randers form at a critical point")
    beta = local.omega / local.lam
    return local.g0 / local.lam + np.outer(beta, beta), beta


def reconstruct_from_randers(h_tilde, beta, wclass: WindClass) -> Triple:
    ht = np.asarray(h_tilde, float)
    beta = np.asarray(beta, float)
    if wclass is WindClass.MILD:
        if np.any(np.linalg.eigvalsh(ht) <= 0):
            raise MetricDomainError("h_tilde must be positive definite for mild data")
    elif wclass is WindClass.STRONG:
        if np.linalg.det(ht) >= 0:
            raise MetricDomainError("h_tilde must have signature (+,-) for strong data")
        if np.any(np.linalg.eigvalsh(np.outer(beta, beta) - ht) <= 0):
            raise MetricDomainError("beta x beta - h_tilde must be positive definite")
    else:
        raise DecompositionUndefined("no Randers form at a critical point")
    B = np.linalg.solve(ht, beta)
    lam = 1.0 - float(beta @ B)
    if wclass is WindClass.MILD and not lam > 0:
        raise MetricDomainError("|beta| must be below 1 for mild data")
    return Triple(lam * (ht - np.outer(beta, beta)), lam * beta, lam)


# --- fundamental tensor ----------------------------------------------------------

def fundamental_tensor(local: LocalData, v, eps: int = 1) -> np.ndarray:
    """Hessian of ``F^2/2`` (``eps=+1``) or ``F_l^2/2`` (``eps=-1``) at ``v``.

    Written as ``Z Hess Z + dZ dZ`` with the Randers form of ``Z`` where one
    exists and the Kropina form ``g0(v,v)/(-2 omega(v))`` at critical points.
    """
    v = np.asarray(v, float)
    if eps not in (1, -1):
        raise ValueError("eps must be +1 or -1")
    if cone_membership(local, v) is not ConeStatus.IN_A or not np.any(v):
        raise MetricDomainError("fundamental tensor needs v in the open cone A")
    wc = classify(local)
    if eps == -1 and wc is not WindClass.STRONG:
        raise MetricDomainError("F_l is finite only at strong points")
    if wc is WindClass.CRITICAL:
        g, b = local.g0, -2.0 * local.omega
        q = float(v @ g @ v)
        bv = float(b @ v)
        gv = g @ v
        Z = q / bv
        dZ = 2.0 * gv / bv - q * b / bv ** 2
        hess = (2.0 * g / bv - 2.0 * (np.outer(gv, b) + np.outer(b, gv)) / bv ** 2
                + 2.0 * q * np.outer(b, b) / bv ** 3)
        return Z * hess + np.outer(dZ, dZ)
    ht, beta = randers_decomposition(local)
    # Z = sgn sqrt(ht(v,v)) + beta(v)
    sgn = 1.0 if wc is WindClass.MILD else -float(eps)
    q = float(v @ ht @ v)
    r = math.sqrt(q)
    ell = ht @ v / r
    Z = sgn * r + float(beta @ v)
    dZ = sgn * ell + beta
    hess = sgn * (ht - np.outer(ell, ell)) / r
    G = Z * hess + np.outer(dZ, dZ)
    return 0.5 * (G + G.T)


def fundamental_tensor_fd(local: LocalData, v, eps: int = 1, step: float | None = None) -> np.ndarray:
    """Second differences of ``Z^2/2``, Richardson-extrapolated over steps
    ``h`` and ``h/2``; a reference for :func:`fundamental_tensor`.

    The default step is a small fraction of the distance from ``v`` to the
    cone boundary (estimated from the radicand and its gradient), and it
    shrinks further until every stencil point lies in the cone.
    """
    v = np.asarray(v, float)
    if step is None:
        scale = 5e-2 * float(np.linalg.norm(v))
        if classify(local) is not WindClass.MILD:
            g, w = local.g0, local.omega
            wv = float(w @ v)
            rad = local.lam * float(v @ g @ v) + wv * wv
            grad = 2.0 * local.lam * (g @ v) + 2.0 * wv * w
            gn = float(np.linalg.norm(grad))
            if gn > 0:
                scale = min(scale, abs(rad) / gn)
        h = 2e-2 * scale
    else:
        h = step
    Z = (lambda u: eval_F(local, u)) if eps == 1 else (lambda u: float(eval_Fl(local, u)))

    def second(hh):
        G = np.empty((2, 2))
        for i in range(2):
            for j in range(2):
                ei, ej = hh * np.eye(2)[i], hh * np.eye(2)[j]
                G[i, j] = (Z(v + ei + ej) ** 2 - Z(v + ei - ej) ** 2 - Z(v - ei + ej) ** 2
                           + Z(v - ei - ej) ** 2) / (8.0 * hh * hh)
        return G

    for _ in range(8):
        try:
            return (4.0 * second(0.5 * h) - second(h)) / 3.0
        except MetricDomainError:
            h *= 0.1
    raise MetricDomainError("no finite-difference stencil fits inside the cone")


# --- lengths and centroid --------------------------------------------------------

class InadmissibleVelocity(MetricDomainError):
    def __init__(self, s):
        super().__init__(f"velocity outside the admissible cone at parameter s={s:.9g}")
        self.s = s


def wind_length(scenario: Scenario, s, points, velocities):
    """Trapezoidal ``(l_F, l_Fl)`` of a sampled curve; ``l_Fl`` may be ``INF``."""
    s = np.asarray(s, float)
    P = np.asarray(points, float)
    V = np.asarray(velocities, float)
    gxx, gxy, gyy, ox, oy, lam = scenario.triple_array(P[:, 0], P[:, 1])
    F, Fl, status, _ = metric_arrays(gxx, gxy, gyy, ox, oy, lam, V[:, 0], V[:, 1])
    bad = np.flatnonzero(status == _OUT)
    if bad.size:
        raise InadmissibleVelocity(float(s[bad[0]]))
    lF = float(np.trapezoid(F, s)) if hasattr(np, "trapezoid") else float(np.trapz(F, s))
    ds = np.diff(s)
    # an infinite sample only matters when it is weighted by a nonzero interval
    inf_mask = np.isinf(Fl)
    weighted = np.zeros(len(s), bool)
    weighted[:-1] |= ds != 0
    weighted[1:] |= ds != 0
    if np.any(inf_mask & weighted):
        return lF, INF
    Fl = np.where(inf_mask, 0.0, Fl)
    lFl = float(np.sum(0.5 * ds * (Fl[:-1] + Fl[1:])))
    return lF, lFl


def indicatrix_centroid_2d(local: LocalData, quadrature_n: int = 256) -> np.ndarray:
    """Centroid of the region bounded by the indicatrix ``{z : F(z) = 1}`` closed
    into an ellipse, ``g0(z,z) + 2 omega(z) - lam = 0``, by polar quadrature
    about an interior point."""
    g, w, lam = local.g0, local.omega, local.lam

    def Q(z):
        return float(z @ g @ z + 2.0 * w @ z - lam)

    if Q(np.zeros(2)) < 0:
        P = np.zeros(2)
    else:
        # pick an interior point on the chord along the steepest descent of Q
        d = -np.linalg.solve(g, w)
        d = d / math.sqrt(float(d @ g @ d))
        a, b, c = 1.0, float(w @ d), -lam
        disc = math.sqrt(b * b - a * c)
        s1, s2 = (-b - disc) / a, (-b + disc) / a
        P = (0.3 * s1 + 0.7 * s2) * d
    th = 2.0 * math.pi * np.arange(quadrature_n) / quadrature_n
    U = np.stack([np.cos(th), np.sin(th)], axis=1)
    a = np.einsum("ni,ij,nj->n", U, g, U)
    b = U @ (g @ P) + U @ w
    c = Q(P)
    r = (-b + np.sqrt(b * b - a * c)) / a
    dth = 2.0 * math.pi / quadrature_n
    area = 0.5 * np.sum(r ** 2) * dth
    moment = np.sum((r ** 3 / 3.0)[:, None] * U, axis=0) * dth
    return P + moment / area
