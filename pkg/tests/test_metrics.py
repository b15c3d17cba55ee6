import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from windnav.metrics import (
    INF,
    ConeStatus,
    DecompositionUndefined,
    MetricDomainError,
    WindClass,
    canonical_representative,
    classify,
    cone_membership,
    eval_F,
    eval_Fl,
    eval_h,
    fundamental_tensor,
    fundamental_tensor_fd,
    indicatrix_centroid_2d,
    is_infinite,
    randers_decomposition,
    reconstruct_from_randers,
    reverse_eval,
    wind_length,
)
from windnav.scenario import LocalData

from conftest import SQ3, constant_wind

MILD = LocalData.from_wind((0.5, 0.0))
CRIT = LocalData.from_wind((1.0, 0.0))
STRONG = LocalData.from_wind((2.0, 0.0))
CALM = LocalData.from_wind((0.0, 0.0))


@pytest.mark.parametrize("L, want", [(MILD, WindClass.MILD), (CRIT, WindClass.CRITICAL),
                                     (STRONG, WindClass.STRONG), (CALM, WindClass.MILD)])
def test_classify(L, want):
    assert classify(L) is want


def test_classify_tolerance_band():
    assert classify(LocalData.constant(np.eye(2), (-1.0, 0.0), 1e-12)) is WindClass.CRITICAL
    assert classify(LocalData.constant(np.eye(2), (-1.0, 0.0), 1e-8)) is WindClass.MILD


@pytest.mark.parametrize("L, v, want", [
    (STRONG, (1, 0), ConeStatus.IN_A),
    (STRONG, (0, 1), ConeStatus.OUTSIDE),
    (STRONG, (SQ3, 1), ConeStatus.BOUNDARY_AE),
    (STRONG, (-1, 0), ConeStatus.OUTSIDE),
    (CRIT, (1, 1), ConeStatus.IN_A),
    (CRIT, (0, 1), ConeStatus.OUTSIDE),
    (CRIT, (0, 0), ConeStatus.KROPINA_ZERO),
    (MILD, (-1, 0), ConeStatus.IN_A),
])
def test_cone_membership(L, v, want):
    assert cone_membership(L, v) is want


@pytest.mark.parametrize("L, v, F", [
    (MILD, (1, 0), 2 / 3),
    (MILD, (-1, 0), 2.0),
    (CRIT, (1, 1), 1.0),
    (STRONG, (1, 0), 1 / 3),
    (STRONG, (SQ3, 1), 2 / SQ3),
])
def test_eval_F(L, v, F):
    assert eval_F(L, v) == pytest.approx(F, rel=1e-14)


def test_eval_Fl():
    assert eval_Fl(STRONG, (1, 0)) == pytest.approx(1.0, rel=1e-14)
    assert eval_Fl(STRONG, (SQ3, 1)) == pytest.approx(2 / SQ3, rel=1e-7)
    assert eval_F(STRONG, (SQ3, 1)) == pytest.approx(eval_Fl(STRONG, (SQ3, 1)), rel=1e-7)
    assert is_infinite(eval_Fl(MILD, (1, 0)))
    assert eval_Fl(MILD, (1, 0)) is INF


def test_kropina_zero_convention():
    assert eval_F(CRIT, (0, 0)) == 1.0
    assert eval_Fl(CRIT, (0, 0)) == 1.0


def test_outside_cone_is_a_domain_error():
    with pytest.raises(MetricDomainError):
        eval_F(STRONG, (0, 1))
    with pytest.raises(MetricDomainError):
        eval_Fl(STRONG, (-1, 0))


def test_infinity_marker_orders_but_does_not_do_arithmetic():
    assert INF > 1e300 and not INF < 5 and INF == INF
    with pytest.raises(TypeError):
        INF + 1.0


def test_eval_h():
    assert eval_h(STRONG, (1, 0), (1, 0)) == pytest.approx(1.0)
    assert eval_h(STRONG, (0, 1), (0, 1)) == pytest.approx(-3.0)
    assert eval_h(CRIT, (0, 1), (0, 1)) == 0.0
    assert eval_h(STRONG, (1, 2), (3, -1)) == pytest.approx(eval_h(STRONG, (3, -1), (1, 2)))


@pytest.mark.parametrize("L, signs", [(MILD, (1, 1)), (STRONG, (-1, 1)), (CRIT, (0, 1))])
def test_h_signature(L, signs):
    H = np.array([[eval_h(L, a, b) for b in np.eye(2)] for a in np.eye(2)])
    ev = np.linalg.eigvalsh(H)
    assert tuple(int(np.sign(round(e, 12))) for e in ev) == signs


def test_canonical_representative():
    g, w, lam = canonical_representative(np.eye(2), (-2, 0), -3)
    assert np.allclose(g, np.eye(2)) and np.allclose(w, [-2, 0]) and lam == pytest.approx(-3)
    g, w, lam = canonical_representative(2 * np.eye(2), (-4, 0), -6)
    assert np.allclose(g, np.eye(2)) and np.allclose(w, [-2, 0]) and lam == pytest.approx(-3)
    W = -np.linalg.solve(g, w)
    assert lam == pytest.approx(1 - W @ g @ W, abs=1e-14)
    g, w, lam = canonical_representative(np.eye(2), (0, 0), 4)
    assert np.allclose(g, np.eye(2) / 4) and np.allclose(w, 0) and lam == pytest.approx(1)


def test_canonical_representative_rejects_degenerate():
    with pytest.raises(MetricDomainError):
        canonical_representative(np.eye(2), (0, 0), 0.0)


def test_randers_decomposition_mild():
    ht, beta = randers_decomposition(MILD)
    assert np.allclose(ht, np.diag([16 / 9, 4 / 3]))
    assert np.allclose(beta, [-2 / 3, 0])
    v = np.array([1.0, 0.0])
    assert math.sqrt(v @ ht @ v) + beta @ v == pytest.approx(eval_F(MILD, v))


def test_randers_decomposition_calm_and_strong():
    ht, beta = randers_decomposition(CALM)
    assert np.allclose(ht, np.eye(2)) and np.allclose(beta, 0)
    ht, beta = randers_decomposition(STRONG)
    v = np.array([1.0, 0.0])
    assert beta @ v == pytest.approx(2 / 3)
    assert math.sqrt(v @ ht @ v) == pytest.approx(1 / 3)
    assert -math.sqrt(v @ ht @ v) + beta @ v == pytest.approx(eval_F(STRONG, v))
    assert math.sqrt(v @ ht @ v) + beta @ v == pytest.approx(eval_Fl(STRONG, v))


def test_randers_undefined_at_critical_point():
    with pytest.raises(DecompositionUndefined):
        randers_decomposition(CRIT)


@pytest.mark.parametrize("L, wc, triple", [
    (MILD, WindClass.MILD, (np.eye(2), (-0.5, 0), 0.75)),
    (CALM, WindClass.MILD, (np.eye(2), (0, 0), 1.0)),
    (STRONG, WindClass.STRONG, (np.eye(2), (-2, 0), -3.0)),
])
def test_reconstruct_round_trip(L, wc, triple):
    g, w, lam = reconstruct_from_randers(*randers_decomposition(L), wc)
    assert np.allclose(g, triple[0], atol=1e-10)
    assert np.allclose(w, triple[1], atol=1e-10)
    assert lam == pytest.approx(triple[2], abs=1e-10)


def test_reconstruct_preconditions():
    with pytest.raises(MetricDomainError):
        reconstruct_from_randers(np.eye(2), (2.0, 0.0), WindClass.MILD)
    with pytest.raises(MetricDomainError):
        reconstruct_from_randers(np.eye(2), (0.5, 0.0), WindClass.STRONG)
    with pytest.raises(DecompositionUndefined):
        reconstruct_from_randers(np.eye(2), (0.5, 0.0), WindClass.CRITICAL)


def test_reverse_eval():
    assert reverse_eval(STRONG, (-1, 0))[0] == pytest.approx(1 / 3)
    assert reverse_eval(MILD, (1, 0))[0] == pytest.approx(2.0)
    for th in np.linspace(0, 6, 9):
        v = (math.cos(th), math.sin(th))
        assert reverse_eval(CALM, v)[0] == pytest.approx(eval_F(CALM, v))
    with pytest.raises(MetricDomainError):
        reverse_eval(STRONG, (1, 0))


def test_fundamental_tensor_examples():
    assert np.allclose(fundamental_tensor(CALM, (0.3, -1.2)), np.eye(2), atol=1e-14)
    v = np.array([3.0, 0.0])
    G = fundamental_tensor(STRONG, v, 1)
    assert v @ G @ v == pytest.approx(eval_F(STRONG, v) ** 2, rel=1e-12)
    assert eval_F(STRONG, v) == pytest.approx(1.0)
    ev = np.linalg.eigvalsh(fundamental_tensor(STRONG, (1, 0), -1))
    assert ev[0] < 0 < ev[1]


def test_fundamental_tensor_errors():
    with pytest.raises(MetricDomainError):
        fundamental_tensor(MILD, (1, 0), -1)
    with pytest.raises(MetricDomainError):
        fundamental_tensor(STRONG, (0, 1), 1)
    with pytest.raises(MetricDomainError):
        fundamental_tensor(STRONG, (SQ3, 1), 1)


def _Z_mp(g, w, lam, v, eps):
    q = g[0][0] * v[0] ** 2 + 2 * g[0][1] * v[0] * v[1] + g[1][1] * v[1] ** 2
    om = w[0] * v[0] + w[1] * v[1]
    return q / (-om + eps * mp.sqrt(lam * q + om ** 2))


def _hessian_mp(L, v, eps):
    g = [[mp.mpf(float(a)) for a in r] for r in L.g0]
    w = [mp.mpf(float(a)) for a in L.omega]
    lam = mp.mpf(float(L.lam))

    def f(a, b):
        return _Z_mp(g, w, lam, [a, b], eps) ** 2 / 2

    p = (mp.mpf(float(v[0])), mp.mpf(float(v[1])))
    xx, xy, yy = (float(mp.diff(f, p, o)) for o in ((2, 0), (1, 1), (0, 2)))
    return np.array([[xx, xy], [xy, yy]])


@pytest.mark.parametrize("g, w, lam", [
    (((1.0, 0.0), (0.0, 1.0)), (-0.5, 0.0), 0.75),
    (((1.3, 0.2), (0.2, 0.8)), (-1.4, 0.3), -1.2),
    (((1.0, 0.05), (0.05, 1.0)), (-1.0, -0.05), 0.0),
    (((2.0, -0.4), (-0.4, 1.0)), (0.2, 0.9), 0.3),
])
def test_fundamental_tensor_against_high_precision_hessian(g, w, lam):
    mp.mp.dps = 40
    L = LocalData.constant(np.array(g), w, lam)
    rng = np.random.default_rng(3)
    eps_list = (1, -1) if classify(L) is WindClass.STRONG else (1,)
    n = 0
    for th in rng.uniform(0, 2 * math.pi, 40):
        v = np.array([math.cos(th), math.sin(th)])
        if cone_membership(L, v) is not ConeStatus.IN_A:
            continue
        for eps in eps_list:
            ref = _hessian_mp(L, v, eps)
            assert np.max(np.abs(fundamental_tensor(L, v, eps) - ref)) <= 1e-10 * max(1.0, np.max(np.abs(ref)))
            n += 1
    assert n >= 5


def test_fd_reference_agrees_with_closed_form():
    L = LocalData.constant(np.array([[1.3, 0.2], [0.2, 0.8]]), (-1.4, 0.3), -1.2)
    for th in np.linspace(-0.5, 0.5, 11):
        v = np.array([math.cos(th), math.sin(th)])
        if cone_membership(L, v) is not ConeStatus.IN_A:
            continue
        for eps in (1, -1):
            assert np.allclose(fundamental_tensor_fd(L, v, eps), fundamental_tensor(L, v, eps), atol=1e-6)


def test_wind_length_examples():
    S = constant_wind((2.0, 0.0))
    s = np.linspace(0, 1, 11)
    P = np.outer(s, [3.0, 0.0])
    V = np.tile([3.0, 0.0], (11, 1))
    lF, lFl = wind_length(S, s, P, V)
    assert lF == pytest.approx(1.0) and lFl == pytest.approx(3.0)
    d = np.array([1.5, SQ3 / 2])
    lF, lFl = wind_length(S, s, np.outer(s, d), np.tile(d, (11, 1)))
    assert lF == pytest.approx(1.0, rel=1e-7) and lFl == pytest.approx(1.0, rel=1e-7)
    C = constant_wind((0.0, 0.0))
    lF, lFl = wind_length(C, s, np.outer(2 * s, [0.6, 0.8]), np.tile([1.2, 1.6], (11, 1)))
    assert lF == pytest.approx(2.0) and lFl is INF


def test_wind_length_reports_inadmissible_parameter():
    S = constant_wind((2.0, 0.0))
    s = np.linspace(0, 1, 5)
    V = np.tile([3.0, 0.0], (5, 1))
    V[3] = (-1.0, 0.0)
    with pytest.raises(MetricDomainError, match="s=0.75"):
        wind_length(S, s, np.zeros((5, 2)), V)


@pytest.mark.parametrize("W", [(0.5, 0.0), (2.0, 0.0), (0.0, 0.0), (-0.7, 1.9)])
def test_indicatrix_centroid_is_the_wind(W):
    c = indicatrix_centroid_2d(LocalData.from_wind(W), 256)
    assert np.allclose(c, W, atol=1e-6)


# --- property tests ---------------------------------------------------------------

def _random_local(data):
    a = data.draw(st.floats(0.5, 2.0))
    c = data.draw(st.floats(0.5, 2.0))
    b = data.draw(st.floats(-0.3, 0.3))
    speed = data.draw(st.one_of(st.floats(0.0, 0.9), st.just(1.0), st.floats(1.1, 3.0)))
    ang = data.draw(st.floats(0, 2 * math.pi))
    g = np.array([[a, b], [b, c]])
    u = np.array([math.cos(ang), math.sin(ang)])
    W = speed * u / math.sqrt(u @ g @ u)
    return LocalData.from_wind(W, g), g, W


def _admissible(data, L):
    th = data.draw(st.floats(0, 2 * math.pi))
    r = data.draw(st.floats(0.1, 5.0))
    v = r * np.array([math.cos(th), math.sin(th)])
    assume(cone_membership(L, v) is ConeStatus.IN_A)
    return v


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_homogeneity(data):
    L, _, _ = _random_local(data)
    v = _admissible(data, L)
    F, Fl = eval_F(L, v), eval_Fl(L, v)
    for lam in (0.5, 2.0, 10.0):
        assert eval_F(L, lam * v) == pytest.approx(lam * F, rel=1e-12)
        if not is_infinite(Fl):
            assert eval_Fl(L, lam * v) == pytest.approx(lam * Fl, rel=1e-12)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_indicatrix_and_quadratic_identities(data):
    L, g, W = _random_local(data)
    v = _admissible(data, L)
    for Z in (eval_F(L, v), eval_Fl(L, v)):
        if is_infinite(Z):
            continue
        u = v / Z - W
        assert abs(u @ g @ u - 1.0) <= 1e-10
        q = v @ L.g0 @ v
        res = q + 2 * (L.omega @ v) * Z - L.lam * Z * Z
        assert abs(res) <= 1e-10 * max(1.0, q)


@settings(max_examples=200, deadline=None)
@given(st.data())
def test_h_identity_and_order(data):
    L, _, _ = _random_local(data)
    v = _admissible(data, L)
    q, w = v @ L.g0 @ v, L.omega @ v
    rh = math.sqrt(max(eval_h(L, v, v), 0.0))
    F, Fl = eval_F(L, v), eval_Fl(L, v)
    assert abs((-w + rh) * F - q) <= 1e-10 * max(1.0, q)
    if classify(L) is WindClass.STRONG:
        assert abs((-w - rh) * Fl - q) <= 1e-10 * max(1.0, q)
        assert F < Fl
    else:
        assert Fl is INF


@settings(max_examples=200, deadline=None)
@given(st.data(), st.floats(0.1, 10.0))
def test_conformal_invariance(data, c):
    L, _, _ = _random_local(data)
    v = _admissible(data, L)
    M = LocalData.constant(c * L.g0, c * L.omega, c * L.lam)
    assert eval_F(M, v) == pytest.approx(eval_F(L, v), rel=1e-12)
    a, b = eval_Fl(L, v), eval_Fl(M, v)
    if is_infinite(a):
        assert is_infinite(b)
    else:
        assert b == pytest.approx(a, rel=1e-12)


def test_boundary_merge():
    gap = []
    a = math.pi / 6
    for d in (1e-1, 1e-2, 1e-3, 1e-4):
        v = (math.cos(a - d), math.sin(a - d))
        gap.append(eval_Fl(STRONG, v) - eval_F(STRONG, v))
    assert all(x > y > 0 for x, y in zip(gap, gap[1:]))
    assert gap[-1] < 1e-1


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_fundamental_tensor_invariants(data):
    L, _, _ = _random_local(data)
    assume(abs(L.lam) > 1e-3)
    v = _admissible(data, L)
    for eps in ((1, -1) if classify(L) is WindClass.STRONG else (1,)):
        G = fundamental_tensor(L, v, eps)
        Z = eval_F(L, v) if eps == 1 else eval_Fl(L, v)
        assert v @ G @ v == pytest.approx(Z * Z, rel=1e-8)
        ev = np.linalg.eigvalsh(G)
        if eps == 1:
            assert ev[0] > 0
        else:
            assert ev[0] < 0 < ev[1]
