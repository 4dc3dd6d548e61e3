import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from rank1lab import flows as F
from rank1lab.ambient import make_space
from rank1lab.models import GlobalModel

CH2 = make_space("C", -1, 2)


def test_initial_mean_curvature():
    assert F.sphere_H(CH2, 1.0) == pytest.approx(2 / math.tanh(1) + 2 / math.tanh(2), rel=1e-14)
    assert F.sphere_H(CH2, 1.0) == pytest.approx(4.7007, abs=5e-5)


@pytest.mark.parametrize("conf", [("C", 1, 2), ("H", 1, 2), ("C", -1, 3), ("H", -1, 2)])
def test_principal_curvatures_against_distance_hessian(conf):
    sp = make_space(*conf)
    M = GlobalModel(sp)
    rng = np.random.default_rng(1)
    p = M.random_point(rng)
    v = M.random_horizontal(p, rng)
    r = 0.4
    q = M.geodesic(p, v, r)
    u = M.velocity(p, v, r)
    u = u / np.sqrt(abs(M.form(u, u)))
    B = M.horizontal_basis(q, rng, first=u)
    h = 1e-4

    def hess(X):
        X = X / np.sqrt(abs(M.form(X, X)))
        f = lambda s: M.distance(p, M.geodesic(q, X, s))
        return (f(h) - 2 * f(0) + f(-h)) / h ** 2

    vals = np.array([hess(B[:, i]) for i in range(1, B.shape[1])])
    l1, l2 = F.principal_curvatures(sp, r)
    n1, n2 = F.multiplicities(sp)
    assert np.allclose(vals[:n2], l2, rtol=1e-5)
    assert np.allclose(vals[n2:], l1, rtol=1e-5)


def test_collapse_and_oracle():
    tr = F.sphere_flow(CH2, 1.0)
    T, r_of_t = F.sphere_flow_exact_oracle(CH2, 1.0)
    assert tr.collapsed and abs(tr.collapse_time - T) <= 1e-6
    assert tr.collapse_time <= 0.25
    assert np.all(np.diff(tr.t) > 0) and np.all(np.diff(tr.state) < 0)
    mid = len(tr) // 2
    assert r_of_t(tr.t[mid]) == pytest.approx(tr.state[mid], rel=1e-7)


def test_degenerate_radius_collapses_immediately():
    tr = F.sphere_flow(CH2, F.R_TOL)
    assert tr.collapsed and tr.collapse_time == 0.0


@pytest.mark.parametrize("r0", [0.0, -1.0, math.inf, math.nan])
def test_invalid_radius(r0):
    with pytest.raises(F.FlowError):
        F.sphere_flow(CH2, r0)


def test_focal_barrier():
    with pytest.raises(F.FlowError):
        F.sphere_flow(make_space("C", 1, 2), math.pi / 4)
    with pytest.raises(F.FlowError):
        F.sphere_flow(make_space("O", 1, 2), 0.1)


def test_cp1_closed_form():
    cp1 = make_space("C", 1, 1)
    T, _ = F.sphere_flow_exact_oracle(cp1, math.pi / 8)
    assert T == pytest.approx(math.log(math.sqrt(2)) / 4, rel=1e-12)
    assert F.circle_collapse_time(math.pi / 8) == pytest.approx(0.0866, abs=5e-5)


@pytest.mark.parametrize("conf", [("C", -1, 2), ("H", -1, 3), ("C", 1, 3)])
def test_euclidean_limit(conf):
    sp = make_space(*conf)
    r0 = 1e-3
    T, _ = F.sphere_flow_exact_oracle(sp, r0)
    m = sp.real_dim - 1
    assert T / (r0 ** 2 / (2 * m)) == pytest.approx(1.0, rel=1e-5)


def test_t_end_stops_early():
    tr = F.sphere_flow(CH2, 1.0, t_end=0.05)
    assert not tr.collapsed and tr.t[-1] == pytest.approx(0.05)
    _, r_of_t = F.sphere_flow_exact_oracle(CH2, 1.0)
    assert tr.state[-1] == pytest.approx(r_of_t(0.05), rel=1e-8)


def test_trace_csv_and_manifest():
    tr = F.sphere_flow(CH2, 0.3)
    text = tr.to_csv()
    assert text.splitlines()[0] == "t,r,normH2,normh2,normh02,Q0,Qeps,W,fsigma,Kmin,myers_diam"
    assert len(text.splitlines()) == len(tr) + 1
    man = tr.manifest()
    assert man["space"]["family"] == "C" and "version" in man and "params" in man
    assert F.sphere_flow(CH2, 0.3).to_csv() == text


def test_evolution_consistency():
    tr = F.sphere_flow(CH2, 1.0, safety=0.01)
    rep = F.evolution_consistency(tr)
    assert max(rep.H2_residual, rep.h2_residual, rep.volume_residual) <= 1e-6
    with pytest.raises(F.FlowError):
        F.evolution_consistency(F.sphere_flow(CH2, 1.0, t_end=1e-6))


def test_h2_reaction_matches_closed_form():
    for r in (0.2, 0.7, 1.5):
        H2 = F.sphere_H(CH2, r) ** 2
        h2 = F.sphere_h2(CH2, r)
        l1, l2 = F.principal_curvatures(CH2, r)
        # d|h|^2/dt along dr/dt = -|H|: 2 sum n_i l_i l_i' (-|H|)
        d1 = -1 / np.sinh(r) ** 2
        d2 = -4 / np.sinh(2 * r) ** 2
        ref = 2 * (2 * l1 * d1 + l2 * d2) * (-math.sqrt(H2))
        assert F.h2_reaction(CH2, r) == pytest.approx(ref, rel=1e-10)


def test_pinch_scan_examples():
    scan = F.pinch_monitor_scan(CH2, np.linspace(0.1, 1.0, 10))
    assert scan.rows[0]["star_margin"] > 0 and scan.rows[-1]["star_margin"] < 0
    a, b = scan.bracket
    assert 0.1 <= a < scan.r_star < b <= 1.0
    assert abs(F.star_margin(CH2, scan.r_star)) < 1e-9
    assert F.star_margin(CH2, scan.r_star - 1e-10) > 0 > F.star_margin(CH2, scan.r_star + 1e-10)
    cp2 = F.pinch_monitor_scan(make_space("C", 1, 2), np.linspace(1e-3, 0.3, 20))
    assert all(r["star_margin"] > 0 for r in cp2.rows) and cp2.r_star is None


def test_traceless_norm_monotone_on_pinched_range():
    scan = F.pinch_monitor_scan(CH2, np.linspace(0.1, 1.0, 10))
    r = np.linspace(1e-3, scan.r_star, 200)
    h02 = F.sphere_h2(CH2, r) - F.sphere_H(CH2, r) ** 2 / 3
    assert np.all(np.diff(h02) > 0)
    r = r[r > 0.05]
    h02 = F.sphere_h2(CH2, r) - F.sphere_H(CH2, r) ** 2 / 3
    l1, l2 = F.principal_curvatures(CH2, r)
    assert np.allclose(h02, 2 * (l1 - l2) ** 2 / 3, rtol=1e-6, atol=1e-12)


@given(st.floats(0.05, 1.5), st.sampled_from([("C", -1, 2), ("C", -1, 3), ("H", -1, 2), ("H", -1, 3)]))
def test_collapse_bound_property(r0, conf):
    sp = make_space(*conf)
    T, _ = F.sphere_flow_exact_oracle(sp, r0)
    assert T <= F.collapse_bound(sp, r0)


def test_pinching_preserved_and_decay_bounded():
    sp = make_space("H", -1, 2)
    tr = F.sphere_flow(sp, 0.2)
    q = tr.channels["Qeps"]
    assert q[0] < 0 and np.all(q < 0)
    assert np.all(np.isfinite(tr.channels["decay"]))
    assert np.max(tr.channels["decay"]) <= tr.channels["decay"][0] * 1.0000001


def test_myers_channel():
    cp = make_space("C", 1, 2)
    tr = F.sphere_flow(cp, 0.5)
    k = tr.channels["Kmin"][0]
    assert k > 0 and tr.channels["myers_diam"][0] == pytest.approx(math.pi / math.sqrt(k))


# curves

def test_great_circle_stationary():
    X = F.geodesic_circle(math.pi / 4, 128)
    tr = F.curve_flow(X, t_end=0.5, snapshots=5, snapshot_stride=1)
    assert np.max(np.abs(tr.state - X)) <= 1e-3
    assert tr.t[-1] == pytest.approx(0.5)


def test_circle_collapse_within_one_percent():
    X = F.geodesic_circle(math.pi / 8, 256)
    tr = F.curve_flow(X, stop_diam=0.2 * 2 * 0.5 * math.sin(math.pi / 4))
    assert abs(tr.collapse_time - 0.0866434) / 0.0866434 < 0.01


def test_generic_convex_length_decreasing():
    N = 96
    phi = 2 * np.pi * np.arange(N) / N
    th = 2 * (0.35 + 0.08 * np.cos(2 * phi) + 0.03 * np.sin(3 * phi))
    X = 0.5 * np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.cos(th)], 1)
    tr = F.curve_flow(X, t_end=0.06, snapshots=30)
    L = tr.channels["length"]
    assert np.all(np.diff(L) < 0)
    dL = np.diff(L) / np.diff(tr.t)
    k2 = 0.5 * (tr.channels["int_kappa2"][1:] + tr.channels["int_kappa2"][:-1])
    assert np.allclose(dL, -k2, rtol=0.05)


def test_round_point_verdict():
    N = 96
    phi = 2 * np.pi * np.arange(N) / N
    th = 2 * (0.3 + 0.05 * np.cos(2 * phi))
    X = 0.5 * np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.cos(th)], 1)
    r0 = F.round_point_ratio(X)
    tr = F.curve_flow(X, stop_diam=0.02, snapshot_stride=1, snapshots=1)
    assert r0 > 1.3
    assert F.round_point_ratio(tr.state[-1]) < 1.05


def test_polyline_validation():
    X = F.geodesic_circle(0.3, 64)
    with pytest.raises(F.FlowError):
        F.curve_flow(X[:10])
    with pytest.raises(F.FlowError):
        F.curve_flow(X * 1.01)
    idx = np.arange(64)
    idx[[10, 11]] = [11, 10]
    with pytest.raises(F.FlowError, match="simple"):
        F.curve_flow(X[idx])


def test_fd_derivative_exact_on_quartic():
    t = np.sort(np.random.default_rng(0).uniform(0, 1, 30))
    y = 3 * t ** 4 - t ** 2 + 2
    idx, d = F.fd_derivative(t, y)
    assert np.allclose(d, 12 * t[idx] ** 3 - 2 * t[idx], atol=1e-9)
