import numpy as np
import pytest
from hypothesis import given, strategies as st

from rank1lab.ambient import (curvature, curvature_components, curvature_tensor, curvature_trace, make_space,
                              parse_family, point_algebra, ricci_check, sectional_curvature)


@pytest.mark.parametrize("args, d, dim, rbar", [
    (("C", 1, 2, 1.0), 2, 4, 6.0),
    (("H", 1, 3, 1.0), 4, 12, 20.0),
    (("C", -1, 2, 1.0), 2, 4, -6.0),
    (("O", 1, 2, 1.0), 8, 16, 36.0),
    (("H", -1, 3, 1.0), 4, 12, -20.0),
])
def test_make_space_derived(args, d, dim, rbar):
    sp = make_space(*args)
    assert (sp.d, sp.real_dim, sp.einstein) == (d, dim, rbar)


@pytest.mark.parametrize("args", [("C", 1, 2, 0.0), ("C", 1, 2, -1.0), ("O", 1, 3, 1.0), ("C", 1, 0, 1.0),
                                  ("X", 1, 2, 1.0), ("C", 0, 2, 1.0)])
def test_make_space_rejects(args):
    with pytest.raises(ValueError):
        make_space(*args)


def test_parse_family():
    assert parse_family("CH") == ("C", -1)
    assert parse_family("h", -1) == ("H", -1)
    with pytest.raises(ValueError):
        parse_family("CP", -1)


def test_structure_operators(space_pa):
    sp, pa = space_pa
    I = np.eye(pa.dim)
    assert pa.J.shape == (sp.d - 1, pa.dim, pa.dim)
    for J in pa.J:
        assert np.max(np.abs(J @ J + I)) < 1e-12
        assert np.max(np.abs(J.T @ J - I)) < 1e-12
        assert np.max(np.abs(J + J.T)) < 1e-12


def test_quaternion_convention_recorded():
    pa = point_algebra(make_space("H", 1, 1))
    assert np.allclose(pa.J[0] @ pa.J[1], -pa.J[2])
    assert "J1 J2 = -J3" in pa.convention


def test_named_planes():
    sp = make_space("C", 1, 2)
    pa = point_algebra(sp)
    X = np.eye(4)[0]
    Y = np.eye(4)[2]
    assert curvature(sp, pa, X, Y, Y, X) == pytest.approx(1.0)
    JX = pa.J[0] @ X
    assert curvature(sp, pa, X, JX, JX, X) == pytest.approx(4.0)
    assert curvature(sp, pa, X, X, Y, Y) == 0.0
    ch = make_space("C", -1, 2)
    assert sectional_curvature(ch, point_algebra(ch), X, JX) == pytest.approx(-4.0)
    hp = make_space("H", 1, 2)
    assert sectional_curvature(hp, point_algebra(hp), np.eye(8)[0], np.eye(8)[4]) == pytest.approx(1.0)


def test_errors():
    sp = make_space("C", 1, 2)
    pa = point_algebra(sp)
    with pytest.raises(ValueError):
        curvature(sp, pa, np.ones(3), np.ones(4), np.ones(4), np.ones(4))
    with pytest.raises(ValueError):
        sectional_curvature(sp, pa, np.eye(4)[0], 2 * np.eye(4)[0])
    with pytest.raises(ValueError):
        ricci_check(sp, pa, 2 * np.eye(4)[0])


def test_symmetries_and_bianchi(space_pa, rng):
    sp, pa = space_pa
    X, Y, Z, W = rng.standard_normal((4, 2000, pa.dim))
    R = lambda a, b, c, d: curvature(sp, pa, a, b, c, d)
    base = R(X, Y, Z, W)
    assert np.max(np.abs(base + R(Y, X, Z, W))) < 1e-12 * 50
    assert np.max(np.abs(base - R(Z, W, X, Y))) < 1e-12 * 50
    assert np.max(np.abs(base + R(Y, Z, X, W) + R(Z, X, Y, W))) < 1e-12 * 50


def test_sectional_range_and_ricci(space_pa, rng):
    sp, pa = space_pa
    for _ in range(200):
        X, Y = rng.standard_normal((2, pa.dim))
        K = sectional_curvature(sp, pa, X, Y) * sp.sign
        assert sp.c - 1e-12 <= K <= 4 * sp.c + 1e-12
        u = X / np.linalg.norm(X)
        assert abs(ricci_check(sp, pa, u) - sp.einstein) < 1e-10


def test_components_match_pointwise(space_pa, rng):
    sp, pa = space_pa
    A, B, C, D = rng.standard_normal((4, pa.dim, 3))
    comp = curvature_components(sp, pa.J, A, B, C, D)
    ref = np.einsum("ia,jb,kc,ld,ijkl->abcd", A, B, C, D, curvature_tensor(sp, pa))
    direct = curvature(sp, pa, A.T[:, None, None, None], B.T[None, :, None, None],
                       C.T[None, None, :, None], D.T[None, None, None, :])
    assert np.max(np.abs(comp - direct)) < 1e-12
    assert np.max(np.abs(ref - direct)) < 1e-11
    tr = curvature_trace(sp, pa.J, A, B, D)
    assert np.max(np.abs(tr - np.einsum("ajjd->ad", curvature_components(sp, pa.J, A, B, B, D)))) < 1e-12


def test_regauge_invariance(rng):
    sp = make_space("H", 1, 2)
    pa = point_algebra(sp)
    Q, _ = np.linalg.qr(rng.standard_normal((3, 3)))
    Q *= np.sign(np.linalg.det(Q))
    pb = pa.regauged(rotation=Q)
    X, Y, Z, W = rng.standard_normal((4, 50, 8))
    assert np.max(np.abs(curvature(sp, pa, X, Y, Z, W) - curvature(sp, pb, X, Y, Z, W))) < 1e-12


@given(st.floats(0.05, 20.0), st.integers(0, 10_000))
def test_scaling_law(c, seed):
    r = np.random.default_rng(seed)
    s1 = make_space("C", -1, 2, 1.0)
    sc = s1.with_c(c)
    pa = point_algebra(s1)
    X, Y, Z, W = r.standard_normal((4, 8, 4))
    assert np.allclose(curvature(sc, pa, X, Y, Z, W), c * curvature(s1, pa, X, Y, Z, W), rtol=1e-13, atol=0)


@given(st.integers(0, 2 ** 31), st.sampled_from(["C", "H", "O"]), st.sampled_from([1, -1]))
def test_sectional_bounds_property(seed, fam, sign):
    sp = make_space(fam, sign, 2)
    pa = point_algebra(sp)
    X, Y = np.random.default_rng(seed).standard_normal((2, pa.dim))
    K = sign * sectional_curvature(sp, pa, X, Y)
    assert 1 - 1e-12 <= K <= 4 + 1e-12
