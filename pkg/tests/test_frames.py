import numpy as np
import pytest
from hypothesis import given, strategies as st

from rank1lab.ambient import make_space, point_algebra
from rank1lab.frames import (HypothesisViolation, SubspacePair, build_type1, build_type2, pair_from_frame,
                             random_pair, split_operators, synthetic_angle_norms, type2_residuals)


def _pair(fam, sign, n, m, seed):
    pa = point_algebra(make_space(fam, sign, n))
    return random_pair(pa, m, np.random.default_rng(seed))


def test_subspace_pair_validation():
    pa = point_algebra(make_space("C", 1, 2))
    with pytest.raises(ValueError):
        SubspacePair(pa, np.eye(4)[:, :2], np.eye(4)[:, 1:3])
    with pytest.raises(ValueError):
        SubspacePair(pa, np.eye(4)[:, :2], np.eye(4)[:, 2:3])


def test_type1_examples():
    pa = point_algebra(make_space("C", 1, 3))
    pair = pair_from_frame(pa, np.eye(6), 3)
    fr = build_type1(pair, [3.0, 4.0, 0.0])
    assert np.allclose(fr.H_direction, [0.6, 0.8, 0.0])
    assert fr.H_norm == pytest.approx(5.0)
    assert np.allclose(fr.trace_data(), [5.0, 0.0, 0.0])
    fr = build_type1(pair, [2.0, 0.0, 0.0])
    assert np.allclose(fr.rotation, np.eye(3))
    with pytest.raises(ValueError, match="undefined"):
        build_type1(pair, [0.0, 0.0, 0.0])


@given(st.integers(0, 2 ** 31))
def test_type1_orthonormal(seed):
    pair = _pair("H", 1, 2, 5, seed)
    H = np.random.default_rng(seed + 1).standard_normal(3)
    fr = build_type1(pair, H)
    E = np.hstack([fr.tangent, fr.normal])
    assert np.max(np.abs(E.T @ E - np.eye(8))) <= 1e-12
    assert np.max(np.abs(fr.normal.T @ (pair.normal @ H) / np.linalg.norm(H) - np.eye(3)[0])) <= 1e-12


def test_type2_named_examples():
    pa = point_algebra(make_space("C", 1, 2))
    J = pa.J[0]
    e = np.eye(4)
    complex_pair = SubspacePair(pa, e[:, :2], e[:, 2:])     # J-invariant tangent plane
    fr = build_type2(complex_pair, 0)
    assert fr.tau[0] == pytest.approx(0.0, abs=1e-12) and fr.nu[0] == pytest.approx(1.0)
    real = np.stack([e[0], e[2]], 1)
    normal = np.stack([J @ e[0], J @ e[2]], 1)
    fr = build_type2(SubspacePair(pa, real, normal), 0)
    assert fr.tau[0] == pytest.approx(1.0) and fr.nu[0] == pytest.approx(0.0, abs=1e-12)
    hyp = build_type2(pair_from_frame(point_algebra(make_space("C", 1, 2)), np.eye(4), 3), 0)
    assert hyp.tau[-1] == 1.0 and hyp.nu[-1] == 0.0
    res = type2_residuals(hyp, pa.J)
    assert res["odd"] < 1e-12


def test_type2_requires_k_le_m():
    pair = _pair("C", 1, 3, 2, 0)
    with pytest.raises(HypothesisViolation):
        build_type2(pair, 0)


@given(st.integers(0, 2 ** 31), st.sampled_from([("C", 1, 3, 3), ("C", -1, 4, 5), ("H", 1, 2, 4),
                                                  ("H", -1, 3, 7), ("O", 1, 2, 9), ("O", -1, 2, 8)]))
def test_type2_relations(seed, conf):
    fam, sign, n, m = conf
    pair = _pair(fam, sign, n, m, seed)
    for xi in range(pair.ambient.J.shape[0]):
        fr = build_type2(pair, xi)
        res = type2_residuals(fr, pair.ambient.J)
        assert max(res.values()) <= 1e-10
        assert np.all((fr.tau >= 0) & (fr.tau <= 1) & (fr.nu >= 0) & (fr.nu <= 1 + 1e-15))


@given(st.integers(0, 2 ** 31), st.sampled_from([("C", 1, 3, 4), ("H", -1, 2, 5), ("O", 1, 2, 12)]))
def test_split_operator_invariants(seed, conf):
    fam, sign, n, m = conf
    pair = _pair(fam, sign, n, m, seed)
    so = split_operators(pair)
    assert so.reconstruction_error(pair) <= 1e-12
    assert np.allclose(so.P_norm2 + so.F_norm2, m, atol=1e-10)
    assert np.allclose(so.F_norm2, so.t_norm2, atol=1e-10)
    l1, l2 = so.angle_margins()
    assert np.all(l1 >= -1e-9) and np.all(l2 >= -1e-9)
    assert so.omega_norm2 <= so.omega_bound + 1e-9
    for xi in range(pair.ambient.J.shape[0]) if pair.k <= pair.m else []:
        fr = build_type2(pair, xi)
        fp = 2 * np.sum((fr.tau[:pair.k // 2] * fr.nu[:pair.k // 2]) ** 2)
        assert so.FP_norm2[xi] == pytest.approx(fp, abs=1e-9)


def test_hypersurface_omega_zero(space_pa, rng):
    sp, pa = space_pa
    so = split_operators(random_pair(pa, pa.dim - 1, rng))
    assert so.omega_norm2 < 1e-20


def test_complex_submanifold_fp_zero():
    pa = point_algebra(make_space("C", 1, 3))
    so = split_operators(pair_from_frame(pa, np.eye(6), 4))
    assert np.allclose(so.FP_norm2, 0.0)


@pytest.mark.parametrize("m", [2, 3, 6, 11])
def test_synthetic_k2_example(m):
    P2, F2, FP2 = synthetic_angle_norms(np.array([1 / np.sqrt(2)]), m, 2)
    assert (P2, F2, FP2) == pytest.approx((m - 1, 1.0, 0.5))
    assert P2 * F2 - m * FP2 == pytest.approx((m - 1) - m / 2)


@given(st.integers(0, 2 ** 31))
def test_gauge_independence(seed):
    r = np.random.default_rng(seed)
    pair = _pair("H", 1, 3, 7, seed)
    Q, _ = np.linalg.qr(r.standard_normal((3, 3)))
    Q *= np.sign(np.linalg.det(Q))
    pa2 = pair.ambient.regauged(rotation=Q)
    a = split_operators(pair)
    b = split_operators(SubspacePair(pa2, pair.tangent, pair.normal))
    assert abs(a.omega_norm2 - b.omega_norm2) <= 1e-10
    assert abs(np.sum(a.P_norm2) - np.sum(b.P_norm2)) <= 1e-10
    spec = lambda s: np.linalg.eigvalsh(np.einsum("xji,xjk->ik", s.P, s.P))
    assert np.max(np.abs(spec(a) - spec(b))) <= 1e-10
