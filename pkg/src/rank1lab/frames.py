"""Adapted frames at a point of a submanifold.

All bases are stored as column matrices in the ambient orthonormal model.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import null_space, schur

from .ambient import PointAlgebra, curvature_components

ORTHO_TOL = 1e-11
TAU_ZERO = 1e-7


class HypothesisViolation(ValueError):
    """A construction was requested outside the dimensions where it exists."""


@dataclass(frozen=True)
class SubspacePair:
    ambient: PointAlgebra
    tangent: np.ndarray = field(repr=False)
    normal: np.ndarray = field(repr=False)

    def __post_init__(self):
        N = self.ambient.dim
        if self.tangent.shape[0] != N or self.normal.shape[0] != N:
            raise ValueError("basis rows must match the ambient dimension")
        if self.tangent.shape[1] + self.normal.shape[1] != N:
            raise ValueError("m + k must equal the real dimension")
        E = self.frame
        if np.max(np.abs(E.T @ E - np.eye(N))) > ORTHO_TOL:
            raise ValueError("tangent and normal bases are not orthonormal")

    @property
    def m(self) -> int:
        return self.tangent.shape[1]

    @property
    def k(self) -> int:
        return self.normal.shape[1]

    @property
    def frame(self) -> np.ndarray:
        return np.hstack([self.tangent, self.normal])


def pair_from_frame(pa: PointAlgebra, E: np.ndarray, m: int) -> SubspacePair:
    return SubspacePair(pa, E[:, :m].copy(), E[:, m:].copy())


def random_pair(pa: PointAlgebra, m: int, rng: np.random.Generator) -> SubspacePair:
    Q, _ = np.linalg.qr(rng.standard_normal((pa.dim, pa.dim)))
    return pair_from_frame(pa, Q, m)


# type (I)

@dataclass(frozen=True)
class FrameTypeI:
    tangent: np.ndarray = field(repr=False)
    normal: np.ndarray = field(repr=False)
    rotation: np.ndarray = field(repr=False)
    H_norm: float

    @property
    def H_direction(self) -> np.ndarray:
        return self.rotation[:, 0]

    def trace_data(self) -> np.ndarray:
        out = np.zeros(self.rotation.shape[0])
        out[0] = self.H_norm
        return out


def householder_completion(u: np.ndarray) -> np.ndarray:
    """Orthogonal matrix whose first column is the unit vector u."""
    k = u.shape[0]
    e1 = np.zeros(k)
    e1[0] = 1.0
    v = u - e1
    nv = v @ v
    if nv < 1e-30:
        return np.eye(k)
    return np.eye(k) - 2.0 * np.outer(v, v) / nv


def build_type1(pair: SubspacePair, H_vector) -> FrameTypeI:
    """Rotate the normal basis so that its first vector is H/|H| (H in normal coordinates)."""
    H = np.asarray(H_vector, dtype=float)
    if H.shape != (pair.k,):
        raise ValueError("H must be given in normal coordinates")
    nH = float(np.linalg.norm(H))
    if nH <= 1e-12:
        raise ValueError("frame of type (I) undefined: H = 0")
    U = householder_completion(H / nH)
    return FrameTypeI(pair.tangent, pair.normal @ U, U, nH)


# type (II)

@dataclass(frozen=True)
class FrameTypeII:
    xi: int
    tangent: np.ndarray = field(repr=False)
    normal: np.ndarray = field(repr=False)
    tau: np.ndarray
    nu: np.ndarray

    @property
    def n_pairs(self) -> int:
        return self.normal.shape[1] // 2


def _skew_blocks(f: np.ndarray):
    """Real Schur blocks of a skew matrix: list of (a, b, nu) with f a = nu b, f b = -nu a, plus kernel vectors."""
    k = f.shape[0]
    if k == 1:
        return [], [np.ones(1)]
    T, Z = schur(f, output="real")
    pairs, singles = [], []
    i = 0
    while i < k:
        if i + 1 < k and abs(T[i + 1, i]) > 0.0 and abs(T[i + 1, i]) >= abs(T[i, i + 1]) * 1e-3:
            beta = 0.5 * (T[i, i + 1] - T[i + 1, i])
            z1, z2 = Z[:, i], Z[:, i + 1]
            if beta < 0:
                pairs.append((z1, z2, -beta))
            else:
                pairs.append((z2, z1, beta))
            i += 2
        else:
            singles.append(Z[:, i])
            i += 1
    while len(singles) >= 2:
        a = singles.pop(0)
        b = singles.pop(0)
        pairs.append((a, b, 0.0))
    return pairs, singles


def build_type2(pair: SubspacePair, xi: int) -> FrameTypeII:
    """Frame satisfying the canonical-angle relations for the operator J_xi (0-based xi)."""
    m, k = pair.m, pair.k
    if k > m:
        raise HypothesisViolation(f"type (II) frame needs k <= m (got k={k}, m={m})")
    J = pair.ambient.J[xi]
    T, Nb = pair.tangent, pair.normal
    f = Nb.T @ J @ Nb
    P = T.T @ J @ T
    t = T.T @ J @ Nb
    pairs, singles = _skew_blocks(f)
    pairs.sort(key=lambda p: (p[2], -p[2]))

    ncols, tcols, taus, nus = [], [], [], []
    complex_slots = []
    for a, b, nu in pairs:
        nu = min(1.0, nu)
        tau = float(np.sqrt(max(0.0, 1.0 - nu * nu)))
        ncols += [a, b]
        taus.append(tau)
        nus.append(nu)
        if tau < TAU_ZERO:
            tcols += [None, None]
            complex_slots.append(len(tcols) - 2)
        else:
            ta, tb = t @ a, t @ b
            tcols += [ta / np.linalg.norm(ta), tb / np.linalg.norm(tb)]
    if singles:
        n_last = singles[0]
        ncols.append(n_last)
        tl = t @ n_last
        tcols.append(tl / np.linalg.norm(tl))
        taus.append(1.0)
        nus.append(0.0)

    def _complement(cols):
        U = np.array([c for c in cols if c is not None]).T
        if U.size == 0:
            return np.eye(m)
        return null_space(U.T)

    # complex pairs: e_{2r} = -J e_{2r-1}
    for slot in complex_slots:
        V = _complement(tcols)
        x = V[:, 0]
        y = -(P @ x)
        y = y - (y @ x) * x
        tcols[slot] = x
        tcols[slot + 1] = y / np.linalg.norm(y)
    rest = []
    while len(tcols) + len(rest) < m:
        V = _complement(tcols + rest)
        x = V[:, 0]
        y = P @ x
        y = y - (y @ x) * x
        rest += [x, y / np.linalg.norm(y)]
    tan_coords = np.array(tcols + rest).T
    nor_coords = np.array(ncols).T
    return FrameTypeII(xi, T @ tan_coords, Nb @ nor_coords, np.array(taus), np.array(nus))


def type2_residuals(frame: FrameTypeII, J_all: np.ndarray) -> dict:
    """Max residuals of the defining relations and of the derived relations."""
    J = J_all[frame.xi]
    e_t, e_n = frame.tangent, frame.normal
    m, k = e_t.shape[1], e_n.shape[1]
    r33 = r34 = r_odd = r_rest = 0.0
    for r in range(k // 2):
        tau, nu = frame.tau[r], frame.nu[r]
        a, b = e_n[:, 2 * r], e_n[:, 2 * r + 1]
        x, y = e_t[:, 2 * r], e_t[:, 2 * r + 1]
        r33 = max(r33, np.max(np.abs(J @ a - tau * x - nu * b)), np.max(np.abs(J @ b - tau * y + nu * a)))
        r34 = max(r34, np.max(np.abs(J @ x + nu * y + tau * a)), np.max(np.abs(J @ y - nu * x + tau * b)))
    if k % 2:
        r_odd = float(np.max(np.abs(J @ e_n[:, k - 1] - e_t[:, k - 1])))
    for j in range(k, m - 1, 2):
        r_rest = max(r_rest, np.max(np.abs(J @ e_t[:, j] - e_t[:, j + 1])))
    E = np.hstack([e_t, e_n])
    ortho = float(np.max(np.abs(E.T @ E - np.eye(E.shape[1]))))
    angles = float(np.max(np.abs(frame.tau ** 2 + frame.nu ** 2 - 1.0)))
    return {"angle_relations": float(r33), "derived_relations": float(r34), "odd": r_odd, "rest": float(r_rest),
            "orthonormal": ortho, "angles": angles}


# split operators

@dataclass(frozen=True)
class SplitOperators:
    P: np.ndarray = field(repr=False)
    F: np.ndarray = field(repr=False)
    t: np.ndarray = field(repr=False)
    f: np.ndarray = field(repr=False)
    omega: np.ndarray = field(repr=False)
    c: float
    d: int

    @property
    def P_norm2(self):
        return np.sum(self.P ** 2, axis=(1, 2))

    @property
    def F_norm2(self):
        return np.sum(self.F ** 2, axis=(1, 2))

    @property
    def t_norm2(self):
        return np.sum(self.t ** 2, axis=(1, 2))

    @property
    def FP_norm2(self):
        return np.sum((self.F @ self.P) ** 2, axis=(1, 2))

    @property
    def omega_norm2(self) -> float:
        return float(np.sum(self.omega ** 2))

    @property
    def omega_bound(self) -> float:
        """Right-hand side 9(d-1)c^2 sum ||F P||^2."""
        return 9.0 * (self.d - 1) * self.c ** 2 * float(np.sum(self.FP_norm2))

    def angle_margins(self) -> tuple[np.ndarray, np.ndarray]:
        """Per xi: ||P||^2||F||^2 - m||FP||^2 and the proof form with ||t||."""
        m = self.P.shape[1]
        return (self.P_norm2 * self.F_norm2 - m * self.FP_norm2,
                self.P_norm2 * self.t_norm2 - m * self.FP_norm2)

    def reconstruction_error(self, pair: SubspacePair) -> float:
        E = pair.frame
        m = pair.m
        blocks = np.block([[self.P, self.t], [self.F, self.f]])
        Jrec = np.einsum("ia,xab,jb->xij", E, blocks, E)
        return float(np.max(np.abs(Jrec - pair.ambient.J)))


def split_operators(pair: SubspacePair) -> SplitOperators:
    space = pair.ambient.space
    J = pair.ambient.J
    T, Nb = pair.tangent, pair.normal
    P = np.einsum("ia,xij,jb->xab", T, J, T)
    F = np.einsum("ia,xij,jb->xab", Nb, J, T)
    t = np.einsum("ia,xij,jb->xab", T, J, Nb)
    f = np.einsum("ia,xij,jb->xab", Nb, J, Nb)
    R = curvature_components(space, J, Nb, T, T, T)
    omega = np.einsum("ajji->ai", R)
    return SplitOperators(P, F, t, f, omega, space.c, space.d)


def synthetic_angle_norms(tau: np.ndarray, m: int, k: int):
    """Closed forms for ||P||^2, ||F||^2 (= ||t||^2) and ||FP||^2 from canonical angles.

    ``tau`` holds the [k/2] pair angles; the odd-k vector contributes tau = 1.
    """
    tau = np.asarray(tau, dtype=float)
    nu2 = 1.0 - tau ** 2
    F2 = 2.0 * np.sum(tau ** 2, axis=-1) + (k % 2)
    FP2 = 2.0 * np.sum(tau ** 2 * nu2, axis=-1)
    return m - F2, F2, FP2
