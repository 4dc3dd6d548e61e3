"""Rank-one symmetric spaces as pointwise curvature algebra.

Tangent vectors live in R^N with the standard inner product, N = d*n.
Structure operators are stored as matrices with ``J[i, j] = <e_i, J e_j>``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FAMILY_DIM = {"C": 2, "H": 4, "O": 8}
_FAMILY_ALIASES = {
    "CP": ("C", 1), "CH": ("C", -1),
    "HP": ("H", 1), "HH": ("H", -1),
    "OP": ("O", 1), "OH": ("O", -1),
}
PLANE_TOL = 1e-12


@dataclass(frozen=True)
class SpaceSpec:
    family: str
    sign: int
    n: int
    c: float = 1.0

    @property
    def d(self) -> int:
        return FAMILY_DIM[self.family]

    @property
    def real_dim(self) -> int:
        return self.d * self.n

    @property
    def einstein(self) -> float:
        return self.sign * self.c * (self.d * self.n + 3 * self.d - 4)

    @property
    def label(self) -> str:
        return f"{self.family}{'P' if self.sign > 0 else 'H'}{self.n}"

    def with_c(self, c: float) -> "SpaceSpec":
        return make_space(self.family, self.sign, self.n, c)

    def as_dict(self) -> dict:
        return {"family": self.family, "sign": self.sign, "n": self.n, "c": self.c}


def make_space(family: str, curvature_sign: int, n: int, c: float = 1.0) -> SpaceSpec:
    """Validate and build a :class:`SpaceSpec`."""
    family = str(family).upper()
    if family not in FAMILY_DIM:
        raise ValueError(f"unknown family {family!r}; expected one of C, H, O")
    if curvature_sign not in (1, -1):
        raise ValueError("curvature_sign must be +1 or -1")
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    if family == "O" and n != 2:
        raise ValueError("the octonionic family exists only for n = 2")
    if not np.isfinite(c) or c <= 0:
        raise ValueError("c must be positive")
    return SpaceSpec(family, int(curvature_sign), int(n), float(c))


def parse_family(token: str, sign: int | None = None) -> tuple[str, int]:
    """Accept ``CP``/``CH``/... or a bare ``C``/``H``/``O`` plus an explicit sign."""
    tok = token.strip().upper()
    if tok in _FAMILY_ALIASES:
        fam, s = _FAMILY_ALIASES[tok]
        if sign is not None and sign != s:
            raise ValueError(f"family {token!r} conflicts with sign {sign:+d}")
        return fam, s
    if tok in FAMILY_DIM:
        return tok, 1 if sign is None else sign
    raise ValueError(f"unknown family {token!r}")


# quaternion and octonion multiplication

def qmul(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    a1, b1, c1, d1 = p
    a2, b2, c2, d2 = q
    return np.array([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 - b1 * d2 + c1 * a2 + d1 * b2,
        a1 * d2 + b1 * c2 - c1 * b2 + d1 * a2,
    ])


def qconj(q: np.ndarray) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def omul(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Cayley-Dickson product (a,b)(c,d) = (ac - conj(d) b, d a + b conj(c))."""
    a, b = x[:4], x[4:]
    c, d = y[:4], y[4:]
    return np.concatenate([qmul(a, c) - qmul(qconj(d), b), qmul(d, a) + qmul(b, qconj(c))])


def quaternion_right_units() -> np.ndarray:
    """Matrices of q -> q i, q -> q j, q -> q k on R^4 = span(1, i, j, k)."""
    units = np.eye(4)[1:]
    out = np.zeros((3, 4, 4))
    for u, e in enumerate(units):
        for col in range(4):
            out[u, :, col] = qmul(np.eye(4)[col], e)
    return out


def octonion_left_units() -> np.ndarray:
    """Matrices of x -> e_a x for the seven imaginary octonion units."""
    out = np.zeros((7, 8, 8))
    for a in range(1, 8):
        ea = np.eye(8)[a]
        for col in range(8):
            out[a - 1, :, col] = omul(ea, np.eye(8)[col])
    return out


def structure_operators(family: str, n: int) -> np.ndarray:
    if family == "C":
        j = np.array([[0.0, -1.0], [1.0, 0.0]])
        return np.kron(np.eye(n), j)[None]
    if family == "H":
        return np.stack([np.kron(np.eye(n), r) for r in quaternion_right_units()])
    return np.stack([np.kron(np.eye(n), l) for l in octonion_left_units()])


@dataclass(frozen=True)
class PointAlgebra:
    """Tangent space model at one point: orthonormal R^N plus the operators J_xi."""

    space: SpaceSpec
    J: np.ndarray = field(repr=False)
    convention: str = ""

    @property
    def dim(self) -> int:
        return self.J.shape[1]

    @property
    def metric(self) -> np.ndarray:
        return np.eye(self.dim)

    def inner(self, X, Y):
        return np.einsum("...i,...i->...", X, Y)

    def regauged(self, rotation: np.ndarray | None = None, basis: np.ndarray | None = None) -> "PointAlgebra":
        """New gauge: mix the J_xi by an SO(d-1) rotation, or change the orthonormal basis."""
        J = self.J
        if rotation is not None:
            J = np.einsum("xy,yab->xab", rotation, J)
        if basis is not None:
            J = np.einsum("ai,xab,bj->xij", basis, J, basis)
        return PointAlgebra(self.space, J, self.convention)


def point_algebra(space: SpaceSpec) -> PointAlgebra:
    conv = {
        "C": "J1 = multiplication by i",
        "H": "J_xi = right multiplication by i, j, k; J1 J2 = -J3",
        "O": "J_xi = left multiplication by e_1..e_7 (Clifford relations)",
    }[space.family]
    return PointAlgebra(space, structure_operators(space.family, space.n), conv)


def _check_dims(pa: PointAlgebra, *vecs):
    for v in vecs:
        if np.shape(v)[-1] != pa.dim:
            raise ValueError(f"vector of length {np.shape(v)[-1]} in a {pa.dim}-dimensional algebra")


def curvature(space: SpaceSpec, pa: PointAlgebra, X, Y, Z, W):
    """R(X, Y, Z, W); leading batch axes broadcast."""
    _check_dims(pa, X, Y, Z, W)
    X, Y, Z, W = (np.asarray(v, dtype=float) for v in (X, Y, Z, W))
    ip = lambda a, b: np.einsum("...i,...i->...", a, b)
    jp = lambda a, b: np.einsum("...i,xij,...j->x...", a, pa.J, b)
    out = ip(Y, Z) * ip(X, W) - ip(X, Z) * ip(Y, W)
    out = out + np.sum(jp(Y, Z) * jp(X, W) - jp(X, Z) * jp(Y, W) - 2.0 * jp(X, Y) * jp(Z, W), axis=0)
    return space.sign * space.c * out


def _outer(P: np.ndarray, Q: np.ndarray, order: str) -> np.ndarray:
    """sum_x P[..., x, p, q] Q[..., x, r, s] rearranged to ``order`` (a permutation of "pqrs") via one matmul."""
    lead = P.shape[:-3]
    x, p, q = P.shape[-3:]
    r, s = Q.shape[-2:]
    out = np.swapaxes(P.reshape(lead + (x, p * q)), -1, -2) @ Q.reshape(lead + (x, r * s))
    out = out.reshape(lead + (p, q, r, s))
    n = len(lead)
    return np.transpose(out, tuple(range(n)) + tuple(n + "pqrs".index(ch) for ch in order))


def curvature_components(space: SpaceSpec, J: np.ndarray, A, B, C, D) -> np.ndarray:
    """Components R(a, b, c, d) for columns of A, B, C, D (shape (..., N, *))."""
    g = lambda P, Q: (np.swapaxes(P, -1, -2) @ Q)[..., None, :, :]
    jg = lambda P, Q: np.swapaxes(P, -1, -2)[..., None, :, :] @ (J @ Q[..., None, :, :])
    # labels: first factor (p, q), second factor (r, s); ``order`` lists them in slots a, b, c, d
    out = _outer(g(B, C), g(A, D), "rpqs") - _outer(g(A, C), g(B, D), "prqs")
    out = out + _outer(jg(B, C), jg(A, D), "rpqs")
    out = out - _outer(jg(A, C), jg(B, D), "prqs")
    out = out - 2.0 * _outer(jg(A, B), jg(C, D), "pqrs")
    return space.sign * space.c * out


def curvature_trace(space: SpaceSpec, J: np.ndarray, A, B, D) -> np.ndarray:
    """sum_j R(a, b_j, b_j, d) over the columns b_j of B, for columns of A and D (shape (..., N, *))."""
    g = lambda P, Q: np.swapaxes(P, -1, -2) @ Q
    jg = lambda P, Q: np.swapaxes(P, -1, -2)[..., None, :, :] @ (J @ Q[..., None, :, :])
    gBB = np.trace(g(B, B), axis1=-2, axis2=-1)
    jBB = np.trace(jg(B, B), axis1=-2, axis2=-1)
    jAB, jBD = jg(A, B), jg(B, D)
    out = gBB[..., None, None] * g(A, D) - g(A, B) @ g(B, D)
    out = out + np.sum(jBB[..., None, None] * jg(A, D), axis=-3) - 3.0 * np.sum(jAB @ jBD, axis=-3)
    return space.sign * space.c * out


def curvature_tensor(space: SpaceSpec, pa: PointAlgebra, basis: np.ndarray | None = None) -> np.ndarray:
    E = np.eye(pa.dim) if basis is None else basis
    return curvature_components(space, pa.J, E, E, E, E)


def sectional_curvature(space: SpaceSpec, pa: PointAlgebra, X, Y) -> float:
    _check_dims(pa, X, Y)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    area2 = (X @ X) * (Y @ Y) - (X @ Y) ** 2
    if area2 < PLANE_TOL ** 2:
        raise ValueError("degenerate plane")
    x = X / np.linalg.norm(X)
    y = Y - (Y @ x) * x
    y = y / np.linalg.norm(y)
    return float(curvature(space, pa, x, y, y, x))


def ricci_check(space: SpaceSpec, pa: PointAlgebra, X) -> float:
    """Ric(X, X) summed over the standard orthonormal basis."""
    _check_dims(pa, X)
    X = np.asarray(X, dtype=float)
    if abs(X @ X - 1.0) > 1e-10:
        raise ValueError("ricci_check expects a unit vector")
    E = np.eye(pa.dim)
    Xb = np.broadcast_to(X, E.shape)
    return float(np.sum(curvature(space, pa, Xb, E, E, Xb)))
