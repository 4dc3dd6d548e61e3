"""Second fundamental form scalars, reaction terms and pinching functionals.

Shape tensors are arrays ``h[alpha, i, j]`` in orthonormal tangent and
normal frames; H^alpha = trace h^alpha.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .ambient import SpaceSpec, curvature_components
from .frames import SubspacePair, householder_completion
from .kernels import quartic_terms, reaction_parts

SYM_TOL = 1e-12


@dataclass(frozen=True)
class ShapeData:
    h: np.ndarray = field(repr=False)
    H: np.ndarray
    h0: np.ndarray = field(repr=False)
    norm_h2: float
    norm_H2: float
    norm_h02: float
    norm_h01_2: float | None = None
    norm_h0minus_2: float | None = None

    @property
    def m(self) -> int:
        return self.h.shape[1]

    @property
    def k(self) -> int:
        return self.h.shape[0]


def _as_shape_array(h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.ndim == 2:
        h = h[None]
    if h.ndim != 3 or h.shape[1] != h.shape[2]:
        raise ValueError("h must have shape (k, m, m)")
    scale = max(1.0, float(np.max(np.abs(h))))
    if np.max(np.abs(h - np.swapaxes(h, 1, 2))) > SYM_TOL * scale:
        raise ValueError("h is not symmetric in its tangent indices")
    return h


def type1_split(h: np.ndarray):
    """Rotate normal indices so the first points along H; returns (h', |H|)."""
    H = np.einsum("aii->a", h)
    nH = float(np.linalg.norm(H))
    if nH <= 1e-12:
        return None, 0.0
    U = householder_completion(H / nH)
    return np.einsum("ba,bij->aij", U, h), nH


def derive_scalars(h, metric=None) -> ShapeData:
    """All norms and splittings of h; ``metric`` (m x m Gram matrix) converts to an orthonormal frame."""
    h = _as_shape_array(h)
    m = h.shape[1]
    if metric is not None:
        L = np.linalg.cholesky(np.asarray(metric, dtype=float))
        Li = np.linalg.inv(L)
        h = np.einsum("ip,apq,jq->aij", Li, h, Li)
    H = np.einsum("aii->a", h)
    I = np.eye(m)
    h0 = h - H[:, None, None] * I / m
    nh2 = float(np.sum(h ** 2))
    nH2 = float(H @ H)
    nh02 = float(np.sum(h0 ** 2))
    n1 = nm = None
    hr, nH = type1_split(h)
    if hr is not None:
        h01 = hr[0] - nH * I / m
        n1 = float(np.sum(h01 ** 2))
        nm = float(np.sum(hr[1:] ** 2))
    return ShapeData(h, H, h0, nh2, nH2, nh02, n1, nm)


def hypersurface_traceless_norm(lam) -> float:
    """(1/m) sum_{i<j} (lambda_i - lambda_j)^2."""
    lam = np.asarray(lam, dtype=float)
    m = lam.shape[0]
    diff = lam[:, None] - lam[None, :]
    return float(np.sum(np.triu(diff, 1) ** 2) / m)


def r1_r2(shape: ShapeData, check: bool = True) -> tuple[float, float]:
    """R1 and R2 from their definitions; R2 is cross-checked against the type (I) split."""
    R1, R2, _ = quartic_terms(shape.h[None])[0]
    if check:
        if shape.norm_h01_2 is None:
            alt = 0.0
        else:
            alt = shape.norm_h01_2 * shape.norm_H2 + shape.norm_H2 ** 2 / shape.m
        if abs(alt - R2) > 1e-10 * max(1.0, abs(R2)):
            raise ArithmeticError(f"R2 mismatch: {R2} vs split form {alt}")
    return float(R1), float(R2)


def z_term(shape: ShapeData) -> float:
    return float(quartic_terms(shape.h[None])[0, 2])


# pinching constants

def b_constant(space: SpaceSpec, m: int, k: int) -> float:
    c, d = space.c, space.d
    if space.sign > 0:
        return 2.0 * c if k == 1 else (m - 4 * (d - 1) * k - 3) * c / m
    return -8.0 * c if k == 1 else -(8 * m + 4 * (d - 1) * k + 3) * c / m


def alpha_constant(space: SpaceSpec, m: int, k: int, eps: float) -> float:
    c, d, rbar = space.c, space.d, space.einstein
    if k == 1:
        if space.sign > 0:
            return 2 * c / ((m - 1 + eps) * (rbar + 2 * c * (1 - eps)))
        return -8 * c / ((m - 1 + eps) * (rbar - 8 * c * (1 + eps)))
    return ((11 - 2 * d) * m - 19) / (9 * m * (m + 2))


@dataclass(frozen=True)
class PinchConstants:
    space: SpaceSpec
    m: int
    k: int
    eps: float
    sigma: float
    a: float
    b: float
    a_eps: float
    b_eps: float
    alpha: float
    beta: float
    named: dict = field(default_factory=dict, repr=False)

    @property
    def alpha_defined(self) -> bool:
        return self.alpha > 0

    def W(self, norm_H2):
        return self.alpha * norm_H2 + self.beta


CONSTANT_LEDGER = {
    "C1": "k=1: 3/(m+2) - 1/m - alpha; k>=2: 1/(9m(m+2))",
    "C4": "k>=2: ((11-2d)m-18)/(9m(m+2))",
    "C7": "P family: min(1/(2 alpha (m-1)(m-1+eps)), 1/2); H family: 1/(2 alpha (m-1)(m-1+eps))",
    "C13": "C12/C4 + 1 - m(sign-1)(7m+4(d-1)k)c",
    "C14": "-(1/2)(C12/C4 + 1)(sign-1)(7m+4(d-1)k)c",
    "C2": None, "C3": None, "C5": None, "C6": None, "C8": None, "C9": None,
    "C10": None, "C11": None, "C12": None, "C15": None, "C16": None,
}


def pinch_constants(space: SpaceSpec, m: int, k: int, eps: float = 0.0, sigma: float = 0.0,
                    C12: float | None = None) -> PinchConstants:
    if m < 2 or k < 1 or m + k != space.real_dim:
        raise ValueError(f"dimensions m={m}, k={k} incompatible with {space.label}")
    if not 0.0 <= eps < 1.0:
        raise ValueError("eps must lie in [0, 1)")
    if not 0.0 <= sigma < 0.25:
        raise ValueError("sigma must lie in [0, 1/4)")
    b = b_constant(space, m, k)
    b_eps = (1 - eps) * b if space.sign > 0 else (1 + eps) * b
    alpha = alpha_constant(space, m, k, eps)
    d, c = space.d, space.c
    named: dict = {}
    if k == 1:
        named["C1"] = 3 / (m + 2) - 1 / m - alpha
    else:
        named["C1"] = 1 / (9 * m * (m + 2))
        named["C4"] = ((11 - 2 * d) * m - 18) / (9 * m * (m + 2))
    if k == 1 and alpha > 0:
        base = 1 / (2 * alpha * (m - 1) * (m - 1 + eps))
        named["C7"] = min(base, 0.5) if space.sign > 0 else base
    if C12 is not None and "C4" in named:
        q = C12 / named["C4"] + 1
        named["C12"] = C12
        named["C13"] = q - m * (space.sign - 1) * (7 * m + 4 * (d - 1) * k) * c
        named["C14"] = -0.5 * q * (space.sign - 1) * (7 * m + 4 * (d - 1) * k) * c
    return PinchConstants(space, m, k, eps, sigma, 1 / (m - 1), b, 1 / (m - 1 + eps), b_eps,
                          alpha, b, named)


@dataclass(frozen=True)
class PinchReport:
    Q0: float
    Q_eps: float
    W: float
    f_sigma: float
    satisfied: bool
    satisfied_eps: bool
    W_positive: bool
    functional_defined: bool
    H2_lower_bound: float | None
    diagnostic: str = ""


def pinch_eval(shape: ShapeData, pc: PinchConstants) -> PinchReport:
    """Condition margins Q0 = |h|^2 - |H|^2/(m-1) - b and Q_eps; (*) holds iff Q0 < 0."""
    if shape.m != pc.m or shape.k != pc.k:
        raise ValueError("shape dimensions differ from the constants")
    Q0 = shape.norm_h2 - pc.a * shape.norm_H2 - pc.b
    Qe = shape.norm_h2 - pc.a_eps * shape.norm_H2 - pc.b_eps
    W = pc.W(shape.norm_H2)
    defined = pc.alpha_defined
    diag = ""
    if not defined:
        diag = "alpha undefined: alpha <= 0 (octonionic family or dimension too small)"
    fs = shape.norm_h02 / W ** (1 - pc.sigma) if (defined and W > 0) else float("nan")
    lower = -pc.b * pc.m * (pc.m - 1) if pc.space.sign < 0 else None
    return PinchReport(Q0, Qe, W, fs, Q0 < 0, Qe < 0, W > 0, defined, lower, diag)


def g_functional(shape: ShapeData, C12: float, C4: float) -> float:
    return shape.norm_H2 * shape.norm_h02 + 0.5 * (C12 / C4 + 1) * shape.norm_h02


def f_functional(shape: ShapeData, grad_H2: float, C4: float, C5: float, C12: float, eta: float) -> float:
    return grad_H2 + (C5 + 1) * g_functional(shape, C12, C4) / C4 - eta * shape.norm_H2 ** 2


def decay_ratio(shape: ShapeData, sigma: float) -> float:
    return shape.norm_h02 / (shape.norm_H2 + 1) ** (1 - sigma)


# reaction terms

@dataclass(frozen=True)
class ReactionTerms:
    R1: float
    R2: float
    P_I: float
    P_II: float
    P_III: float
    Z: float
    a: float

    @property
    def P(self) -> float:
        return self.P_I + self.P_II + self.P_III

    @property
    def total(self) -> float:
        return 2 * self.R1 - 2 * self.a * self.R2 + self.P


def split_blocks(pair: SubspacePair):
    J = pair.ambient.J
    T, N = pair.tangent, pair.normal
    P = np.einsum("ia,xij,jb->xab", T, J, T)
    t = np.einsum("ia,xij,jb->xab", T, J, N)
    f = np.einsum("ia,xij,jb->xab", N, J, N)
    return P, t, f


def reaction_terms(shape: ShapeData, space: SpaceSpec, pair: SubspacePair, a: float) -> ReactionTerms:
    """Exact curvature contractions; h must be expressed in the bases of ``pair``."""
    if pair.m != shape.m or pair.k != shape.k:
        raise ValueError("frame dimensions differ from the shape")
    P, t, f = split_blocks(pair)
    s = space.sign * space.c
    parts = reaction_parts(shape.h[None], P[None], t[None], f[None], s, a)[0]
    R1, R2, Z = quartic_terms(shape.h[None])[0]
    return ReactionTerms(float(R1), float(R2), float(parts[0]), float(parts[1]), float(parts[2]), float(Z), a)


def reaction_terms_full(h: np.ndarray, space: SpaceSpec, pair: SubspacePair, a: float) -> tuple[float, float, float]:
    """Oracle: P_I, P_II,a, P_III from the full curvature tensor by direct summation."""
    J = pair.ambient.J
    T, N = pair.tangent, pair.normal
    H = np.einsum("aii->a", h)
    Rt = curvature_components(space, J, T, T, T, T)
    PI = 4 * np.einsum("ipqj,apq,aij->", Rt, h, h) - 4 * np.einsum("ljpl,api,aij->", Rt, h, h)
    Rn = curvature_components(space, J, T, N, N, T)
    c = np.einsum("labl->ab", Rn)
    G = np.einsum("aij,bij->ab", h, h) - a * np.outer(H, H)
    PII = 2 * np.sum(c * G)
    Rm = curvature_components(space, J, T, T, N, N)
    PIII = -8 * np.einsum("jpba,api,bij->", Rm, h, h)
    return float(PI), float(PII), float(PIII)


def quartic_bounds(shape: ShapeData, a: float, b: float | None = None):
    """(lhs, rhs1, rhs2) with lhs = 2R1 - 2aR2; rhs2 is None when b is not given."""
    if shape.norm_H2 <= 1e-24:
        raise ValueError("bounds require H != 0")
    R1, R2 = r1_r2(shape, check=False)
    lhs = 2 * R1 - 2 * a * R2
    m = shape.m
    x1 = shape.norm_h01_2
    xm = shape.norm_h0minus_2
    H2 = shape.norm_H2
    rhs1 = (2 * x1 ** 2 - 2 * (a - 2 / m) * x1 * H2 - (2 / m) * (a - 1 / m) * H2 ** 2
            + 8 * x1 * xm + 3 * xm ** 2)
    rhs2 = None
    if b is not None:
        if a * m - 1 <= 0:
            raise ValueError("second bound needs a > 1/m")
        resid = shape.norm_h2 - a * H2 - b
        if abs(resid) > 1e-9 * max(1.0, shape.norm_h2):
            raise ValueError("constraint |h|^2 = a|H|^2 + b does not hold")
        q = m * a - 1
        x = shape.norm_h02
        rhs2 = ((6 - 2 / q) * x * xm - 3 * xm ** 2 + 2 * m * a * b / q * x1
                + 4 * b / q * xm - 2 * b ** 2 / q)
    return lhs, rhs1, rhs2


# gradient lemmas

def codazzi_defect_tensor(space: SpaceSpec, pair: SubspacePair) -> np.ndarray:
    """A[alpha, i, j, l] = -R(e_i, e_j, e_l, e_alpha): required value of T_ijl - T_jil."""
    T, N = pair.tangent, pair.normal
    R = curvature_components(space, pair.ambient.J, T, T, T, N)
    return -np.einsum("ijla->aijl", R)


def sym3(T: np.ndarray) -> np.ndarray:
    """Symmetrize over the last three slots."""
    lead = tuple(range(T.ndim - 3))
    out = np.zeros_like(T)
    for p in itertools.permutations((0, 1, 2)):
        out += np.transpose(T, lead + tuple(len(lead) + q for q in p))
    return out / 6.0


def codazzi_particular(A: np.ndarray) -> np.ndarray:
    """E = (A + A with last two slots swapped)/3, whose defect E_ijl - E_jil equals A."""
    return (A + np.swapaxes(A, -1, -2)) / 3.0


def trace_field(v: np.ndarray, m: int) -> np.ndarray:
    """Fully symmetric G(v)_aijl = d_ij v_al + d_il v_aj + d_jl v_ai."""
    I = np.eye(m)
    return (np.einsum("ij,...al->...aijl", I, v) + np.einsum("il,...aj->...aijl", I, v)
            + np.einsum("jl,...ai->...aijl", I, v))


def gradient_norms(T: np.ndarray) -> tuple[float, float]:
    """(||grad h||^2, ||grad H||^2) for T[a, i, j, l] = (grad_i h)^a_jl."""
    dH = np.einsum("...aijj->...ai", T)
    return np.sum(T ** 2, axis=(-4, -3, -2, -1)), np.sum(dH ** 2, axis=(-2, -1))


def gradient_rhs_eta(nH: float, n_omega: float, m: int, eta: float) -> float:
    return (3 / (m + 2) - eta) * nH - (2 / (m + 2)) * (2 / ((m + 2) * eta) - m / (m - 1)) * n_omega


def gradient_rhs_omega(n_omega: float, m: int, d: int) -> float:
    return 2 * (m + 1) / (9 * (d - 1) ** 2) * n_omega


def gradient_rhs_fp(fp_sum: float, m: int, d: int, c: float) -> float:
    return 2 * (m + 1) * c ** 2 / (d - 1) * fp_sum


def gradient_rhs_H(nH: float, m: int, d: int) -> float:
    return 2 * (10 - d) / (9 * (m + 2)) * nH


def gradient_H_threshold(d: int) -> int:
    return {2: 8, 4: 11, 8: 1}[d]


def omega_coefficient(m: int, d: int) -> float:
    """Coefficient of ||omega||^2 after choosing eta = (d-1)/(3(m+2)); printed closed form."""
    return 2 / (9 * (d - 1) ** 2) * (m + 1 - (d - 1) * (18 * (7 - d) * m - 108) / ((m - 1) * (m + 2)))


def omega_coefficient_raw(m: int, d: int) -> float:
    eta = (d - 1) / (3 * (m + 2))
    return 2 * (m + 1) / (9 * (d - 1) ** 2) - 4 / (m + 2) * (2 / ((m + 2) * eta) - m / (m - 1))


def preservation_gradient_coefficient(m: int, d: int, eps: float) -> float:
    """2(10-d)/(9(m+2)) - 1/(m-1+eps): sign of the gradient term in the k >= 2 preservation argument."""
    return 2 * (10 - d) / (9 * (m + 2)) - 1 / (m - 1 + eps)


def theorem_dimension_ok(space: SpaceSpec, m: int, k: int) -> bool:
    """m >= max(nd/2, 3d/2 + 5) and k >= 2."""
    d, n = space.d, space.n
    return k >= 2 and m + k == d * n and m >= max(n * d / 2, 1.5 * d + 5)
