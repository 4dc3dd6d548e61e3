"""Randomized property campaigns over the shape and frame algebra.

Each :class:`LemmaCase` draws batches of samples from a counter-based seed
``SeedSequence(root, spawn_key=(case_key, chunk))`` and evaluates an
inequality ``lhs <= rhs`` on every sample. Chunks are independent, so a
campaign is reproducible bit for bit regardless of how it is scheduled.
"""
from __future__ import annotations

import dataclasses
import fnmatch
import json
import math
import time
import zlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from .ambient import SpaceSpec, curvature_components, curvature_trace, make_space, structure_operators
from .ambient import point_algebra
from .frames import build_type2, pair_from_frame, synthetic_angle_norms, type2_residuals
from .kernels import quartic_terms, reaction_parts
from .shape import (alpha_constant, codazzi_particular, gradient_H_threshold, omega_coefficient,
                    omega_coefficient_raw, preservation_gradient_coefficient, sym3, trace_field)

CHUNK = 256
DEFAULT_TOL = 1e-9
DEFAULT_SEED = 20240607
SHRINK_STEPS = 40
ETA_GRID = tuple(10.0 ** np.linspace(-3, 0, 7))


@dataclass(frozen=True)
class CaseConfig:
    family: str
    sign: int
    n: int
    m: int

    @property
    def space(self) -> SpaceSpec:
        return make_space(self.family, self.sign, self.n)

    @property
    def k(self) -> int:
        return self.space.real_dim - self.m

    @property
    def label(self) -> str:
        return f"{self.space.label}:m={self.m},k={self.k}"

    def as_dict(self) -> dict:
        return {"family": self.family, "sign": self.sign, "n": self.n, "m": self.m, "k": self.k}


def cfg(family: str, sign: int, n: int, m: int) -> CaseConfig:
    return CaseConfig(family, sign, n, m)


@dataclass(frozen=True)
class LemmaCase:
    id: str
    anchor: str
    group: str
    configs: tuple
    sampler: Callable = field(repr=False)
    evaluate: Callable = field(repr=False)
    complete: Callable | None = field(default=None, repr=False)
    precondition: Callable | None = field(default=None, repr=False)
    stats: Callable | None = field(default=None, repr=False)
    tol: float = DEFAULT_TOL
    homogeneous: bool = False
    strict: bool = False
    gate: bool = True
    needs_k_le_m: bool = False
    max_samples: int | None = None
    shrink_key: str | None = None

    def feasible(self, c: CaseConfig) -> str | None:
        if c.m < 1 or c.k < 1:
            return "empty tangent or normal space"
        if self.needs_k_le_m and c.k > c.m:
            return f"hypothesis k <= m fails (m={c.m}, k={c.k})"
        return None


# batched building blocks

def _space_arrays(c: CaseConfig):
    sp = c.space
    return sp, structure_operators(sp.family, sp.n)


def random_frames(rng: np.random.Generator, B: int, N: int) -> np.ndarray:
    G = rng.standard_normal((B, N, N))
    Q, R = np.linalg.qr(G)
    return Q * np.sign(np.einsum("bii->bi", R))[:, None, :]


def split_batch(J: np.ndarray, T: np.ndarray, Nb: np.ndarray):
    """P, F, t, f for frames (B, N, m) and (B, N, k)."""
    JT = np.matmul(J[None], T[:, None])
    JN = np.matmul(J[None], Nb[:, None])
    Tt = np.swapaxes(T, 1, 2)[:, None]
    Nt = np.swapaxes(Nb, 1, 2)[:, None]
    return Tt @ JT, Nt @ JT, Tt @ JN, Nt @ JN


def random_traceless(rng: np.random.Generator, B: int, k: int, m: int) -> np.ndarray:
    """Unit-norm traceless shapes from a mixture: gaussian, one normal direction, low rank."""
    G = rng.standard_normal((B, k, m, m))
    h = (G + np.swapaxes(G, 2, 3)) / 2
    mode = rng.integers(0, 3, size=B)
    single = mode == 1
    h[single, 1:] = 0.0
    low = mode == 2
    if np.any(low):
        nl = int(np.sum(low))
        u = rng.standard_normal((nl, 2, k))
        v = rng.standard_normal((nl, 2, m))
        h[low] = np.einsum("bra,bri,brj->baij", u, v, v)
    tr = np.einsum("baii->ba", h)
    h -= tr[:, :, None, None] * np.eye(m) / m
    nrm = np.sqrt(np.sum(h ** 2, axis=(1, 2, 3)))
    return h / np.maximum(nrm, 1e-300)[:, None, None, None]


def random_directions(rng: np.random.Generator, B: int, k: int) -> np.ndarray:
    u = rng.standard_normal((B, k))
    aligned = rng.random(B) < 1 / 3
    u[aligned] = 0.0
    u[aligned, 0] = 1.0
    return u / np.linalg.norm(u, axis=1, keepdims=True)


def shape_norms(h: np.ndarray) -> dict:
    """Batched |h|^2, |H|^2, |h0|^2 and the type (I) split |h0_1|^2, |h0_-|^2."""
    m = h.shape[-1]
    H = np.einsum("baii->ba", h)
    H2 = np.sum(H ** 2, axis=1)
    nh2 = np.sum(h ** 2, axis=(1, 2, 3))
    nH = np.sqrt(H2)
    u = H / np.where(nH > 0, nH, 1.0)[:, None]
    hH = np.einsum("ba,baij->bij", u, h)
    hH2 = np.sum(hH ** 2, axis=(1, 2))
    return {"H": H, "H2": H2, "h2": nh2, "h02": nh2 - H2 / m,
            "h01": hH2 - H2 / m, "hminus": nh2 - hH2}


# shape sampling

def _b(sp: SpaceSpec, m: int, k):
    c, d = sp.c, sp.d
    if sp.sign > 0:
        return 2.0 * c if k == 1 else (m - 4 * (d - 1) * k - 3) * c / m
    return -8.0 * c if k == 1 else -(8 * m + 4 * (d - 1) * k + 3) * c / m


def shape_sampler(kind: str, frames: bool = False):
    """Raw draw for ``kind`` in {free, zero, constrained, qeps0, pinched}."""

    def draw(rng, B, c: CaseConfig):
        sp = c.space
        m, k = c.m, c.k
        raw = {"h0": random_traceless(rng, B, k, m),
               "u": random_directions(rng, B, k),
               "n0": 10.0 ** rng.uniform(-2, 3, B),
               "x": 10.0 ** rng.uniform(-2, 2, B)}
        if kind in ("qeps0", "pinched"):
            raw["eps"] = rng.uniform(0.01, 0.9, B)
        if kind == "pinched":
            raw["delta"] = np.where(rng.random(B) < 1 / 3, 0.0, 10.0 ** rng.uniform(-3, 2, B))
        if kind == "free":
            raw["a"] = rng.uniform(-1.0, 2.0, B)
        if kind == "constrained":
            raw["a"] = 1 / m + 10.0 ** rng.uniform(-3, 0.3, B)
        if frames:
            raw["Q"] = random_frames(rng, B, sp.real_dim)
        return raw

    return draw


def complete_shape(kind: str):
    def complete(raw, c: CaseConfig):
        sp = c.space
        m, k = c.m, c.k
        h0 = raw["h0"]
        n0u = np.sum(h0 ** 2, axis=(1, 2, 3))
        s = dict(raw)
        if kind == "zero":
            H2 = np.zeros(len(n0u))
            scale = np.sqrt(raw["n0"])
        elif kind in ("free", "constrained"):
            scale = np.sqrt(raw["n0"])
            H2 = raw["x"] * raw["n0"] * n0u
        else:
            eps = raw["eps"]
            b = _b(sp, m, k)
            b_eps = (1 - eps) * b if sp.sign > 0 else (1 + eps) * b
            a_eps = 1 / (m - 1 + eps)
            delta = raw.get("delta", np.zeros(len(eps)))
            n0 = raw["n0"] * n0u
            if kind == "qeps0":
                # Q_eps = 0 needs |h0|^2 > b_eps
                n0 = np.where(n0 > b_eps, n0, np.abs(b_eps) * (1 + n0))
            scale = np.sqrt(n0 / n0u)
            H2 = np.maximum((n0 - b_eps + delta) / (a_eps - 1 / m), 0.0)
            s.update(b=np.full(len(eps), float(b)), b_eps=b_eps, a_eps=a_eps)
        h0s = h0 * scale[:, None, None, None]
        Hvec = raw["u"] * np.sqrt(H2)[:, None]
        h = h0s + Hvec[:, :, None, None] * np.eye(m) / m
        s["h"] = h
        s.update(shape_norms(h))
        if kind == "constrained":
            s["b"] = s["h2"] - raw["a"] * s["H2"]
        if "Q" in raw:
            J = structure_operators(sp.family, sp.n)
            Q = raw["Q"]
            s["P"], s["F"], s["t"], s["f"] = split_batch(J, Q[:, :, :m], Q[:, :, m:])
        return s

    return complete


def _quartic(s):
    if "_quartic" not in s:
        s["_quartic"] = quartic_terms(s["h"])
    return s["_quartic"]


def _reaction(s, c: CaseConfig, a):
    sp = c.space
    return reaction_parts(s["h"], s["P"], s["t"], s["f"], sp.sign * sp.c, a)


# evaluators (lhs, rhs) meaning lhs <= rhs

def ev_quartic_general(s, c):
    R1, R2 = _quartic(s)[:, 0], _quartic(s)[:, 1]
    a, m, x1, xm, H2 = s["a"], c.m, s["h01"], s["hminus"], s["H2"]
    lhs = 2 * R1 - 2 * a * R2
    rhs = (2 * x1 ** 2 - 2 * (a - 2 / m) * x1 * H2 - (2 / m) * (a - 1 / m) * H2 ** 2
           + 8 * x1 * xm + 3 * xm ** 2)
    return lhs, rhs


def ev_quartic_constrained(s, c):
    R1, R2 = _quartic(s)[:, 0], _quartic(s)[:, 1]
    a, b, m = s["a"], s["b"], c.m
    x, x1, xm = s["h02"], s["h01"], s["hminus"]
    q = m * a - 1
    lhs = 2 * R1 - 2 * a * R2
    rhs = ((6 - 2 / q) * x * xm - 3 * xm ** 2 + 2 * m * a * b / q * x1
           + 4 * b / q * xm - 2 * b ** 2 / q)
    return lhs, rhs


def ev_ll(s, c):
    return 2 * _quartic(s)[:, 0], 3 * s["h2"] ** 2


def pre_H_zero(s, c):
    return s["H2"] <= 1e-20 * np.maximum(1.0, s["h2"])


def pre_H_nonzero(s, c):
    return s["H2"] > 1e-20 * np.maximum(1.0, s["h2"])


def ev_pi_p(s, c):
    PI = _reaction(s, c, 0.0)[:, 0]
    return PI, -4 * c.m * c.space.c * s["h02"]


def ev_pi_h(s, c):
    PI = _reaction(s, c, 0.0)[:, 0]
    return PI, 16 * c.m * c.space.c * s["h02"]


def _P_total(s, c):
    if "_P" not in s:
        s["_P"] = np.sum(_reaction(s, c, s["a_eps"]), axis=1)
    return s["_P"]


def _R_total(s, c):
    R1, R2 = _quartic(s)[:, 0], _quartic(s)[:, 1]
    return 2 * R1 - 2 * s["a_eps"] * R2 + _P_total(s, c)


def ev_reaction_bound_p(s, c):
    d, cc = c.space.d, c.space.c
    return _P_total(s, c), -2 * (c.m - 4 * (d - 1) * c.k - 3) * cc * s["h02"]


def ev_reaction_bound_h(s, c):
    d, cc = c.space.d, c.space.c
    return _P_total(s, c), 2 * (8 * c.m + 4 * (d - 1) * c.k + 3) * cc * s["h02"] - 2 * (c.m + 3) * s["b_eps"] * cc


def ev_reaction_bound_h_corrected(s, c):
    """Same chain with the normal-curvature sum bounded by -(m + 3(d-1))c instead of -(m+3)c."""
    d, cc, m, k = c.space.d, c.space.c, c.m, c.k
    rhs = (16 * m + 6 * (d - 1) + 8 * (d - 1) * k) * cc * s["h02"] - 2 * (m + 3 * (d - 1)) * s["b_eps"] * cc
    return _P_total(s, c), rhs


def ev_reaction_negative(s, c):
    R = _R_total(s, c)
    return R, np.zeros_like(R)


def pre_qeps0(s, c):
    Q = s["h2"] - s["a_eps"] * s["H2"] - s["b_eps"]
    return np.abs(Q) <= 1e-9 * np.maximum(1.0, s["h2"])


def _W(s, c):
    alpha = alpha_constant(c.space, c.m, c.k, s["eps"])
    return alpha * s["H2"] + s["b"]


def _z_ratio(shift):
    def ev(s, c):
        Z = _quartic(s)[:, 2]
        W = _W(s, c)
        rho = (Z + shift * c.m * s["b"] * s["h02"]) / (s["eps"] * s["h02"] * W)
        return np.zeros_like(rho), rho
    return ev


def pre_pinched(s, c):
    Q = s["h2"] - s["a_eps"] * s["H2"] - s["b_eps"]
    ok = Q <= 1e-9 * np.maximum(1.0, s["h2"])
    return ok & (s["h02"] > 1e-12 * np.maximum(1.0, s["h2"])) & (_W(s, c) > 0)


def ev_gauss_sectional(s, c):
    """eps C7 W against the smallest principal sectional curvature (Gauss equation)."""
    sp = c.space
    m = c.m
    h = s["h"][:, 0]
    lam, V = np.linalg.eigh(h)
    Pr = np.einsum("bia,bxij,bjc->bxac", V, s["P"], V)
    Kbar = sp.sign * sp.c * (1 + 3 * np.sum(Pr ** 2, axis=1))
    K = Kbar + lam[:, :, None] * lam[:, None, :]
    K[:, np.arange(m), np.arange(m)] = np.inf
    Kmin = K.reshape(len(lam), -1).min(axis=1)
    eps = s["eps"]
    alpha = alpha_constant(sp, m, 1, eps)
    base = 1 / (2 * alpha * (m - 1) * (m - 1 + eps))
    C7 = np.minimum(base, 0.5) if sp.sign > 0 else base
    return eps * C7 * _W(s, c), Kmin


# frame cases

def frame_sampler(rng, B, c: CaseConfig):
    sp, J = _space_arrays(c)
    Q = random_frames(rng, B, sp.real_dim)
    s = {"Q": Q}
    s["P"], s["F"], s["t"], s["f"] = split_batch(J, Q[:, :, :c.m], Q[:, :, c.m:])
    return s


def _fp_norms(s):
    P2 = np.sum(s["P"] ** 2, axis=(2, 3))
    F2 = np.sum(s["F"] ** 2, axis=(2, 3))
    t2 = np.sum(s["t"] ** 2, axis=(2, 3))
    FP2 = np.sum((s["F"] @ s["P"]) ** 2, axis=(2, 3))
    return P2, F2, t2, FP2


def _worst_over_xi(lhs, rhs):
    i = np.argmin(rhs - lhs, axis=1)
    r = np.arange(len(i))
    return lhs[r, i], rhs[r, i]


def ev_angle_product(s, c):
    P2, F2, t2, FP2 = _fp_norms(s)
    return _worst_over_xi(c.m * FP2, P2 * F2)


def ev_angle_product_t(s, c):
    P2, F2, t2, FP2 = _fp_norms(s)
    return _worst_over_xi(c.m * FP2, P2 * t2)


def synthetic_sampler(rng, B, c: CaseConfig):
    return {"tau": rng.uniform(0.0, 1.0, (B, c.k // 2))}


def ev_angle_synthetic(s, c):
    P2, F2, FP2 = synthetic_angle_norms(s["tau"], c.m, c.k)
    return c.m * FP2, P2 * F2


def ev_omega_fp(s, c):
    sp, J = _space_arrays(c)
    Q = s["Q"]
    T, Nb = Q[:, :, :c.m], Q[:, :, c.m:]
    omega = curvature_trace(sp, J, Nb, T, T)
    FP2 = _fp_norms(s)[3]
    return np.sum(omega ** 2, axis=(1, 2)), 9 * (sp.d - 1) * sp.c ** 2 * np.sum(FP2, axis=1)


def ev_type2(s, c):
    sp = c.space
    pa = point_algebra(sp)
    Q = s["Q"]
    res = np.zeros(len(Q))
    for b in range(len(Q)):
        pair = pair_from_frame(pa, Q[b], c.m)
        worst = 0.0
        for xi in range(pa.J.shape[0]):
            r = type2_residuals(build_type2(pair, xi), pa.J)
            worst = max(worst, r["angle_relations"], r["derived_relations"], r["odd"], r["rest"],
                        r["orthonormal"])
        res[b] = worst
    return res, np.full(len(Q), 1e-10)


# gradient cases (Codazzi-compatible tensors)

def codazzi_sampler(rng, B, c: CaseConfig):
    sp, J = _space_arrays(c)
    m, k = c.m, c.k
    Q = random_frames(rng, B, sp.real_dim)
    T, Nb = Q[:, :, :m], Q[:, :, m:]
    R = curvature_components(sp, J, T, T, T, Nb)
    A = -np.einsum("bijla->baijl", R)
    E = codazzi_particular(A)
    SE = sym3(E)
    mode = rng.integers(0, 3, size=B)
    Tn = E - SE
    i0, i1 = np.flatnonzero(mode == 0), np.flatnonzero(mode == 1)
    sigma = 10.0 ** rng.uniform(-2, 1, len(i0))
    Tn[i0] += sigma[:, None, None, None, None] * sym3(rng.standard_normal((len(i0), k, m, m, m)))
    u = rng.uniform(0.0, 2.0, len(i1))
    v = rng.standard_normal((len(i1), k, m)) * 10.0 ** rng.uniform(-2, 0.5, len(i1))[:, None, None]
    Tn[i1] = E[i1] - u[:, None, None, None, None] * SE[i1] + trace_field(v, m)
    s = {"Q": Q, "T": Tn, "A": A}
    s["P"], s["F"], s["t"], s["f"] = split_batch(J, T, Nb)
    s["omega"] = np.einsum("bijja->bai", R)
    s["grad_h2"] = np.sum(Tn ** 2, axis=(1, 2, 3, 4))
    s["grad_H2"] = np.sum(np.einsum("baijj->bai", Tn) ** 2, axis=(1, 2))
    s["omega2"] = np.sum(s["omega"] ** 2, axis=(1, 2))
    return s


def pre_codazzi(s, c):
    T = s["T"]
    defect = T - np.swapaxes(T, 2, 3) - s["A"]
    sym = T - np.swapaxes(T, 3, 4)
    scale = np.maximum(1.0, np.max(np.abs(T), axis=(1, 2, 3, 4)))
    return (np.max(np.abs(defect), axis=(1, 2, 3, 4)) <= 1e-10 * scale) & \
        (np.max(np.abs(sym), axis=(1, 2, 3, 4)) <= 1e-12 * scale)


def ev_gradient_eta(s, c):
    m = c.m
    best_l = best_r = None
    for eta in ETA_GRID:
        rhs = (3 / (m + 2) - eta) * s["grad_H2"] - (2 / (m + 2)) * (2 / ((m + 2) * eta) - m / (m - 1)) * s["omega2"]
        if best_r is None:
            best_r = rhs
        else:
            best_r = np.maximum(best_r, rhs)
    return best_r, s["grad_h2"]


def ev_gradient_omega(s, c):
    d = c.space.d
    return 2 * (c.m + 1) / (9 * (d - 1) ** 2) * s["omega2"], s["grad_h2"]


def ev_gradient_fp(s, c):
    sp = c.space
    FP2 = np.sum(_fp_norms(s)[3], axis=1)
    return 2 * (c.m + 1) * sp.c ** 2 / (sp.d - 1) * FP2, s["grad_h2"]


def ev_gradient_H(s, c):
    d = c.space.d
    return 2 * (10 - d) / (9 * (c.m + 2)) * s["grad_H2"], s["grad_h2"]


# stats hooks

def stat_min_rhs(name):
    def stat(lhs, rhs, s, c):
        return {name: float(np.min(rhs))}
    return stat


# configuration grids

FRAME_CONFIGS = (cfg("C", 1, 2, 2), cfg("C", -1, 3, 3), cfg("C", 1, 3, 4), cfg("C", -1, 4, 5),
                 cfg("H", 1, 2, 4), cfg("H", -1, 2, 5), cfg("H", 1, 3, 6), cfg("H", -1, 3, 8),
                 cfg("O", 1, 2, 8), cfg("O", -1, 2, 10), cfg("O", 1, 2, 13))
SHAPE_DIMS = tuple(cfg("C", 1, n, m) for n, m in ((3, 5), (3, 4), (4, 6), (4, 7), (5, 8), (5, 9), (6, 10),
                                                    (6, 11), (7, 12), (7, 10)))
K1_P = (cfg("C", 1, 3, 5), cfg("C", 1, 4, 7), cfg("H", 1, 2, 7), cfg("H", 1, 3, 11), cfg("O", 1, 2, 15))
K1_H = (cfg("C", -1, 2, 3), cfg("C", -1, 3, 5), cfg("H", -1, 2, 7), cfg("H", -1, 3, 11), cfg("O", -1, 2, 15))
_THEOREM_DIMS = ((("C", 5), 8), (("C", 6), 8), (("C", 6), 10), (("C", 7), 9), (("C", 7), 12),
                 (("H", 4), 11), (("H", 4), 13), (("H", 5), 12), (("H", 5), 18))
K2_P = tuple(cfg(f, 1, n, m) for (f, n), m in _THEOREM_DIMS)
K2_H = tuple(cfg(f, -1, n, m) for (f, n), m in _THEOREM_DIMS)
GRADIENT_CONFIGS = (cfg("C", 1, 2, 2), cfg("C", -1, 3, 3), cfg("C", 1, 3, 4), cfg("H", -1, 2, 4),
                    cfg("H", 1, 2, 5), cfg("H", -1, 3, 6), cfg("O", 1, 2, 8), cfg("O", -1, 2, 10))
GRADIENT_H_CONFIGS = (cfg("C", 1, 5, 8), cfg("C", -1, 5, 9), cfg("C", 1, 6, 8), cfg("C", -1, 6, 10),
                      cfg("H", 1, 3, 11), cfg("H", -1, 4, 11), cfg("H", 1, 4, 12), cfg("H", -1, 4, 13),
                      cfg("O", 1, 2, 8), cfg("O", -1, 2, 12), cfg("O", 1, 2, 14))


def _shape_case(id, anchor, group, configs, kind, evaluate, frames=False, **kw):
    return LemmaCase(id, anchor, group, configs, shape_sampler(kind, frames), evaluate,
                     complete=complete_shape(kind), shrink_key="h0", **kw)


def default_registry() -> dict:
    cases = [
        LemmaCase("angle-product", "|P|^2 |F|^2 >= m |F P|^2", "frames", FRAME_CONFIGS,
                  frame_sampler, ev_angle_product, needs_k_le_m=True, homogeneous=True),
        LemmaCase("angle-product-t", "|P|^2 |t|^2 >= m |F P|^2", "frames", FRAME_CONFIGS,
                  frame_sampler, ev_angle_product_t, needs_k_le_m=True, homogeneous=True),
        LemmaCase("angle-product-synthetic", "|P|^2 |F|^2 >= m |F P|^2 from canonical angles", "frames",
                  FRAME_CONFIGS, synthetic_sampler, ev_angle_synthetic, needs_k_le_m=True, homogeneous=True),
        LemmaCase("omega-fp-bound", "|omega|^2 <= 9(d-1)c^2 sum |F P|^2", "frames", FRAME_CONFIGS,
                  frame_sampler, ev_omega_fp, homogeneous=True),
        LemmaCase("type2-relations", "canonical-angle frame relations, residual <= 1e-10", "frames",
                  FRAME_CONFIGS, frame_sampler, ev_type2, needs_k_le_m=True, tol=0.0, max_samples=2000),
        _shape_case("quartic-general", "2R1 - 2aR2 <= first quartic bound (H != 0)", "quartic", SHAPE_DIMS,
                    "free", ev_quartic_general, precondition=pre_H_nonzero, homogeneous=True),
        _shape_case("quartic-constrained", "2R1 - 2aR2 <= constrained bound, |h|^2 = a|H|^2 + b", "quartic",
                    SHAPE_DIMS, "constrained", ev_quartic_constrained, precondition=pre_H_nonzero),
        _shape_case("ll-bound", "2R1 <= 3|h|^4 at H = 0", "quartic", SHAPE_DIMS, "zero", ev_ll,
                    precondition=pre_H_zero, homogeneous=True),
        _shape_case("hypersurface-pi-p", "P_I <= -4mc|h0|^2 (hypersurface, positive sign)", "reaction",
                    K1_P, "free", ev_pi_p, frames=True, homogeneous=True),
        _shape_case("hypersurface-pi-h", "P_I <= 16mc|h0|^2 (hypersurface, negative sign)", "reaction",
                    K1_H, "free", ev_pi_h, frames=True, homogeneous=True),
        _shape_case("reaction-bound-p", "P <= -2(m-4(d-1)k-3)c|h0|^2 at Q_eps = 0", "reaction", K2_P,
                    "qeps0", ev_reaction_bound_p, frames=True, precondition=pre_qeps0),
        _shape_case("reaction-negative-p", "R < 0 at Q_eps = 0 (positive sign, k >= 2)", "reaction", K2_P,
                    "qeps0", ev_reaction_negative, frames=True, precondition=pre_qeps0, strict=True),
        _shape_case("reaction-bound-h", "P <= 2(8m+4(d-1)k+3)c|h0|^2 - 2(m+3)b_eps c at Q_eps = 0", "reaction",
                    K2_H, "qeps0", ev_reaction_bound_h, frames=True, precondition=pre_qeps0),
        _shape_case("reaction-bound-h-corrected",
                    "P <= (16m+6(d-1)+8(d-1)k)c|h0|^2 - 2(m+3(d-1))b_eps c at Q_eps = 0", "reaction", K2_H,
                    "qeps0", ev_reaction_bound_h_corrected, frames=True, precondition=pre_qeps0, gate=False),
        _shape_case("reaction-negative-h", "R < 0 at Q_eps = 0 (negative sign, k >= 2)", "reaction", K2_H,
                    "qeps0", ev_reaction_negative, frames=True, precondition=pre_qeps0, strict=True),
        _shape_case("z-bound-p", "Z + 2mb|h0|^2 >= rho eps |h0|^2 W, rho > 0", "z", K1_P + K2_P, "pinched",
                    _z_ratio(2.0), precondition=pre_pinched, strict=True, stats=stat_min_rhs("rho_hat")),
        _shape_case("z-bound-p-proof", "Z + (mb/2)|h0|^2 >= rho eps |h0|^2 W, rho > 0", "z", K2_P, "pinched",
                    _z_ratio(0.5), precondition=pre_pinched, strict=True, gate=False,
                    stats=stat_min_rhs("rho_hat")),
        _shape_case("z-bound-h", "Z - (mb/2)|h0|^2 >= rho eps |h0|^2 W, rho > 0", "z", K1_H + K2_H, "pinched",
                    _z_ratio(-0.5), precondition=pre_pinched, strict=True, stats=stat_min_rhs("rho_hat")),
        _shape_case("gauss-sectional", "K > eps C7 W (hypersurfaces, principal planes)", "z", K1_P + K1_H,
                    "pinched", ev_gauss_sectional, frames=True, precondition=pre_pinched, strict=True),
        LemmaCase("gradient-eta", "|grad h|^2 >= (3/(m+2)-eta)|grad H|^2 - ... |omega|^2, all eta", "gradient",
                  GRADIENT_CONFIGS, codazzi_sampler, ev_gradient_eta, precondition=pre_codazzi,
                  homogeneous=True),
        LemmaCase("gradient-omega", "|grad h|^2 >= 2(m+1)/(9(d-1)^2) |omega|^2", "gradient", GRADIENT_CONFIGS,
                  codazzi_sampler, ev_gradient_omega, precondition=pre_codazzi, needs_k_le_m=True,
                  homogeneous=True),
        LemmaCase("gradient-fp", "|grad h|^2 >= 2(m+1)c^2/(d-1) sum |F P|^2", "gradient", GRADIENT_CONFIGS,
                  codazzi_sampler, ev_gradient_fp, precondition=pre_codazzi, needs_k_le_m=True,
                  homogeneous=True, gate=False),
        LemmaCase("gradient-H", "|grad h|^2 >= 2(10-d)/(9(m+2)) |grad H|^2 above the m threshold", "gradient",
                  GRADIENT_H_CONFIGS, codazzi_sampler, ev_gradient_H, precondition=pre_codazzi,
                  needs_k_le_m=True, homogeneous=True),
    ]
    return {c.id: c for c in cases}


MANIFEST = ("angle-product", "angle-product-t", "angle-product-synthetic", "omega-fp-bound", "type2-relations",
            "quartic-general", "quartic-constrained", "ll-bound", "hypersurface-pi-p", "hypersurface-pi-h",
            "reaction-bound-p", "reaction-negative-p", "reaction-bound-h", "reaction-bound-h-corrected",
            "reaction-negative-h",
            "z-bound-p", "z-bound-p-proof", "z-bound-h", "gauss-sectional",
            "gradient-eta", "gradient-omega", "gradient-fp", "gradient-H")


def select(registry: dict, pattern: str | None) -> dict:
    if not pattern:
        return dict(registry)
    pats = [p.strip() for p in pattern.split(",") if p.strip()]
    return {k: v for k, v in registry.items() if any(fnmatch.fnmatchcase(k, p) for p in pats)}


# campaign

def case_key(case_id: str) -> int:
    return zlib.crc32(case_id.encode())


def chunk_seed(root_seed: int, case_id: str, chunk: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(root_seed, spawn_key=(case_key(case_id), chunk))


def _draw(case: LemmaCase, root_seed: int, chunk: int, size: int, c: CaseConfig):
    rng = np.random.default_rng(chunk_seed(root_seed, case.id, chunk))
    raw = case.sampler(rng, size, c)
    s = case.complete(raw, c) if case.complete else raw
    return raw, s


def _margins(case: LemmaCase, lhs, rhs):
    diff = rhs - lhs
    if case.homogeneous:
        scale = np.abs(lhs) + np.abs(rhs)
        scale = np.where(scale > 0, scale, 1.0)
    else:
        scale = np.maximum(1.0, np.abs(lhs) + np.abs(rhs))
    with np.errstate(invalid="ignore"):
        return np.where(np.isfinite(diff), diff / scale, -np.inf)


def _violations(case: LemmaCase, margin):
    return (margin <= 0.0) if case.strict else (margin < -case.tol)


@dataclass
class CaseResult:
    id: str
    anchor: str
    group: str
    gate: bool
    status: str
    n_samples: int = 0
    n_violations: int = 0
    n_precondition_failed: int = 0
    worst_margin: float = float("inf")
    worst: dict | None = None
    witness: dict | None = None
    stats: dict = field(default_factory=dict)
    per_config: dict = field(default_factory=dict)
    reason: str = ""
    runtime: float = 0.0

    def as_dict(self, timing: bool = False) -> dict:
        out = dataclasses.asdict(self)
        if not timing:
            out.pop("runtime")
        return out


@dataclass
class CampaignReport:
    root_seed: int
    budget: int
    cases: dict
    version: str = __version__

    @property
    def passed(self) -> bool:
        return all(r.status in ("pass", "skipped") for r in self.cases.values() if r.gate)

    @property
    def failures(self) -> list:
        return [r for r in self.cases.values() if r.gate and r.status not in ("pass", "skipped")]

    def as_dict(self, timing: bool = False) -> dict:
        return {"root_seed": self.root_seed, "budget": self.budget, "version": self.version,
                "passed": self.passed,
                "cases": {k: v.as_dict(timing) for k, v in sorted(self.cases.items())}}

    def to_json(self, timing: bool = False, indent: int | None = 1) -> str:
        return json.dumps(_jsonable(self.as_dict(timing)), indent=indent, sort_keys=True)

    def violation_records(self) -> list:
        out = []
        for r in self.cases.values():
            if r.witness:
                w = r.witness
                out.append({"lemma": r.id, "seed": w["seed"], "m": w["config"]["m"], "k": w["config"]["k"],
                            "family": w["config"]["family"], "sign": w["config"]["sign"], "margin": w["margin"]})
        return out


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.floating, float)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    return x


def _take(s: dict, i: int) -> dict:
    B = None
    for v in s.values():
        if isinstance(v, np.ndarray) and v.ndim >= 1:
            B = B or v.shape[0]
    return {k: (v[i:i + 1] if isinstance(v, np.ndarray) and v.ndim >= 1 and v.shape[0] == B else v)
            for k, v in s.items() if not k.startswith("_")}


def _eval_one(case: LemmaCase, s: dict, c: CaseConfig):
    lhs, rhs = case.evaluate(s, c)
    ok = case.precondition(s, c)[0] if case.precondition else True
    return float(_margins(case, lhs, rhs)[0]), bool(ok)


def shrink(case: LemmaCase, raw: dict, c: CaseConfig, steps: int = SHRINK_STEPS):
    """Halve off-diagonal entries of ``raw[shrink_key]`` while the violation persists."""
    if case.shrink_key is None or case.complete is None:
        return raw, None, 0
    cur = {k: v for k, v in raw.items()}
    margin, _ = _eval_one(case, case.complete(cur, c), c)
    n = 0
    for _ in range(steps):
        X = cur[case.shrink_key].copy()
        m = X.shape[-1]
        off = ~np.eye(m, dtype=bool)
        X[..., off] *= 0.5
        trial = dict(cur)
        trial[case.shrink_key] = X
        mt, ok = _eval_one(case, case.complete(trial, c), c)
        if not ok or not _violations(case, np.array([mt]))[0]:
            break
        cur, margin, n = trial, mt, n + 1
    return cur, margin, n


def run_case(case: LemmaCase, root_seed: int, budget: int, shrink_witness: bool = True) -> CaseResult:
    t0 = time.perf_counter()
    res = CaseResult(case.id, case.anchor, case.group, case.gate, "pass")
    configs = [c for c in case.configs if case.feasible(c) is None]
    if not configs:
        reasons = sorted({case.feasible(c) for c in case.configs})
        res.status, res.reason = "skipped", "; ".join(reasons)
        return res
    total = budget if case.max_samples is None else min(budget, case.max_samples)
    n_chunks = -(-total // CHUNK)
    stats_acc: dict = {}
    for chunk in range(n_chunks):
        size = min(CHUNK, total - chunk * CHUNK)
        c = configs[chunk % len(configs)]
        _, s = _draw(case, root_seed, chunk, size, c)
        lhs, rhs = case.evaluate(s, c)
        margin = _margins(case, lhs, rhs)
        ok = case.precondition(s, c) if case.precondition is not None else np.ones(size, bool)
        bad = _violations(case, margin) & ok
        res.n_samples += size
        res.n_violations += int(np.sum(bad))
        res.n_precondition_failed += int(np.sum(~ok))
        pc = res.per_config.setdefault(c.label, {"n": 0, "worst_margin": float("inf"), "violations": 0})
        pc["n"] += size
        pc["violations"] += int(np.sum(bad))
        if np.any(ok):
            mm = np.where(ok, margin, np.inf)
            i = int(np.argmin(mm))
            pc["worst_margin"] = min(pc["worst_margin"], float(mm[i]))
            if mm[i] < res.worst_margin:
                res.worst_margin = float(mm[i])
                res.worst = {"config": c.as_dict(), "chunk": chunk, "size": size, "index": i}
            if case.stats is not None:
                sel = ok
                for k, v in case.stats(lhs[sel], rhs[sel], s, c).items():
                    stats_acc[k] = min(stats_acc.get(k, float("inf")), v)
    res.stats = stats_acc
    if res.n_precondition_failed:
        res.status = "precondition violated"
    elif res.n_violations:
        res.status = "fail"
        if shrink_witness:
            res.witness = _witness(case, root_seed, res.worst)
    res.runtime = time.perf_counter() - t0
    return res


def _witness(case: LemmaCase, root_seed: int, worst: dict) -> dict:
    c = CaseConfig(worst["config"]["family"], worst["config"]["sign"], worst["config"]["n"], worst["config"]["m"])
    chunk, i = worst["chunk"], worst["index"]
    raw, s = _draw(case, root_seed, chunk, worst["size"], c)
    raw1 = _take(raw, i)
    margin, _ = _eval_one(case, _take(s, i) if case.complete is None else case.complete(raw1, c), c)
    shrunk, sm, steps = shrink(case, raw1, c)
    out = {"config": c.as_dict(), "seed": {"entropy": root_seed, "spawn_key": [case_key(case.id), chunk],
                                            "index": i},
           "margin": margin, "shrunk_margin": sm, "shrink_steps": steps}
    if case.shrink_key and case.complete is not None:
        hs = case.complete(shrunk, c)["h"][0]
        out["shrunk_h"] = np.round(hs, 12).tolist()
    return out


def run_campaign(registry: dict, root_seed: int = DEFAULT_SEED, budget: int = 10_000,
                 shrink_witness: bool = True) -> CampaignReport:
    if not registry:
        raise ValueError("registry is empty")
    if budget is None or budget <= 0:
        raise ValueError("budget must be a positive number of samples per case")
    cases = {cid: run_case(case, root_seed, int(budget), shrink_witness) for cid, case in registry.items()}
    return CampaignReport(root_seed, int(budget), cases)


# margin profiles

FORMULA_PROFILES = {
    "omega-coefficient": lambda d, m, eps=0.0: omega_coefficient(m, d),
    "omega-coefficient-raw": lambda d, m, eps=0.0: omega_coefficient_raw(m, d),
    "preservation-gradient-coefficient": lambda d, m, eps=0.0: preservation_gradient_coefficient(m, d, eps),
    "alpha-k2": lambda d, m, eps=0.0: ((11 - 2 * d) * m - 19) / (9 * m * (m + 2)),
}


def margin_profile(case, grid, root_seed: int = DEFAULT_SEED, budget: int = 2048) -> list:
    """Worst margin per grid point.

    ``case`` is a formula profile name (grid of dicts with d, m and optional eps)
    or a :class:`LemmaCase` (grid of :class:`CaseConfig`).
    """
    rows = []
    if isinstance(case, str):
        if case not in FORMULA_PROFILES:
            raise KeyError(f"unknown profile {case!r}")
        fn = FORMULA_PROFILES[case]
        for p in grid:
            p = dict(p)
            rows.append({**p, "margin": float(fn(p["d"], p["m"], p.get("eps", 0.0)))})
        return rows
    for c in grid:
        sub = dataclasses.replace(case, configs=(c,))
        r = run_case(sub, root_seed, budget, shrink_witness=False)
        rows.append({**c.as_dict(), "margin": r.worst_margin, "status": r.status})
    return rows


def threshold_table(m_max: int = 64) -> dict:
    """Smallest m from which the gradient coefficient stays nonnegative up to ``m_max``, per d."""
    out = {}
    for d in (2, 4, 8):
        first = m_max
        while first > 2 and omega_coefficient(first - 1, d) >= 0:
            first -= 1
        isolated = [m for m in range(2, first) if omega_coefficient(m, d) >= 0]
        out[d] = {"first_nonnegative": first, "stated": gradient_H_threshold(d), "isolated_nonnegative": isolated}
    return out
