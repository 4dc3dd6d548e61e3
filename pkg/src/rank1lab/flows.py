"""Exactly reducible mean curvature flows with pinching monitors.

Two regimes: geodesic spheres, where the flow is the radial ODE
dr/dt = -|H(r)|, and closed curves on the round sphere S^2(4c), evolved as
polylines by their discrete geodesic curvature.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.optimize import brentq

from . import __version__
from .ambient import SpaceSpec, point_algebra
from .kernels import curve_curvature, curve_run, reaction_parts, sectional_batch
from .shape import alpha_constant, b_constant

R_TOL = 1e-8
SAFETY = 0.1
DT_MAX = 0.01
SPHERE_COLUMNS = ("t", "r", "normH2", "normh2", "normh02", "Q0", "Qeps", "W", "fsigma", "Kmin", "myers_diam")


class FlowError(ValueError):
    """Invalid flow input or a resolution limit reached during integration."""


# geodesic spheres

def _check_sphere_space(space: SpaceSpec):
    if space.family not in ("C", "H"):
        raise FlowError("sphere flows need a family with a global model (C or H)")


def radius_limit(space: SpaceSpec) -> float:
    """Largest admissible radius: infinite for negative sign, pi/(4 sqrt c) where tan 2r changes sign."""
    return math.inf if space.sign < 0 else math.pi / (4 * math.sqrt(space.c))


def principal_curvatures(space: SpaceSpec, r):
    """(lambda_1, lambda_2) on D1 (multiplicity d(n-1)) and D2 (multiplicity d-1)."""
    s = math.sqrt(space.c)
    r = np.asarray(r, dtype=float)
    if space.sign < 0:
        return s / np.tanh(s * r), 2 * s / np.tanh(2 * s * r)
    return s / np.tan(s * r), 2 * s / np.tan(2 * s * r)


def multiplicities(space: SpaceSpec) -> tuple[int, int]:
    return space.d * (space.n - 1), space.d - 1


def sphere_H(space: SpaceSpec, r):
    l1, l2 = principal_curvatures(space, r)
    n1, n2 = multiplicities(space)
    return n1 * l1 + n2 * l2


def sphere_h2(space: SpaceSpec, r):
    l1, l2 = principal_curvatures(space, r)
    n1, n2 = multiplicities(space)
    return n1 * l1 ** 2 + n2 * l2 ** 2


def sphere_shape(space: SpaceSpec, r: float):
    """(pair, h) at one point: normal e_0, tangent = its complement ordered D2 then D1."""
    pa = point_algebra(space)
    N = space.real_dim
    nu = np.zeros(N)
    nu[0] = 1.0
    D2 = np.array([J @ nu for J in pa.J]).T
    rest = [e for e in np.eye(N)[1:] if np.max(np.abs(D2.T @ e)) < 1e-12]
    T = np.hstack([D2, np.array(rest).T]) if rest else D2
    l1, l2 = principal_curvatures(space, r)
    n1, n2 = multiplicities(space)
    h = np.diag(np.r_[np.full(n2, float(l2)), np.full(n1, float(l1))])[None]
    return pa, T, nu[:, None], h


def sphere_kmin(space: SpaceSpec, r: float) -> float:
    """Smallest sectional curvature over principal planes (Gauss equation)."""
    pa, T, _, h = sphere_shape(space, r)
    m = T.shape[1]
    lam = np.diag(h[0])
    i, j = np.triu_indices(m, 1)
    if len(i) == 0:
        return math.nan
    Kb = sectional_batch(pa.J, T[:, i].T, T[:, j].T, space.sign * space.c)
    return float(np.min(Kb + lam[i] * lam[j]))


@dataclass
class FlowTrace:
    kind: str
    t: np.ndarray
    state: np.ndarray
    channels: dict = field(default_factory=dict)
    collapsed: bool = False
    collapse_time: float | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def to_csv(self, columns=None) -> str:
        cols = list(columns or (SPHERE_COLUMNS if self.kind == "sphere" else ("t",) + tuple(self.channels)))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        data = {"t": self.t, "r": self.state, **self.channels}
        for row in zip(*(data[c] for c in cols)):
            w.writerow([repr(float(v)) for v in row])
        return buf.getvalue()

    def manifest(self) -> dict:
        return {"kind": self.kind, "version": __version__, "collapsed": self.collapsed,
                "collapse_time": self.collapse_time, "n_states": len(self), **self.meta}

    def to_json(self) -> str:
        payload = {"manifest": self.manifest(), "t": self.t.tolist(),
                   "state": np.asarray(self.state).tolist() if self.kind == "sphere" else None,
                   "channels": {k: [_num(v) for v in np.asarray(c)] for k, c in self.channels.items()}}
        return json.dumps(payload, sort_keys=True)


def _num(v):
    v = float(v)
    return v if math.isfinite(v) else repr(v)


def sphere_monitors(space: SpaceSpec, r: np.ndarray, eps: float = 0.01, sigma: float = 0.1,
                    mu: float | None = None) -> dict:
    """Pinching and decay channels along a radius series."""
    r = np.asarray(r, dtype=float)
    n1, n2 = multiplicities(space)
    m = n1 + n2
    H = sphere_H(space, r)
    H2 = H ** 2
    h2 = sphere_h2(space, r)
    h02 = h2 - H2 / m
    b = b_constant(space, m, 1)
    b_eps = (1 - eps) * b if space.sign > 0 else (1 + eps) * b
    a_eps = 1 / (m - 1 + eps)
    Q0 = h2 - H2 / (m - 1) - b if m > 1 else np.full_like(r, -np.inf)
    Qe = h2 - a_eps * H2 - b_eps
    alpha = alpha_constant(space, m, 1, eps) if m > 1 else math.nan
    W = alpha * H2 + b
    with np.errstate(invalid="ignore", divide="ignore"):
        fs = np.where(W > 0, h02 / np.abs(W) ** (1 - sigma), np.nan)
        decay = h02 / (H2 + 1) ** (1 - sigma)
    if mu is None and m > 1 and alpha > 0:
        base = 1 / (2 * alpha * (m - 1) * (m - 1 + eps))
        mu = eps * (min(base, 0.5) if space.sign > 0 else base)
    kmin = np.array([sphere_kmin(space, x) for x in r])
    with np.errstate(invalid="ignore"):
        myers = np.where(kmin > 0, np.pi / np.sqrt(np.where(kmin > 0, kmin, 1.0)), np.inf)
    muW = (mu if mu is not None else math.nan) * W
    return {"normH2": H2, "normh2": h2, "normh02": h02, "Q0": Q0, "Qeps": Qe, "W": W, "fsigma": fs,
            "decay": decay, "Kmin": kmin, "muW": muW, "myers_diam": myers}


def _validate_r0(space: SpaceSpec, r0: float):
    _check_sphere_space(space)
    if not (r0 > 0) or not math.isfinite(r0):
        raise FlowError(f"initial radius must be positive and finite (got {r0})")
    if r0 >= radius_limit(space):
        raise FlowError(f"r0 = {r0} reaches the focal barrier {radius_limit(space):.6g}")


def sphere_flow_exact_oracle(space: SpaceSpec, r0: float):
    """Collapse time T(r0) = int_0^r0 dr/|H(r)| and an evaluator r(t) by inversion."""
    _validate_r0(space, r0)
    f = lambda x: 1.0 / float(sphere_H(space, x))

    def elapsed(r1, r2):
        if r2 <= r1:
            return 0.0
        return quad(f, r1, r2, epsabs=1e-15, epsrel=1e-13, limit=200)[0]

    T = elapsed(0.0, r0)

    def r_of_t(t):
        if t <= 0:
            return r0
        if t >= T:
            return 0.0
        return brentq(lambda x: elapsed(x, r0) - t, 0.0, r0, xtol=1e-15, rtol=1e-15)

    return T, r_of_t


def sphere_flow(space: SpaceSpec, r0: float, t_end: float | None = None, safety: float = SAFETY,
                dt_max: float = DT_MAX, r_tol: float = R_TOL, r_switch: float | None = None,
                eps: float = 0.01, sigma: float = 0.1, max_steps: int = 10_000_000) -> FlowTrace:
    """RK4 on dr/dt = -|H(r)| with dt = safety min(1/|h|^2, dt_max); the last stretch below
    ``r_switch`` is closed with quadrature of the separable equation."""
    if r0 == r_tol:
        _check_sphere_space(space)
        tr = FlowTrace("sphere", np.array([0.0]), np.array([r0]), collapsed=True, collapse_time=0.0)
        tr.channels = sphere_monitors(space, tr.state, eps, sigma)
        tr.meta = {"space": space.as_dict(), "params": {"r0": r0, "r_tol": r_tol}, "steps": 0,
                   "collapse_bound": collapse_bound(space, r0)}
        return tr
    _validate_r0(space, r0)
    if r_switch is None:
        r_switch = 1e-3 * r0
    F = lambda x: -float(sphere_H(space, x))
    f = lambda x: 1.0 / float(sphere_H(space, x))
    ts, rs = [0.0], [r0]
    t, r = 0.0, r0
    collapsed, Tc = False, None
    steps = 0
    while True:
        if t_end is not None and t >= t_end:
            break
        if r <= r_switch:
            lo = max(r_tol, 0.0)
            tail = quad(f, lo, r, epsabs=1e-16, epsrel=1e-13)[0]
            Tc = t + quad(f, 0.0, r, epsabs=1e-16, epsrel=1e-13)[0]
            ts.append(t + tail)
            rs.append(lo)
            collapsed = True
            break
        dt = safety * min(1.0 / float(sphere_h2(space, r)), dt_max)
        if t_end is not None:
            dt = min(dt, t_end - t)
        if dt < 1e-300 or steps >= max_steps:
            raise FlowError("step size underflow: blow-up resolution limit reached")
        k1 = F(r)
        k2 = F(max(r + 0.5 * dt * k1, 1e-300))
        k3 = F(max(r + 0.5 * dt * k2, 1e-300))
        k4 = F(max(r + dt * k3, 1e-300))
        r_new = r + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        if r_new <= r_switch / 2:
            r_switch = r
            continue
        t += dt
        r = r_new
        steps += 1
        ts.append(t)
        rs.append(r)
    tr = FlowTrace("sphere", np.array(ts), np.array(rs), collapsed=collapsed, collapse_time=Tc)
    tr.channels = sphere_monitors(space, tr.state, eps, sigma)
    tr.meta = {"space": space.as_dict(), "params": {"r0": r0, "t_end": t_end, "safety": safety, "dt_max": dt_max,
                                                   "r_tol": r_tol, "eps": eps, "sigma": sigma},
               "collapse_bound": collapse_bound(space, r0), "steps": steps}
    return tr


def collapse_bound(space: SpaceSpec, r0: float) -> float | None:
    """r0/((n+1)d - 2) for the negative sign; None otherwise."""
    if space.sign > 0:
        return None
    return r0 / ((space.n + 1) * space.d - 2)


# evolution consistency

def fd_derivative(t: np.ndarray, y: np.ndarray, order: int = 4) -> tuple[np.ndarray, np.ndarray]:
    """Derivative at interior nodes from the interpolating polynomial through order+1 neighbours."""
    half = order // 2
    idx = np.arange(half, len(t) - half)
    out = np.empty(len(idx))
    for n, i in enumerate(idx):
        x = t[i - half:i + half + 1] - t[i]
        s = max(np.max(np.abs(x)), 1e-300)
        V = np.vander(x / s, order + 1, increasing=True).T
        e = np.zeros(order + 1)
        e[1] = 1.0 / s
        w = np.linalg.solve(V, e)
        out[n] = w @ y[i - half:i + half + 1]
    return idx, out


def sphere_volume(space: SpaceSpec, r):
    """Volume of the geodesic sphere up to a constant: S(r)^{d(n-1)} (S(2r)/2)^{d-1}."""
    s = math.sqrt(space.c)
    S = np.sinh if space.sign < 0 else np.sin
    n1, n2 = multiplicities(space)
    return (S(s * r) / s) ** n1 * (S(2 * s * r) / (2 * s)) ** n2


def sphere_gradient_norm2(space: SpaceSpec) -> float:
    """|grad h|^2 of a geodesic sphere, 2(d-1)d(n-1)c^2, independent of the radius."""
    n1, n2 = multiplicities(space)
    return 2.0 * n2 * n1 * space.c ** 2


def h2_reaction(space: SpaceSpec, r: float) -> float:
    """Right side of the |h|^2 evolution on a homogeneous sphere, curvature terms contracted exactly."""
    pa, T, Nb, h = sphere_shape(space, r)
    J = pa.J
    P = np.einsum("ia,xij,jb->xab", T, J, T)[None]
    t = np.einsum("ia,xij,jb->xab", T, J, Nb)[None]
    f = np.einsum("ia,xij,jb->xab", Nb, J, Nb)[None]
    parts = reaction_parts(h[None], P, t, f, space.sign * space.c, 0.0)[0]
    R1 = float(np.sum(h[0] ** 2) ** 2)
    return -2 * sphere_gradient_norm2(space) + 2 * R1 + float(np.sum(parts))


@dataclass(frozen=True)
class ConsistencyReport:
    H2_residual: float
    h2_residual: float
    volume_residual: float
    n_points: int


def evolution_consistency(trace: FlowTrace, order: int = 4) -> ConsistencyReport:
    """Relative residuals of the |H|^2, |h|^2 and volume evolution laws along a sphere trace."""
    if trace.kind != "sphere":
        raise FlowError("evolution consistency is defined on sphere traces")
    if len(trace) < order + 1:
        raise FlowError(f"trace too short ({len(trace)} < {order + 1} samples)")
    space = SpaceSpecFromMeta(trace)
    keep = trace.state > 0
    if trace.collapsed:
        keep[-1] = False
    t = trace.t[keep]
    r = trace.state[keep]
    H2 = trace.channels["normH2"][keep]
    h2 = trace.channels["normh2"][keep]
    idx, dH2 = fd_derivative(t, H2, order)
    pred_H2 = 2 * H2[idx] * (h2[idx] + space.einstein)
    _, dh2 = fd_derivative(t, h2, order)
    pred_h2 = np.array([h2_reaction(space, x) for x in r[idx]])
    _, dlogV = fd_derivative(t, np.log(sphere_volume(space, r)), order)
    pred_V = -H2[idx]
    rel = lambda a, b: float(np.max(np.abs(a - b) / np.maximum(np.abs(b), 1e-300)))
    return ConsistencyReport(rel(dH2, pred_H2), rel(dh2, pred_h2), rel(dlogV, pred_V), len(idx))


def SpaceSpecFromMeta(trace: FlowTrace) -> SpaceSpec:
    from .ambient import make_space
    sp = trace.meta["space"]
    return make_space(sp["family"], sp["sign"], sp["n"], sp["c"])


# pinch scan

@dataclass
class PinchScan:
    space: SpaceSpec
    rows: list
    r_star: float | None
    bracket: tuple | None

    def to_csv(self) -> str:
        cols = ("r", "star_margin", "Qeps", "W", "Kmin", "muW", "myers_diam")
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(cols)
        for row in self.rows:
            w.writerow([repr(float(row[c])) for c in cols])
        return buf.getvalue()

    def as_dict(self) -> dict:
        return {"space": self.space.as_dict(), "r_star": self.r_star,
                "bracket": list(self.bracket) if self.bracket else None,
                "rows": [{k: _num(v) for k, v in row.items()} for row in self.rows]}


def star_margin(space: SpaceSpec, r) -> np.ndarray:
    """|H|^2/(m-1) + b - |h|^2: positive exactly when the pinching condition holds."""
    n1, n2 = multiplicities(space)
    m = n1 + n2
    return sphere_H(space, r) ** 2 / (m - 1) + b_constant(space, m, 1) - sphere_h2(space, r)


def pinch_monitor_scan(space: SpaceSpec, r_grid, eps: float = 0.01, sigma: float = 0.1,
                       xtol: float = 1e-12) -> PinchScan:
    _check_sphere_space(space)
    r_grid = np.asarray(sorted(r_grid), dtype=float)
    if np.any(r_grid <= 0) or np.any(r_grid >= radius_limit(space)):
        raise FlowError("scan radii must lie in the admissible range")
    mon = sphere_monitors(space, r_grid, eps, sigma)
    marg = star_margin(space, r_grid)
    rows = [{"r": float(r), "star_margin": float(s), "Qeps": float(q), "W": float(w), "Kmin": float(k),
             "muW": float(u), "myers_diam": float(md)}
            for r, s, q, w, k, u, md in zip(r_grid, marg, mon["Qeps"], mon["W"], mon["Kmin"], mon["muW"],
                                            mon["myers_diam"])]
    r_star = bracket = None
    for a, b, fa, fb in zip(r_grid[:-1], r_grid[1:], marg[:-1], marg[1:]):
        if fa > 0 >= fb:
            bracket = (float(a), float(b))
            r_star = brentq(lambda x: float(star_margin(space, x)), a, b, xtol=xtol, rtol=1e-15)
            break
    return PinchScan(space, rows, r_star, bracket)


# curves on S^2(4c)

def sphere_radius(c: float = 1.0) -> float:
    return 1.0 / (2.0 * math.sqrt(c))


def geodesic_circle(r0: float, N: int, c: float = 1.0, phase: float = 0.0) -> np.ndarray:
    """N vertices on the circle of geodesic radius r0 about the north pole of S^2(4c)."""
    R = sphere_radius(c)
    th = r0 / R
    phi = phase + 2 * np.pi * np.arange(N) / N
    return R * np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.full(N, np.cos(th))], axis=1)


def circle_collapse_time(r0: float, c: float = 1.0) -> float:
    """(1/(4c)) ln(1/cos(2 sqrt(c) r0)); the separable reduction of the circle flow."""
    return math.log(1.0 / math.cos(2 * math.sqrt(c) * r0)) / (4 * c)


def polyline_length(X: np.ndarray, radius: float) -> float:
    return float(np.sum(curve_curvature(X, radius)[2]))


def _diameter(X: np.ndarray) -> float:
    c = X.mean(axis=0)
    return 2.0 * float(np.max(np.linalg.norm(X - c, axis=1)))


def _check_polyline(X: np.ndarray, radius: float):
    if X.ndim != 2 or X.shape[1] != 3:
        raise FlowError("polyline must be an (N, 3) array")
    if X.shape[0] < 16:
        raise FlowError("polyline needs at least 16 vertices")
    if np.max(np.abs(np.linalg.norm(X, axis=1) - radius)) > 1e-12 * max(1.0, radius):
        raise FlowError("vertices are not on the sphere")
    if self_intersects(X):
        raise FlowError("polyline is not simple")


def self_intersects(X: np.ndarray) -> bool:
    """Coarse segment-crossing test on the stereographic image from the point opposite the centroid."""
    c = X.mean(axis=0)
    if np.linalg.norm(c) < 1e-12:
        c = np.cross(X[0], X[len(X) // 4])
    c = c / np.linalg.norm(c)
    a = np.cross(c, [1.0, 0.0, 0.0])
    if np.linalg.norm(a) < 0.5:
        a = np.cross(c, [0.0, 1.0, 0.0])
    a /= np.linalg.norm(a)
    b = np.cross(c, a)
    den = np.linalg.norm(X[0]) + X @ c
    P = np.stack([(X @ a) / den, (X @ b) / den], axis=1)
    N = len(P)
    A, B = P, np.roll(P, -1, axis=0)
    step = max(1, N // 256)
    for i in range(0, N, step):
        j = np.arange(i + 2, N - (1 if i == 0 else 0))
        if len(j) == 0:
            continue
        p, r = A[i], B[i] - A[i]
        q, s = A[j], B[j] - A[j]
        rxs = r[0] * s[:, 1] - r[1] * s[:, 0]
        qp = q - p
        ok = np.abs(rxs) > 1e-15
        tt = np.where(ok, (qp[:, 0] * s[:, 1] - qp[:, 1] * s[:, 0]) / np.where(ok, rxs, 1), -1)
        uu = np.where(ok, (qp[:, 0] * r[1] - qp[:, 1] * r[0]) / np.where(ok, rxs, 1), -1)
        if np.any(ok & (tt > 0) & (tt < 1) & (uu > 0) & (uu < 1)):
            return True
    return False


def curve_flow(X0: np.ndarray, c: float = 1.0, t_end: float = math.inf, cfl: float = 0.2,
               stop_diam: float | None = None, snapshots: int = 50, snapshot_stride: int | None = None,
               max_steps: int = 50_000_000, backend: str | None = None) -> FlowTrace:
    """Explicit curve shortening on S^2(4c) with dt = cfl * (shortest edge)^2.

    The run stops at ``t_end`` or when the diameter drops below ``stop_diam``;
    in the second case the remaining time is that of the geodesic circle with
    the same length, which is accurate once the curve has become round.
    """
    R = sphere_radius(c)
    X = np.array(X0, dtype=float)
    _check_polyline(X, R)
    if stop_diam is None:
        stop_diam = 1e-6
    L0 = polyline_length(X, R)
    if math.isfinite(t_end):
        marks = list(np.linspace(0, t_end, snapshots + 1)[1:])
    else:
        marks = []
    ts, Ls, diams, kmax, kmin, k2 = [], [], [], [], [], []
    states = []

    def record(t, X):
        vec, kap, edge = curve_curvature(X, R, backend)
        ts.append(t)
        Ls.append(float(np.sum(edge)))
        diams.append(_diameter(X))
        kmax.append(float(np.max(np.abs(kap))))
        kmin.append(float(np.min(np.abs(kap))))
        k2.append(float(np.sum(kap ** 2 * 0.5 * (edge + np.roll(edge, 1)))))
        if snapshot_stride:
            states.append(X.copy())

    t = 0.0
    record(t, X)
    collapsed = False
    Tc = None
    steps_total = 0
    while True:
        target = marks.pop(0) if marks else (t_end if math.isfinite(t_end) else math.inf)
        if not math.isfinite(target):
            # no snapshot schedule: advance in blocks of steps
            X, dt_run, steps = curve_run(X, R, cfl, math.inf, stop_diam, 20000, backend)
        else:
            X, dt_run, steps = curve_run(X, R, cfl, target - t, stop_diam, max_steps, backend)
        t += dt_run
        steps_total += steps
        record(t, X)
        if diams[-1] < stop_diam:
            L = Ls[-1]
            rho = R * math.asin(min(1.0, L / (2 * math.pi * R)))
            Tc = t + circle_collapse_time(rho, c)
            collapsed = True
            break
        if steps_total >= max_steps:
            raise FlowError("step cap reached before collapse or t_end")
        if math.isfinite(t_end) and t >= t_end - 1e-15:
            break
    trace = FlowTrace("curve", np.array(ts), np.array(states) if states else np.empty(0),
                      {"length": np.array(Ls), "diameter": np.array(diams), "kappa_max": np.array(kmax),
                       "kappa_min": np.array(kmin), "int_kappa2": np.array(k2)},
                      collapsed=collapsed, collapse_time=Tc,
                      meta={"params": {"c": c, "cfl": cfl, "stop_diam": stop_diam, "N": int(len(X0)),
                                       "t_end": t_end if math.isfinite(t_end) else None},
                            "initial_length": L0, "steps": steps_total})
    return trace


def round_point_ratio(X: np.ndarray, c: float = 1.0) -> float:
    """max/min discrete curvature: tends to 1 for a curve shrinking to a round point."""
    kap = np.abs(curve_curvature(X, sphere_radius(c))[1])
    return float(np.max(kap) / np.min(kap))


def curve_order_study(r0: float = math.pi / 8, Ns=(64, 128, 256, 512, 1024), c: float = 1.0,
                      cfl: float = 0.2, stop_fraction: float = 0.2) -> dict:
    """Collapse-time errors against the closed form and the fitted log-log slope."""
    exact = circle_collapse_time(r0, c)
    R = sphere_radius(c)
    errs = []
    for N in Ns:
        X = geodesic_circle(r0, N, c)
        d0 = _diameter(X)
        tr = curve_flow(X, c, cfl=cfl, stop_diam=stop_fraction * d0)
        errs.append(abs(tr.collapse_time - exact))
    slope = -np.polyfit(np.log(np.asarray(Ns, float)), np.log(errs), 1)[0]
    return {"exact": exact, "N": list(Ns), "errors": errs, "order": float(slope)}
