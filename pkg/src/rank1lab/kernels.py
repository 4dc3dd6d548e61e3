"""Batched hot kernels with numba and pure numpy implementations.

Every public kernel dispatches on ``backend`` ("numba" or "numpy"); the
default comes from the environment (see ``_jit``). Both paths evaluate the
same closed-form contractions, so they agree to rounding.
"""
from __future__ import annotations

import numpy as np

from . import _jit
from ._jit import njit, prange


def _resolve(backend: str | None) -> str:
    b = backend or _jit.default_backend()
    if b == "numba" and not _jit.JIT_AVAILABLE:
        raise RuntimeError("numba backend requested but numba is not importable")
    if b not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {b!r}")
    return b


# reaction terms P_I, P_II,a, P_III

def _reaction_numpy(h, P, t, f, s, a):
    m = h.shape[-1]
    H = np.einsum("baii->ba", h)
    hh = np.einsum("baij,bajk->baik", h, h)
    PP = np.einsum("bxij,bxjk->bxik", P, P)
    tr1 = np.einsum("bxij,baji->b", PP, hh)
    tr2 = np.einsum("bxij,bajk,bxkl,bali->b", P, h, P, h, optimize=True)
    PI = 4.0 * s * (np.sum(H ** 2, axis=1) - m * np.sum(h ** 2, axis=(1, 2, 3)) + 3.0 * (tr1 - tr2))
    S = np.einsum("bxla,bxlc->bac", t, t)
    G = np.einsum("baij,bcij->bac", h, h) - a[:, None, None] * np.einsum("ba,bc->bac", H, H)
    k = h.shape[1]
    PII = 2.0 * s * np.sum((m * np.eye(k)[None] + 3.0 * S) * G, axis=(1, 2))
    M = np.einsum("bapi,bcij->bacpj", h, h)
    x1 = np.einsum("bxpc,bxja,bacpj->b", t, t, M, optimize=True)
    x2 = np.einsum("bxjc,bxpa,bacpj->b", t, t, M, optimize=True)
    x3 = np.einsum("bxjp,bxca,bacpj->b", P, f, M, optimize=True)
    PIII = -8.0 * s * (x1 - x2 - 2.0 * x3)
    return np.stack([PI, PII, PIII], axis=1)


@njit(parallel=True)
def _reaction_numba(h, P, t, f, s, a):
    B, k, m, _ = h.shape
    nx = P.shape[1]
    out = np.zeros((B, 3))
    for b in prange(B):
        H = np.zeros(k)
        for al in range(k):
            for i in range(m):
                H[al] += h[b, al, i, i]
        # M[a, c, p, j] = (h^a h^c)_{pj}
        M = np.zeros((k, k, m, m))
        for al in range(k):
            for be in range(k):
                for p in range(m):
                    for j in range(m):
                        acc = 0.0
                        for i in range(m):
                            acc += h[b, al, p, i] * h[b, be, i, j]
                        M[al, be, p, j] = acc
        pi = 0.0
        for al in range(k):
            n2 = 0.0
            for i in range(m):
                for j in range(m):
                    n2 += h[b, al, i, j] * h[b, al, i, j]
            pi += H[al] * H[al] - m * n2
        tr = 0.0
        for x in range(nx):
            Px = P[b, x]
            for al in range(k):
                # X = P h, tr(P P h h) - tr(P h P h)
                X = np.zeros((m, m))
                for i in range(m):
                    for j in range(m):
                        acc = 0.0
                        for l in range(m):
                            acc += Px[i, l] * h[b, al, l, j]
                        X[i, j] = acc
                for i in range(m):
                    for j in range(m):
                        tr -= X[i, j] * X[j, i]
                        acc = 0.0
                        for l in range(m):
                            acc += Px[i, l] * Px[l, j]
                        tr += acc * M[al, al, j, i]
        out[b, 0] = 4.0 * s * (pi + 3.0 * tr)
        pii = 0.0
        for al in range(k):
            for be in range(k):
                Sab = 0.0
                for x in range(nx):
                    for l in range(m):
                        Sab += t[b, x, l, al] * t[b, x, l, be]
                G = 0.0
                for i in range(m):
                    G += M[al, be, i, i]
                G -= a[b] * H[al] * H[be]
                coef = 3.0 * Sab
                if al == be:
                    coef += m
                pii += coef * G
        out[b, 1] = 2.0 * s * pii
        piii = 0.0
        for x in range(nx):
            for al in range(k):
                for be in range(k):
                    fba = f[b, x, be, al]
                    for p in range(m):
                        tpb = t[b, x, p, be]
                        tpa = t[b, x, p, al]
                        for j in range(m):
                            piii += (tpb * t[b, x, j, al] - t[b, x, j, be] * tpa
                                     - 2.0 * P[b, x, j, p] * fba) * M[al, be, p, j]
        out[b, 2] = -8.0 * s * piii
    return out


def reaction_parts(h, P, t, f, s: float, a, backend: str | None = None) -> np.ndarray:
    """Columns (P_I, P_II,a, P_III) for a batch of shapes in adapted frames.

    h: (B, k, m, m); P: (B, x, m, m); t: (B, x, m, k); f: (B, x, k, k);
    s = sign * c; a: scalar or (B,).
    """
    h = np.ascontiguousarray(h, dtype=float)
    a = np.broadcast_to(np.asarray(a, dtype=float), (h.shape[0],)).copy()
    args = (h, np.ascontiguousarray(P, dtype=float), np.ascontiguousarray(t, dtype=float),
            np.ascontiguousarray(f, dtype=float), float(s), a)
    if _resolve(backend) == "numba":
        return _reaction_numba(*args)
    return _reaction_numpy(*args)


# R1, R2 and Z

def _quartic_numpy(h):
    H = np.einsum("baii->ba", h)
    G = np.einsum("baij,bcij->bac", h, h)
    hh = np.einsum("baij,bcjk->bacik", h, h)
    comm = hh - np.swapaxes(hh, 1, 2)
    R1 = np.sum(G ** 2, axis=(1, 2)) + np.sum(comm ** 2, axis=(1, 2, 3, 4))
    Hh = np.einsum("ba,baij->bij", H, h)
    R2 = np.sum(Hh ** 2, axis=(1, 2))
    Z = np.einsum("bij,bcji->b", Hh, np.einsum("bcij,bcjk->bcik", h, h)) - R1
    return np.stack([R1, R2, Z], axis=1)


@njit(parallel=True)
def _quartic_numba(h):
    B, k, m, _ = h.shape
    out = np.zeros((B, 3))
    for b in prange(B):
        H = np.zeros(k)
        for al in range(k):
            for i in range(m):
                H[al] += h[b, al, i, i]
        prod = np.zeros((k, k, m, m))
        for al in range(k):
            for be in range(k):
                for i in range(m):
                    for j in range(m):
                        acc = 0.0
                        for p in range(m):
                            acc += h[b, al, i, p] * h[b, be, p, j]
                        prod[al, be, i, j] = acc
        r1 = 0.0
        for al in range(k):
            for be in range(k):
                g = 0.0
                for i in range(m):
                    g += prod[al, be, i, i]
                r1 += g * g
                for i in range(m):
                    for j in range(m):
                        c = prod[al, be, i, j] - prod[be, al, i, j]
                        r1 += c * c
        r2 = 0.0
        z = 0.0
        for i in range(m):
            for j in range(m):
                hh = 0.0
                for al in range(k):
                    hh += H[al] * h[b, al, i, j]
                r2 += hh * hh
                s2 = 0.0
                for be in range(k):
                    s2 += prod[be, be, j, i]
                z += hh * s2
        out[b, 0] = r1
        out[b, 1] = r2
        out[b, 2] = z - r1
    return out


def quartic_terms(h, backend: str | None = None) -> np.ndarray:
    """Columns (R1, R2, Z) for a batch of shapes (B, k, m, m)."""
    h = np.ascontiguousarray(h, dtype=float)
    if _resolve(backend) == "numba":
        return _quartic_numba(h)
    return _quartic_numpy(h)


# sectional curvature of many planes

def _sectional_numpy(J, X, Y, s):
    x = X / np.linalg.norm(X, axis=1, keepdims=True)
    y = Y - np.sum(Y * x, axis=1, keepdims=True) * x
    y = y / np.linalg.norm(y, axis=1, keepdims=True)
    q = np.einsum("bi,xij,bj->bx", x, J, y)
    return s * (1.0 + 3.0 * np.sum(q ** 2, axis=1))


@njit(parallel=True)
def _sectional_numba(J, X, Y, s):
    B, N = X.shape
    nx = J.shape[0]
    out = np.empty(B)
    for b in prange(B):
        nxv = 0.0
        for i in range(N):
            nxv += X[b, i] * X[b, i]
        nxv = np.sqrt(nxv)
        x = X[b] / nxv
        dot = 0.0
        for i in range(N):
            dot += Y[b, i] * x[i]
        y = Y[b] - dot * x
        ny = 0.0
        for i in range(N):
            ny += y[i] * y[i]
        y = y / np.sqrt(ny)
        acc = 0.0
        for xi in range(nx):
            q = 0.0
            for i in range(N):
                for j in range(N):
                    q += x[i] * J[xi, i, j] * y[j]
            acc += q * q
        out[b] = s * (1.0 + 3.0 * acc)
    return out


def sectional_batch(J, X, Y, s: float, backend: str | None = None) -> np.ndarray:
    """Sectional curvature s(1 + 3 sum <x, J y>^2) of the planes span(X_b, Y_b)."""
    args = (np.ascontiguousarray(J, dtype=float), np.ascontiguousarray(X, dtype=float),
            np.ascontiguousarray(Y, dtype=float), float(s))
    if _resolve(backend) == "numba":
        return _sectional_numba(*args)
    return _sectional_numpy(*args)


# discrete geodesic curvature of a closed polyline on a round sphere

def _curve_numpy(X, radius):
    Xn = np.roll(X, -1, axis=0)
    Xp = np.roll(X, 1, axis=0)
    u = X / radius

    def log_dir(Y):
        v = Y / radius - np.sum(Y / radius * u, axis=1, keepdims=True) * u
        return v / np.linalg.norm(v, axis=1, keepdims=True)

    def arc(Y):
        cosang = np.clip(np.sum(u * Y / radius, axis=1), -1.0, 1.0)
        sinang = np.linalg.norm(np.cross(u, Y / radius), axis=1)
        return radius * np.arctan2(sinang, cosang)

    a = log_dir(Xn)
    b = log_dir(Xp)
    ln = arc(Xn)
    lp = arc(Xp)
    cosab = np.clip(np.sum(a * b, axis=1), -1.0, 1.0)
    sinab = np.linalg.norm(np.cross(a, b), axis=1)
    turn = np.pi - np.arctan2(sinab, cosab)
    bis = a + b
    nb = np.linalg.norm(bis, axis=1, keepdims=True)
    safe = nb[:, 0] > 1e-300
    direction = np.zeros_like(bis)
    direction[safe] = bis[safe] / nb[safe]
    kappa = turn / (0.5 * (ln + lp))
    return kappa[:, None] * direction, kappa, ln


@njit
def _curve_into(X, radius, vec, kappa, edge):
    N = X.shape[0]
    inv = 1.0 / radius
    for i in range(N):
        j = i + 1 if i + 1 < N else 0
        q = i - 1 if i > 0 else N - 1
        u0, u1, u2 = X[i, 0] * inv, X[i, 1] * inv, X[i, 2] * inv
        n0, n1, n2 = X[j, 0] * inv, X[j, 1] * inv, X[j, 2] * inv
        p0, p1, p2 = X[q, 0] * inv, X[q, 1] * inv, X[q, 2] * inv
        cn = u0 * n0 + u1 * n1 + u2 * n2
        cp = u0 * p0 + u1 * p1 + u2 * p2
        a0, a1, a2 = n0 - cn * u0, n1 - cn * u1, n2 - cn * u2
        b0, b1, b2 = p0 - cp * u0, p1 - cp * u1, p2 - cp * u2
        sn = np.sqrt(a0 * a0 + a1 * a1 + a2 * a2)
        sp = np.sqrt(b0 * b0 + b1 * b1 + b2 * b2)
        ln = radius * np.arctan2(sn, min(1.0, max(-1.0, cn)))
        lp = radius * np.arctan2(sp, min(1.0, max(-1.0, cp)))
        a0, a1, a2 = a0 / sn, a1 / sn, a2 / sn
        b0, b1, b2 = b0 / sp, b1 / sp, b2 / sp
        cab = min(1.0, max(-1.0, a0 * b0 + a1 * b1 + a2 * b2))
        x0 = a1 * b2 - a2 * b1
        x1 = a2 * b0 - a0 * b2
        x2 = a0 * b1 - a1 * b0
        sab = np.sqrt(x0 * x0 + x1 * x1 + x2 * x2)
        turn = np.pi - np.arctan2(sab, cab)
        s0, s1, s2 = a0 + b0, a1 + b1, a2 + b2
        nb = np.sqrt(s0 * s0 + s1 * s1 + s2 * s2)
        k = turn / (0.5 * (ln + lp))
        kappa[i] = k
        edge[i] = ln
        if nb > 1e-300:
            vec[i, 0] = k * s0 / nb
            vec[i, 1] = k * s1 / nb
            vec[i, 2] = k * s2 / nb
        else:
            vec[i, 0] = 0.0
            vec[i, 1] = 0.0
            vec[i, 2] = 0.0


@njit
def _curve_numba(X, radius):
    N = X.shape[0]
    vec = np.zeros((N, 3))
    kappa = np.zeros(N)
    edge = np.zeros(N)
    _curve_into(X, radius, vec, kappa, edge)
    return vec, kappa, edge


def curve_curvature(X, radius: float, backend: str | None = None):
    """Per-vertex geodesic curvature vector, its magnitude, and forward edge lengths."""
    X = np.ascontiguousarray(X, dtype=float)
    if _resolve(backend) == "numba":
        return _curve_numba(X, float(radius))
    return _curve_numpy(X, float(radius))


@njit
def _curve_run_numba(X, radius, cfl, t_end, stop_diam, max_steps):
    N = X.shape[0]
    vec = np.zeros((N, 3))
    kappa = np.zeros(N)
    edge = np.zeros(N)
    t = 0.0
    steps = 0
    while t < t_end and steps < max_steps:
        _curve_into(X, radius, vec, kappa, edge)
        lmin = edge.min()
        dt = cfl * lmin * lmin
        if t + dt > t_end:
            dt = t_end - t
        c0 = 0.0
        c1 = 0.0
        c2 = 0.0
        for i in range(N):
            y0 = X[i, 0] + dt * vec[i, 0]
            y1 = X[i, 1] + dt * vec[i, 1]
            y2 = X[i, 2] + dt * vec[i, 2]
            s = radius / np.sqrt(y0 * y0 + y1 * y1 + y2 * y2)
            X[i, 0] = y0 * s
            X[i, 1] = y1 * s
            X[i, 2] = y2 * s
            c0 += X[i, 0]
            c1 += X[i, 1]
            c2 += X[i, 2]
        t += dt
        steps += 1
        c0 /= N
        c1 /= N
        c2 /= N
        dmax = 0.0
        for i in range(N):
            dd = (X[i, 0] - c0) ** 2 + (X[i, 1] - c1) ** 2 + (X[i, 2] - c2) ** 2
            if dd > dmax:
                dmax = dd
        if 2.0 * np.sqrt(dmax) < stop_diam:
            break
    return X, t, steps


def _curve_run_numpy(X, radius, cfl, t_end, stop_diam, max_steps):
    t = 0.0
    steps = 0
    while t < t_end and steps < max_steps:
        vec, kappa, edge = _curve_numpy(X, radius)
        dt = min(cfl * edge.min() ** 2, t_end - t)
        X = X + dt * vec
        X = X * (radius / np.linalg.norm(X, axis=1, keepdims=True))
        t += dt
        steps += 1
        c = X.mean(axis=0)
        if 2.0 * np.max(np.linalg.norm(X - c, axis=1)) < stop_diam:
            break
    return X, t, steps


def curve_run(X, radius: float, cfl: float, t_end: float, stop_diam: float, max_steps: int,
              backend: str | None = None):
    """Advance explicit curve shortening until t_end, a step cap, or a diameter floor."""
    X = np.ascontiguousarray(X, dtype=float).copy()
    args = (X, float(radius), float(cfl), float(t_end), float(stop_diam), int(max_steps))
    if _resolve(backend) == "numba":
        return _curve_run_numba(*args)
    return _curve_run_numpy(*args)
