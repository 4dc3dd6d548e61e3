"""Coordinate models of the complex and quaternionic families.

Points are unit representatives in R^{d(n+1)} with the real form
eta = diag(+-1) (first scalar block negative for the noncompact duals).
The scalar field acts by right multiplication, encoded in matrices R_mu
(R_0 = identity). Everything internal uses c = 1; public helpers rescale.
"""
from __future__ import annotations

import numpy as np

from .ambient import SpaceSpec, quaternion_right_units

FD_STEP_CURVATURE = 1e-4
FD_STEP_PARALLEL = 1e-3


class PointwiseOnlyFamily(ValueError):
    """Raised for the octonionic family, which has no coordinate model here."""


class GlobalModel:
    def __init__(self, space: SpaceSpec):
        if space.family == "O":
            raise PointwiseOnlyFamily("octonionic family is pointwise-only")
        self.space = space
        d, n = space.d, space.n
        self.d = d
        self.dim = d * (n + 1)
        if d == 2:
            units = np.array([[[0.0, -1.0], [1.0, 0.0]]])
        else:
            units = quaternion_right_units()
        blocks = [np.eye(self.dim)] + [np.kron(np.eye(n + 1), u) for u in units]
        self.R = np.stack(blocks)
        self.eta = np.ones(self.dim)
        if space.sign < 0:
            self.eta[:d] = -1.0

    # forms
    def form(self, z, w):
        return np.einsum("...i,i,...i->...", z, self.eta, w)

    def hermitian(self, z, w):
        """Scalar-valued product as its d real components eta(R_mu z, w)."""
        Rz = np.einsum("mij,...j->m...i", self.R, z)
        return np.einsum("m...i,i,...i->m...", Rz, self.eta, w)

    def normalize(self, z):
        q = self.form(z, z)
        if q * self.space.sign <= 0:
            raise ValueError("vector is not a valid point representative")
        return z / np.sqrt(abs(q))

    def random_point(self, rng: np.random.Generator, spread: float = 0.5):
        z = rng.standard_normal(self.dim) * spread
        if self.space.sign > 0:
            return z / np.linalg.norm(z)
        d = self.d
        x = z[d:]
        t = rng.standard_normal(d)
        t *= np.sqrt(1.0 + x @ x) / np.linalg.norm(t)
        return np.concatenate([t, x])

    def vertical(self, p):
        return np.einsum("mij,j->im", self.R, p)

    def horizontal_part(self, p, u):
        V = self.vertical(p)
        coef = self.hermitian(p, u) / self.form(p, p)
        return u - V @ coef

    def random_horizontal(self, p, rng: np.random.Generator):
        v = self.horizontal_part(p, rng.standard_normal(self.dim))
        return v / np.sqrt(self.form(v, v))

    def metric(self, w, U, V):
        """Quotient metric at representative w on ambient vectors (columns of U, V)."""
        q = self.form(w, w)
        Rw = np.einsum("mij,j->mi", self.R, w) * self.eta
        gU = Rw @ U
        gV = Rw @ V
        out = (U.T * self.eta) @ V / q - gU.T @ gV / q ** 2
        return self.space.sign * out

    def horizontal_basis(self, p, rng: np.random.Generator | None = None, first=None):
        """Orthonormal horizontal basis made of blocks (v, R_1 v, ..., R_{d-1} v)."""
        rng = np.random.default_rng(0) if rng is None else rng
        cols: list[np.ndarray] = []
        target = self.space.real_dim
        cand = first
        while len(cols) < target:
            u = rng.standard_normal(self.dim) if cand is None else np.asarray(cand, dtype=float)
            cand = None
            v = self.horizontal_part(p, u)
            for b in cols:
                v = v - self.form(b, v) * b
            nv = self.form(v, v)
            if nv < 1e-8:
                continue
            v = v / np.sqrt(nv)
            for mu in range(self.d):
                cols.append(self.R[mu] @ v)
        return np.stack(cols, axis=1)

    def structure_at(self, p, basis):
        """J_xi matrices in the given horizontal basis at p."""
        return np.stack([self.metric(p, basis, self.R[x] @ basis) for x in range(1, self.d)])

    # geodesics (unit curvature scale)
    def _trig(self, s):
        if self.space.sign > 0:
            return np.cos(s), np.sin(s), -np.sin(s), np.cos(s)
        return np.cosh(s), np.sinh(s), np.sinh(s), np.cosh(s)

    def geodesic(self, p, v, s):
        a, b, _, _ = self._trig(s)
        return a * p + b * v

    def velocity(self, p, v, s):
        _, _, da, db = self._trig(s)
        return da * p + db * v

    def distance(self, p, q):
        pp = abs(self.form(p, p))
        qq = abs(self.form(q, q))
        x = np.sqrt(np.sum(self.hermitian(p, q) ** 2) / (pp * qq))
        if self.space.sign > 0:
            return float(np.arccos(min(1.0, x)))
        return float(np.arccosh(max(1.0, x)))

    # finite differences
    def chart_metric(self, p, basis, x):
        w = p + basis @ x
        return self.metric(w, basis, basis)

    def fd_curvature(self, p, basis, h: float = FD_STEP_CURVATURE):
        """Full curvature tensor in the chart p + sum x_a b_a (first derivatives vanish at 0)."""
        N = basis.shape[1]
        G0 = self.chart_metric(p, basis, np.zeros(N))
        D = np.empty((N, N, N, N))
        E = np.eye(N) * h
        for a in range(N):
            Gp = self.chart_metric(p, basis, E[a])
            Gm = self.chart_metric(p, basis, -E[a])
            D[a, a] = (Gp - 2 * G0 + Gm) / h ** 2
            for c in range(a + 1, N):
                val = (self.chart_metric(p, basis, E[a] + E[c]) - self.chart_metric(p, basis, E[a] - E[c])
                       - self.chart_metric(p, basis, E[c] - E[a]) + self.chart_metric(p, basis, -E[a] - E[c]))
                D[a, c] = D[c, a] = val / (4 * h ** 2)
        # R_abcd = 1/2 (g_bd,ac + g_ac,bd - g_bc,ad - g_ad,bc)
        R = 0.5 * (np.einsum("acbd->abcd", D) + np.einsum("bdac->abcd", D)
                   - np.einsum("adbc->abcd", D) - np.einsum("bcad->abcd", D))
        return R

    def parallel_frame(self, p, basis, s):
        """Parallel frame along the geodesic in direction basis[:, 0]."""
        v = basis[:, 0]
        gdot = self.velocity(p, v, s)
        E = basis.copy()
        for mu in range(self.d):
            E[:, mu] = self.R[mu] @ gdot
        return self.geodesic(p, v, s), E


def model_geodesic(space: SpaceSpec, start_point, direction, arclength: float):
    """Point at metric distance ``arclength`` (curvature scale c) along a unit horizontal direction."""
    model = GlobalModel(space)
    return model.geodesic(start_point, direction, arclength * np.sqrt(space.c))


def model_distance(space: SpaceSpec, p, q) -> float:
    return GlobalModel(space).distance(p, q) / np.sqrt(space.c)


def fd_sectional(model: GlobalModel, p, basis, X, Y, h: float = FD_STEP_CURVATURE) -> float:
    R = model.fd_curvature(p, basis, h)
    num = np.einsum("abcd,a,b,c,d->", R, X, Y, Y, X)
    den = (X @ X) * (Y @ Y) - (X @ Y) ** 2
    return model.space.c * num / den


def parallel_residual(model: GlobalModel, p, basis, s0: float = 0.3, h: float = FD_STEP_PARALLEL) -> float:
    """First-order difference of curvature components in a parallel frame."""
    q0, E0 = model.parallel_frame(p, basis, s0)
    q1, E1 = model.parallel_frame(p, basis, s0 + h)
    R0 = model.fd_curvature(q0, E0)
    R1 = model.fd_curvature(q1, E1)
    return float(np.max(np.abs(R1 - R0)) / h)
