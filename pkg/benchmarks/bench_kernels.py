"""Compare numba and numpy backends of the hot kernels.

    python3 benchmarks/bench_kernels.py [--repeat 5] [--batch 2048]

Prints per-kernel median wall time for each backend, the speedup, and the
max absolute difference between the two results.
"""
from __future__ import annotations

import argparse
import statistics
import time

import numpy as np

from rank1lab import kernels
from rank1lab.ambient import make_space, structure_operators
from rank1lab.flows import geodesic_circle, sphere_radius
from rank1lab.lab import random_frames, split_batch


def _time(fn, repeat):
    fn()  # warm-up (includes JIT compilation)
    ts = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        ts.append(time.perf_counter() - t0)
    return statistics.median(ts), out


def workloads(batch: int, rng: np.random.Generator):
    sp = make_space("H", 1, 3)
    J = structure_operators(sp.family, sp.n)
    N, k = sp.real_dim, 3
    m = N - k
    F = random_frames(rng, batch, N)
    P, _, t, f = split_batch(J, F[:, :, :m], F[:, :, m:])
    h = rng.standard_normal((batch, k, m, m))
    h = 0.5 * (h + np.swapaxes(h, -1, -2))
    a = np.full(batch, 1 / (m - 1))
    X = rng.standard_normal((batch, N))
    Y = rng.standard_normal((batch, N))
    R = sphere_radius(1.0)
    C = geodesic_circle(np.pi / 8, 256)
    return {
        "reaction_parts": lambda b: kernels.reaction_parts(h, P, t, f, 1.0, a, backend=b),
        "quartic_terms": lambda b: kernels.quartic_terms(h, backend=b),
        "sectional_batch": lambda b: kernels.sectional_batch(J, X, Y, 1.0, backend=b),
        "curve_curvature": lambda b: kernels.curve_curvature(C, R, backend=b)[1],
        "curve_run(500 steps)": lambda b: kernels.curve_run(C, R, 0.2, np.inf, 0.0, 500, backend=b)[0],
    }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--batch", type=int, default=2048)
    args = ap.parse_args(argv)
    rng = np.random.default_rng(0)
    print(f"{'kernel':22s} {'numpy [s]':>11s} {'numba [s]':>11s} {'speedup':>8s} {'max |diff|':>11s}")
    for name, fn in workloads(args.batch, rng).items():
        t_np, r_np = _time(lambda: fn("numpy"), args.repeat)
        t_nb, r_nb = _time(lambda: fn("numba"), args.repeat)
        diff = float(np.max(np.abs(np.asarray(r_np) - np.asarray(r_nb))))
        print(f"{name:22s} {t_np:11.5f} {t_nb:11.5f} {t_np / t_nb:8.1f} {diff:11.2e}")


if __name__ == "__main__":
    main()
