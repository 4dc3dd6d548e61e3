"""Command-line front end: ``rank1-lab <subcommand> [options]``.

Exit codes (all subcommands):
  0  success, no violations
  1  at least one gated inequality violated
  2  usage or validation error (bad flags, bad config keys, invalid radius)
  3  pinching functional undefined (alpha <= 0)
  4  a case reported "precondition violated" (mislabeled sampler)
"""
from __future__ import annotations

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import flows, lab
from .ambient import make_space, parse_family
from .shape import alpha_constant

EXIT_OK, EXIT_VIOLATION, EXIT_USAGE, EXIT_ALPHA, EXIT_PRECONDITION = 0, 1, 2, 3, 4


class UsageError(Exception):
    pass


# config parsing

def parse_config_text(text: str) -> dict:
    """JSON object, or ``key = value`` lines with ``#`` comments."""
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            data = json.loads(stripped)
        except json.JSONDecodeError as e:
            raise UsageError(f"config: invalid JSON ({e})") from None
        if not isinstance(data, dict):
            raise UsageError("config: top level must be an object")
        return {str(k).replace("-", "_"): v for k, v in data.items()}
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"config line {lineno}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def parse_space(token: str, sign: str | None = None):
    """``FAM[,n[,c]]`` with FAM in C, H, O, CP, CH, HP, HH, OP, OH."""
    parts = [p.strip() for p in str(token).split(",")]
    if not 1 <= len(parts) <= 3 or not parts[0]:
        raise UsageError(f"bad --space {token!r}; expected FAM[,n[,c]]")
    s = None if sign is None else (1 if sign in ("+", "+1", "1") else -1 if sign in ("-", "-1") else None)
    if sign is not None and s is None:
        raise UsageError(f"bad --sign {sign!r}; expected + or -")
    try:
        fam, sgn = parse_family(parts[0], s)
        n = int(parts[1]) if len(parts) > 1 else 2
        c = float(parts[2]) if len(parts) > 2 else 1.0
        return make_space(fam, sgn, n, c)
    except ValueError as e:
        raise UsageError(str(e)) from None


def parse_sweep(spec: str) -> np.ndarray:
    """``r0=a:b:N`` -> N equispaced radii."""
    try:
        key, rng = spec.split("=", 1)
        a, b, n = rng.split(":")
        if key.strip() != "r0":
            raise ValueError
        n = int(n)
        if n < 1:
            raise ValueError
        return np.linspace(float(a), float(b), n)
    except ValueError:
        raise UsageError(f"bad --sweep {spec!r}; expected r0=a:b:N") from None


# parser

def _common(p: argparse.ArgumentParser, space_default: str | None = None):
    p.add_argument("--config", help="key=value or JSON file; flags override its values")
    p.add_argument("--space", default=space_default, help="FAM[,n[,c]], e.g. CH,2 or H,3,0.5")
    p.add_argument("--sign", choices=["+", "-"], help="curvature sign when FAM is a bare C/H/O")
    p.add_argument("--m", type=int)
    p.add_argument("--k", type=int)
    p.add_argument("--eps", type=float, default=0.01)
    p.add_argument("--sigma", type=float, default=0.1)
    p.add_argument("--seed", type=int, default=lab.DEFAULT_SEED)
    p.add_argument("--budget", type=int, default=4096)
    p.add_argument("--out", help="output directory")
    p.add_argument("--format", choices=["csv", "json"], default="csv")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="rank1-lab", description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify-algebra", help="run the inequality campaign")
    _common(p)
    p.add_argument("--cases", help="comma-separated globs over case ids")
    p.add_argument("--no-shrink", action="store_true")
    p.add_argument("--list", action="store_true", help="list case ids and exit")

    p = sub.add_parser("flow-sphere", help="geodesic-sphere flow")
    _common(p, "CH,2")
    p.add_argument("--r0", type=float)
    p.add_argument("--sweep", help="r0=a:b:N")
    p.add_argument("--t-end", type=float)
    p.add_argument("--safety", type=float, default=flows.SAFETY)
    p.add_argument("--dt-max", type=float, default=flows.DT_MAX)

    p = sub.add_parser("flow-curve", help="curve shortening on S^2(4c)")
    _common(p)
    p.add_argument("--r0", type=float, default=math.pi / 8, help="geodesic radius of the initial circle")
    p.add_argument("--vertices", type=int, default=256)
    p.add_argument("--perturb", type=float, default=0.0, help="relative radial perturbation amplitude")
    p.add_argument("--c", type=float, default=1.0)
    p.add_argument("--cfl", type=float, default=0.2)
    p.add_argument("--t-end", type=float)
    p.add_argument("--stop-diam", type=float, default=1e-6)
    p.add_argument("--stride", type=int, help="write vertex snapshots every STRIDE records")

    p = sub.add_parser("pinch-scan", help="pinching monitors along geodesic spheres")
    _common(p, "CH,2")
    p.add_argument("--r-min", type=float, default=0.05)
    p.add_argument("--r-max", type=float)
    p.add_argument("--points", type=int, default=40)

    p = sub.add_parser("report", help="regenerate a human summary from a JSON bundle")
    p.add_argument("path")
    p.add_argument("--config", help=argparse.SUPPRESS)
    return ap


def _parse(argv):
    ap = build_parser()
    args = ap.parse_args(argv)
    if getattr(args, "config", None):
        try:
            text = Path(args.config).read_text()
        except OSError as e:
            raise UsageError(f"cannot read config: {e}") from None
        values = parse_config_text(text)
        sub = ap._subparsers._group_actions[0].choices[args.command]
        known = {a.dest for a in sub._actions} - {"help", "config"}
        unknown = sorted(set(values) - known)
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        typed = {}
        for a in sub._actions:
            if a.dest in values:
                v = values[a.dest]
                if a.type is not None and isinstance(v, str):
                    try:
                        v = a.type(v)
                    except ValueError:
                        raise UsageError(f"config key {a.dest}: bad value {v!r}") from None
                if a.nargs == 0 and isinstance(v, str):
                    v = v.lower() in ("1", "true", "yes", "on")
                if a.choices is not None and v not in a.choices:
                    raise UsageError(f"config key {a.dest}: {v!r} not in {list(a.choices)}")
                typed[a.dest] = v
        sub.set_defaults(**typed)
        args = ap.parse_args(argv)
    return args


def _outdir(args) -> Path | None:
    if not args.out:
        return None
    d = Path(args.out)
    d.mkdir(parents=True, exist_ok=True)
    return d


def _write(path: Path, text: str):
    path.write_text(text)


# summaries

def summarize_campaign(data: dict) -> str:
    rows = [f"campaign seed={data['root_seed']} budget={data['budget']} version={data['version']}",
            f"{'case':30s} {'gate':4s} {'status':22s} {'samples':>8s} {'viol':>6s} {'worst margin':>14s}"]
    for cid, r in sorted(data["cases"].items()):
        wm = r["worst_margin"]
        wm = wm if isinstance(wm, str) else f"{wm:.4e}"
        rows.append(f"{cid:30s} {'yes' if r['gate'] else 'no':4s} {r['status']:22s} {r['n_samples']:8d} "
                    f"{r['n_violations']:6d} {wm:>14s}")
    rows.append("overall: " + ("PASS" if data["passed"] else "FAIL"))
    return "\n".join(rows)


def summarize_flows(data: dict) -> str:
    rows = [f"{'space':8s} {'r0':>10s} {'T_collapse':>14s} {'bound':>12s} {'ok':>4s}"]
    for run in data["runs"]:
        b = run.get("bound")
        ok = "" if b is None else ("yes" if run["collapse_time"] <= b else "NO")
        rows.append(f"{run['space_label']:8s} {run['r0']:10.6g} {run['collapse_time']:14.10f} "
                    f"{'-' if b is None else format(b, '12.10f'):>12s} {ok:>4s}")
    return "\n".join(rows)


def summarize_scan(data: dict) -> str:
    rs = data["r_star"]
    lines = [f"pinch scan {data['space_label']}: r* = {'none' if rs is None else format(rs, '.12f')}"
             f" bracket = {data['bracket']}"]
    for row in data["rows"]:
        lines.append(f"  r={row['r']:.6f} star_margin={float(row['star_margin']):+.6e} Qeps={float(row['Qeps']):+.6e}")
    return "\n".join(lines)


def summarize(data: dict) -> str:
    kind = data.get("kind", "campaign")
    return {"campaign": summarize_campaign, "flow-sphere": summarize_flows, "pinch-scan": summarize_scan,
            "flow-curve": summarize_curve}[kind](data)


def summarize_curve(data: dict) -> str:
    ct = data["collapse_time"]
    s = f"curve N={data['params']['N']} r0={data['r0']:.6g}: "
    s += f"T_collapse = {'not reached' if ct is None else format(ct, '.10f')}"
    if data.get("circle_time") is not None:
        s += f" closed form {data['circle_time']:.10f}"
    return s + f" final length {data['final_length']:.6e}"


# subcommands

def cmd_verify_algebra(args) -> int:
    reg = lab.default_registry()
    if args.list:
        for cid, case in reg.items():
            print(f"{cid:30s} {case.anchor}")
        return EXIT_OK
    sel = lab.select(reg, args.cases)
    if not sel:
        raise UsageError(f"no cases match {args.cases!r}")
    if args.budget <= 0:
        raise UsageError("--budget must be positive")
    report = lab.run_campaign(sel, args.seed, args.budget, shrink_witness=not args.no_shrink)
    payload = report.to_json()
    out = _outdir(args)
    if out is None:
        print(payload)
    else:
        _write(out / "campaign.json", payload + "\n")
        _write(out / "violations.json", json.dumps(lab._jsonable(report.violation_records()), indent=1) + "\n")
        _write(out / "summary.txt", summarize_campaign(json.loads(payload)) + "\n")
    print(summarize_campaign(json.loads(payload)), file=sys.stderr)
    for r in report.failures:
        if r.witness:
            print(f"witness {r.id}: {json.dumps(lab._jsonable(r.witness))}", file=sys.stderr)
    if any(r.status == "precondition violated" for r in report.failures):
        return EXIT_PRECONDITION
    return EXIT_OK if report.passed else EXIT_VIOLATION


def _space_for_flows(args):
    sp = parse_space(args.space, args.sign)
    if sp.family == "O":
        raise UsageError("the octonionic family is pointwise-only; sphere flows need C or H")
    return sp


def cmd_flow_sphere(args) -> int:
    sp = _space_for_flows(args)
    if args.sweep and args.r0 is not None:
        raise UsageError("use either --r0 or --sweep")
    radii = parse_sweep(args.sweep) if args.sweep else [args.r0 if args.r0 is not None else 1.0]
    out = _outdir(args)
    runs = []
    for i, r0 in enumerate(radii):
        try:
            tr = flows.sphere_flow(sp, float(r0), t_end=args.t_end, safety=args.safety, dt_max=args.dt_max,
                                   eps=args.eps, sigma=args.sigma)
        except flows.FlowError as e:
            raise UsageError(str(e)) from None
        tr.meta["seed"] = args.seed
        bound = flows.collapse_bound(sp, float(r0))
        T = tr.collapse_time
        runs.append({"space_label": sp.label, "r0": float(r0), "collapse_time": T if T is not None else math.nan,
                     "bound": bound, "n_states": len(tr)})
        print(f"{sp.label} r0={float(r0):.6g}  T_collapse={'n/a' if T is None else format(T, '.10f')}"
              f"  bound r0/((n+1)d-2)={'n/a' if bound is None else format(bound, '.10f')}")
        if out is not None:
            stem = f"sphere_{sp.label}_{i:03d}"
            if args.format == "csv":
                _write(out / f"{stem}.csv", tr.to_csv())
            else:
                _write(out / f"{stem}.json", tr.to_json() + "\n")
            _write(out / f"{stem}.manifest.json", json.dumps(lab._jsonable(tr.manifest()), sort_keys=True, indent=1) + "\n")
    if out is not None:
        bundle = {"kind": "flow-sphere", "version": __version__, "runs": runs}
        _write(out / "flow_sphere.json", json.dumps(lab._jsonable(bundle), sort_keys=True, indent=1) + "\n")
    bad = [r for r in runs if r["bound"] is not None and not r["collapse_time"] <= r["bound"]]
    return EXIT_VIOLATION if bad else EXIT_OK


def _perturbed_circle(r0: float, N: int, c: float, amp: float) -> np.ndarray:
    R = flows.sphere_radius(c)
    phi = 2 * np.pi * np.arange(N) / N
    th = (r0 / R) * (1 + amp * np.cos(2 * phi))
    return R * np.stack([np.sin(th) * np.cos(phi), np.sin(th) * np.sin(phi), np.cos(th)], axis=1)


def cmd_flow_curve(args) -> int:
    R = flows.sphere_radius(args.c) if args.c > 0 else math.nan
    if not (args.c > 0) or not (0 < args.r0 < math.pi * R):
        raise UsageError("need c > 0 and 0 < r0 < pi/(2 sqrt c)")
    X = _perturbed_circle(args.r0, args.vertices, args.c, args.perturb)
    try:
        tr = flows.curve_flow(X, args.c, t_end=args.t_end if args.t_end is not None else math.inf, cfl=args.cfl,
                              stop_diam=args.stop_diam, snapshot_stride=args.stride)
    except flows.FlowError as e:
        raise UsageError(str(e)) from None
    circle = flows.circle_collapse_time(args.r0, args.c) if args.perturb == 0 and args.r0 < math.pi * R / 2 else None
    data = {"kind": "flow-curve", "version": __version__, "r0": args.r0, "params": tr.meta["params"],
            "seed": args.seed, "collapse_time": tr.collapse_time, "circle_time": circle,
            "final_length": float(tr.channels["length"][-1])}
    print(summarize_curve(data))
    out = _outdir(args)
    if out is not None:
        _write(out / "curve.csv", tr.to_csv())
        _write(out / "curve.json", json.dumps(lab._jsonable(data), sort_keys=True, indent=1) + "\n")
        if args.stride:
            for j in range(0, len(tr.state), args.stride):
                lines = ["x,y,z"] + [",".join(repr(float(v)) for v in p) for p in tr.state[j]]
                _write(out / f"curve_vertices_{j:05d}.csv", "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_pinch_scan(args) -> int:
    sp = parse_space(args.space, args.sign)
    k = args.k if args.k is not None else 1
    m = args.m if args.m is not None else sp.real_dim - k
    if k >= 2:
        a = alpha_constant(sp, m, k, args.eps)
        if a <= 0:
            print(f"alpha undefined for {sp.label} with m={m}, k={k}: alpha = {a:.6g} <= 0, "
                  "so W and f_sigma are not defined (the k >= 2 functional needs d in {2, 4})", file=sys.stderr)
            return EXIT_ALPHA
        raise UsageError("pinch-scan runs on geodesic spheres, which are hypersurfaces (k = 1)")
    if sp.family == "O":
        raise UsageError("the octonionic family is pointwise-only; no geodesic-sphere model")
    rmax = args.r_max if args.r_max is not None else min(1.5, 0.999 * flows.radius_limit(sp))
    if not 0 < args.r_min < rmax or args.points < 2:
        raise UsageError("need 0 < r_min < r_max and at least 2 points")
    try:
        scan = flows.pinch_monitor_scan(sp, np.linspace(args.r_min, rmax, args.points), args.eps, args.sigma)
    except flows.FlowError as e:
        raise UsageError(str(e)) from None
    data = {"kind": "pinch-scan", "version": __version__, "space_label": sp.label, **scan.as_dict()}
    print(summarize_scan(data))
    out = _outdir(args)
    if out is not None:
        if args.format == "csv":
            _write(out / "pinch_scan.csv", scan.to_csv())
        _write(out / "pinch_scan.json", json.dumps(lab._jsonable(data), sort_keys=True, indent=1) + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    try:
        data = json.loads(Path(args.path).read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise UsageError(f"cannot read report: {e}") from None
    try:
        print(summarize(data))
    except KeyError as e:
        raise UsageError(f"not a recognized report bundle (missing {e})") from None
    if data.get("kind", "campaign") == "campaign":
        return EXIT_OK if data["passed"] else EXIT_VIOLATION
    return EXIT_OK


COMMANDS = {"verify-algebra": cmd_verify_algebra, "flow-sphere": cmd_flow_sphere, "flow-curve": cmd_flow_curve,
            "pinch-scan": cmd_pinch_scan, "report": cmd_report}


def main(argv=None) -> int:
    try:
        args = _parse(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code not in (0, None) else EXIT_OK
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except UsageError as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
