"""Command-line front end.

Exit codes: 0 success, 1 usage or configuration error, 2 numerical failure
(divergence, failed gain search or falsified certificate).
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from . import config as cfgmod
from . import lyapunov
from .plant import holder_report
from .sim import DivergenceError, run, sweep, write_sweep_csv, write_trajectory_csv

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of numbers, got {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _add_source(p):
    g = p.add_mutually_exclusive_group()
    g.add_argument("--config", metavar="PATH", help="TOML experiment file")
    g.add_argument("--preset", metavar="NAME", help=f"built-in experiment: {', '.join(cfgmod.PRESETS)}")


def _add_overrides(p):
    p.add_argument("--L", type=_float_list, metavar="LIST", help="gain L (comma-separated list for sweeps)")
    p.add_argument("--seed", type=int, help="seed for the noise realization")
    p.add_argument("--dt", type=float, help="integration and measurement step")
    p.add_argument("--T", type=float, help="horizon")
    p.add_argument("--no-noise", action="store_true", help="disable measurement noise")
    p.add_argument("--out", metavar="PATH", help="CSV output file")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="nonlipobs", description="Observers for non-Lipschitz triangular systems.")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="simulate one scenario and write its trajectory")
    _add_source(p)
    _add_overrides(p)
    p.add_argument("--stride", type=int, default=10, help="write every N-th recorded sample (default 10)")

    p = sub.add_parser("sweep", help="one run per gain L against a shared plant/noise realization")
    _add_source(p)
    _add_overrides(p)
    p.add_argument("--workers", type=int, help="parallel worker processes")

    p = sub.add_parser("design-gains", help="recursive gain design and decrease certification")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--d0", type=float, required=True)
    p.add_argument("--dV", type=float, help="degree of V (default: smallest even integer above 2m-1)")
    p.add_argument("--samples", type=int, default=100_000, help="certification sample count")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-robust", action="store_true", help="skip the robustness margin search")
    p.add_argument("--out", metavar="PATH", help="write parameters and certificate as JSON")

    p = sub.add_parser("verify", help="re-check a design, or externally chosen gains")
    p.add_argument("--params", metavar="PATH", help="JSON written by design-gains")
    p.add_argument("--k", type=_float_list, help="gains k_1..k_m to check (fits the l-gains)")
    p.add_argument("--d0", type=float, default=-1.0, help="degree for --k (default -1)")
    p.add_argument("--dV", type=_float_list, help="candidate degrees of V for --k")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=1)

    p = sub.add_parser("check-holder", help="estimate Hölder orders and constants of the known lines")
    _add_source(p)
    p.add_argument("--samples", type=int, default=20_000, help="pairs drawn per constant estimate")
    p.add_argument("--seed", type=int, default=0)
    return ap


def _load(args) -> dict:
    if args.config:
        return cfgmod.load(args.config)
    return cfgmod.preset(args.preset or "example-plant")


def _overrides(args, cfg):
    return cfgmod.apply_overrides(cfg, L=args.L, seed=args.seed, dt=args.dt, T=args.T, no_noise=args.no_noise)


def _fmt_errs(errs) -> str:
    return " ".join(f"e_z{i + 1}={v:.4g}" for i, v in enumerate(errs))


def cmd_run(args) -> int:
    cfg = _overrides(args, _load(args))
    sc = cfgmod.build_scenario(cfg)
    try:
        res = run(sc)
    except DivergenceError as exc:
        print(f"error: divergence at t = {exc.time:.6g}", file=sys.stderr)
        return EXIT_NUMERIC
    for tr in res.traces:
        conv = "not converged" if tr.convergence_time is None else f"conv_time={tr.convergence_time:.4g}"
        print(f"{tr.cfg.variant.value}: {_fmt_errs(tr.final_errors)} peaking={tr.peaking:.4g} {conv}")
    if not res.traces:
        print(f"plant: {len(res.t)} samples, z range [{res.z.min():.4g}, {res.z.max():.4g}]")
    if args.out:
        write_trajectory_csv(res, args.out, stride=max(1, args.stride))
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _overrides(args, _load(args))
    sc = cfgmod.build_scenario(cfg)
    if not sc.observers:
        print("error: this configuration has no observer to sweep", file=sys.stderr)
        return EXIT_USAGE
    workers = args.workers if args.workers is not None else cfg["sweep"]["workers"]
    rows = sweep(sc, cfg["sweep"]["L"] or None, workers=workers)
    for row in rows:
        if row.diverged:
            print(f"L={row.L}: diverged at t = {row.blowup_time:.6g}")
        else:
            print(f"L={row.L}: {_fmt_errs(row.final_errors)} peaking={row.peaking:.4g}")
    if args.out:
        write_sweep_csv(rows, args.out, m=sc.m)
        print(f"wrote {args.out}")
    return EXIT_OK


def _default_dV(m: int) -> float:
    d = 2 * m
    return float(d if d > 2 * m - 1 else d + 2)


def cmd_design(args) -> int:
    dV = args.dV if args.dV is not None else _default_dV(args.m)
    if not dV > 2 * args.m - 1:
        print(f"error: dV must exceed 2m-1 = {2 * args.m - 1}, got {dV:g}", file=sys.stderr)
        return EXIT_USAGE
    try:
        params, cert = lyapunov.design_gains(args.m, args.d0, dV, seed=args.seed, cert_samples=args.samples)
    except lyapunov.DesignError as exc:
        print(f"error: {exc}; worst point {exc.worst_point.tolist()}", file=sys.stderr)
        return EXIT_NUMERIC
    except lyapunov.CertificateError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if not args.no_robust:
        cd, cv = lyapunov.find_robust_margins(params, cert.lam, seed=args.seed)
        cert.c_delta, cert.c_v = cd, cv
    print(f"m={params.m} d0={params.d0:g} dV={params.dV:g}")
    print("ell = " + ", ".join(f"{v:.6g}" for v in params.ell))
    print("k = " + ", ".join(f"{v:.6g}" for v in params.k))
    line = f"lambda = {cert.lam:.6g} over {cert.sample_count} samples (seed {cert.seed})"
    if cert.c_delta is not None:
        line += f"; c_delta = {cert.c_delta:.4g}, c_v = {cert.c_v:.4g}"
    print(line)
    if params.m == 2 and params.d0 == 0.0:
        eig = np.linalg.eigvals([[-params.k[0], 1.0], [-params.k[1], 0.0]])
        print("companion eigenvalues: " + ", ".join(f"{e:.4g}" for e in eig))
    if args.out:
        lyapunov.save_design(args.out, params, cert)
        print(f"wrote {args.out}")
    return EXIT_OK


def cmd_verify(args) -> int:
    if bool(args.params) == bool(args.k):
        print("error: give exactly one of --params or --k", file=sys.stderr)
        return EXIT_USAGE
    if args.k:
        m = len(args.k)
        cands = args.dV or [2 * m, 2 * m + 2, 3 * m, 4 * m]
        results = lyapunov.best_dV_fit(args.k, args.d0, cands, args.samples, args.seed)
        ok = False
        for dV, lam, msg in results:
            if lam is None:
                print(f"dV={dV:g}: FAIL {msg}")
            else:
                ok = True
                print(f"dV={dV:g}: pass, lambda = {lam:.6g}")
        return EXIT_OK if ok else EXIT_NUMERIC
    try:
        params, stored = lyapunov.load_design(args.params)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: cannot read {args.params}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        cert = lyapunov.verify_decrease(params, args.samples, args.seed)
    except lyapunov.CertificateError as exc:
        print(f"decrease: FAIL, witness {exc.witness.tolist()}")
        return EXIT_NUMERIC
    print(f"decrease: pass, lambda = {cert.lam:.6g} (seed {args.seed}, {cert.sample_count} samples)")
    if stored is not None and stored.c_delta is not None:
        chk = lyapunov.verify_robust_implication(params, stored.lam, stored.c_delta, stored.c_v, seed=args.seed)
        status = "pass" if chk.ok else f"FAIL, witness {chk.witness} v={chk.witness_v:.4g}"
        print(f"robust (c_delta={stored.c_delta:.4g}, c_v={stored.c_v:.4g}): {status}, worst margin {chk.worst_margin:.4g}")
        if not chk.ok:
            return EXIT_NUMERIC
    return EXIT_OK


def cmd_check_holder(args) -> int:
    cfg = _load(args)
    system = cfgmod.build_system(cfg)
    box = cfg["system"]["box"]
    try:
        rep = holder_report(system, box, cfg["system"]["u_box"], n_constant_samples=args.samples, seed=args.seed)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    for entry in rep:
        if not entry["known"]:
            print(f"line {entry['line']}: unknown (treated as a bounded disturbance)")
            continue
        orders = ", ".join(f"{v:.3g}" for v in entry["orders"])
        print(
            f"line {entry['line']}: orders ({orders}), constant ~ {entry['constant']:.4g}; "
            f"high gain {'admissible' if entry['highgain'] else 'NOT admissible'}, "
            f"homogeneous d0=-1 {'admissible' if entry['homogeneous'] else 'NOT admissible'} "
            f"(needs {', '.join(f'{v:.3g}' for v in entry['homogeneous_required'])})"
        )
    known = [e for e in rep if e["known"]]
    print("variants: high gain " + ("admissible" if all(e["highgain"] for e in known) else "not admissible")
          + "; homogeneous " + ("admissible" if all(e["homogeneous"] for e in known) else "not admissible")
          + "; cascades admissible (continuity only)")
    return EXIT_OK


COMMANDS = {
    "run": cmd_run,
    "sweep": cmd_sweep,
    "design-gains": cmd_design,
    "verify": cmd_verify,
    "check-holder": cmd_check_holder,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return COMMANDS[args.command](args)
    except cfgmod.ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
