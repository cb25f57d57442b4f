"""Command-line interface: dampwave <subcommand> [options]."""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .errors import AccuracyError, DampwaveError, UsageError

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3


def load_config(path):
    if path is None:
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:  # python < 3.11
        import tomli as tomllib
    with open(path, "rb") as fh:
        return tomllib.load(fh)


def _params(args, cfg):
    from .exponents import ProblemParams
    pr = dict(cfg.get("params", {}))
    for k in ("p", "mu", "kappa"):
        v = getattr(args, k, None)
        if v is not None:
            pr[k] = v
    missing = [k for k in ("p", "mu", "kappa") if k not in pr]
    if missing:
        raise UsageError(f"missing parameters: {', '.join(missing)}")
    return ProblemParams(float(pr["p"]), float(pr["mu"]), float(pr["kappa"]))


def _out(args):
    d = Path(args.out or ".")
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=float))


# ------------------------------------------------------------ commands

def cmd_exponents(args, cfg):
    from dataclasses import asdict
    from .exponents import ProblemParams, classify_regime
    params = ProblemParams(args.p_pos, args.mu_pos, args.kappa_pos)
    rep = classify_regime(params)
    _emit({"derived": asdict(params.derived()),
           "regime": rep.regime,
           "lower_law": None if rep.lower_law is None else asdict(rep.lower_law),
           "upper_law": None if rep.upper_law is None else asdict(rep.upper_law),
           "notes": list(rep.notes)})
    return EXIT_OK


def cmd_kernel_check(args, cfg):
    from .coefficients import KernelEvaluator, admissible_samples, model_profile
    worst = 0.0
    rows = []
    for mu in args.mu:
        ke = KernelEvaluator(model_profile(mu), 2 * args.R + 5)
        t, r, y = admissible_samples(args.n, args.R, seed=args.seed).T
        d = np.max(np.abs(ke.log_kernel(t, r, y, path="closed") - ke.log_kernel(t, r, y, path="table")))
        rows.append({"mu": mu, "max_log_diff": float(d)})
        worst = max(worst, float(d))
    _emit({"rows": rows, "tol": args.tol, "pass": worst <= args.tol})
    return EXIT_OK if worst <= args.tol else EXIT_FAIL


def cmd_solve(args, cfg):
    from .char_solver import ConeGrid, linearized_solve, picard_solve
    from .coefficients import KernelEvaluator, model_profile
    from .fd_oracle import FdConfig, fd_solve
    from .harness import _data
    params = _params(args, cfg)
    cfg = dict(cfg)
    cfg["params"] = {"p": params.p, "mu": params.mu, "kappa": params.kappa}
    if args.family:
        cfg["data"] = {**cfg.get("data", {}), "family": args.family}
    data = _data(cfg)
    profile = model_profile(params.mu)
    out = _out(args)
    if args.method == "fd":
        fc = FdConfig(dr=args.h, cfl=args.cfl, R_max=args.T + args.R, T_max=args.T,
                      snapshot_every=args.snapshot)
        res = fd_solve(profile, data, args.eps, params.p, fc)
        path = out / "fd_field.csv"
        res.to_csv(path)
        _emit({"status": res.status, "T_blow": res.T_blow, "steps": res.steps, "csv": str(path)})
        return EXIT_OK
    grid = ConeGrid.make(args.T, args.R, args.N)
    ke = KernelEvaluator(profile, grid.T + grid.R + 5)
    solver = picard_solve if args.method == "picard" else linearized_solve
    res = solver(ke, data, args.eps, params, grid, args.budget)
    path = out / "cone_field.csv"
    res.field.to_csv(path)
    _emit({"status": res.status, "iterations": res.iterations, "h": grid.h, "csv": str(path)})
    return EXIT_OK if res.status == "CONVERGED" else EXIT_NUMERIC


def cmd_oracle_compare(args, cfg):
    from .harness import two_solver_difference
    rows = []
    for N in args.N:
        rows.append({"N": N, "rel_linf": two_solver_difference(N, eps=args.eps, T=args.T)})
    gaps = [r["rel_linf"] for r in rows]
    ok = all(g < args.tol for g in gaps) and all(b < a for a, b in zip(gaps, gaps[1:]))
    _emit({"rows": rows, "tol": args.tol, "pass": ok})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_sweep(args, cfg):
    from .harness import RunStore, export_csv, sweep
    if not cfg:
        raise UsageError("sweep needs --config")
    cfg = dict(cfg)
    cfg.setdefault("seed", args.seed)
    out = _out(args)
    store = RunStore(out / "runs.jsonl")
    recs = sweep(cfg, store, workers=args.threads)
    export_csv(recs, out / "runs.csv")
    for r in recs:
        T = "censored" if r.censored else ("error" if r.T is None else f"{r.T:.6g}")
        print(f"eps={r.eps:.5g}  {r.method}  {r.status:<10} T={T}")
    return EXIT_OK


def cmd_fit(args, cfg):
    from .harness import RunStore, compare_with_theory, try_fit
    runs = args.runs or (Path(args.out or ".") / "runs.jsonl")
    recs = RunStore(runs).load()
    fc = cfg.get("fit", {})
    law = (args.law or fc.get("law", "POWER")).upper()
    tol = args.tol if args.tol is not None else float(fc.get("tol", 0.20))
    params = None
    if cfg.get("params") or args.p is not None:
        params = _params(args, cfg)
    rep = try_fit(recs, law, params)
    verdict = compare_with_theory(rep, tol)
    _emit({"report": None if rep is None else rep.to_dict(), "verdict": verdict, "tol": tol})
    return EXIT_FAIL if verdict == "FAIL" else EXIT_OK


def cmd_certificate(args, cfg):
    from .blowup_certificate import (certificate_record, functional_lifespan, j_threshold_tau,
                                     pnu1_certificate_tau)
    params = _params(args, cfg)
    if args.kind == "j":
        tau = j_threshold_tau(params, args.eps, args.E)
    elif args.kind == "pnu1":
        tau = pnu1_certificate_tau(params, args.eps, args.E)
    else:
        tau = functional_lifespan(params, args.eps, theta=args.theta)
    _emit(certificate_record(params, args.eps, args.kind, tau, math.isfinite(tau)))
    return EXIT_OK


def cmd_lemmas(args, cfg):
    from .lemma_lab import ALL_CHECKS
    out = _out(args)
    reports = [fn({"n": args.n}, args.seed) for fn in ALL_CHECKS.values()]
    with open(out / "lemmas.jsonl", "w") as fh:
        for r in reports:
            fh.write(json.dumps(r.to_dict(), sort_keys=True) + "\n")
    print(f"{'lemma':<6} {'kind':<4} {'calibration':>12} {'verification':>13}  verdict")
    for r in reports:
        print(f"{r.name:<6} {r.kind:<4} {r.calibration:12.6g} {r.verification:13.6g}  "
              f"{'PASS' if r.passed else 'FAIL'}")
    return EXIT_OK if all(r.passed for r in reports) else EXIT_FAIL


# ------------------------------------------------------------ parser

def build_parser():
    ap = argparse.ArgumentParser(prog="dampwave", description=__doc__)
    ap.add_argument("--config", help="TOML config file")
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--seed", type=int, default=0)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add_params(sp):
        sp.add_argument("--p", type=float)
        sp.add_argument("--mu", type=float)
        sp.add_argument("--kappa", type=float)

    sp = sub.add_parser("exponents", help="derived exponents and regime")
    sp.add_argument("p_pos", type=float, metavar="p")
    sp.add_argument("mu_pos", type=float, metavar="mu")
    sp.add_argument("kappa_pos", type=float, metavar="kappa")
    sp.set_defaults(fn=cmd_exponents)

    sp = sub.add_parser("kernel-check", help="closed-form vs tabulated kernel")
    sp.add_argument("--mu", type=float, nargs="+", default=[0.0, 1.0, 2.0])
    sp.add_argument("--n", type=int, default=100000)
    sp.add_argument("--R", type=float, default=50.0)
    sp.add_argument("--tol", type=float, default=1e-10)
    sp.set_defaults(fn=cmd_kernel_check)

    sp = sub.add_parser("solve", help="one solve, field written as CSV")
    add_params(sp)
    sp.add_argument("--method", choices=["picard", "linearized", "fd"], default="picard")
    sp.add_argument("--family", help="DECAY, BLOWUP_SLAB, BUMP or ZERO")
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--T", type=float, default=2.0)
    sp.add_argument("--R", type=float, default=4.0)
    sp.add_argument("--N", type=int, default=64, help="cone lattice size")
    sp.add_argument("--h", type=float, default=0.05, help="FD dr")
    sp.add_argument("--cfl", type=float, default=0.5)
    sp.add_argument("--snapshot", type=float, default=None)
    sp.add_argument("--budget", type=int, default=500)
    sp.set_defaults(fn=cmd_solve)

    sp = sub.add_parser("oracle-compare", help="cone solver vs FD")
    sp.add_argument("--N", type=int, nargs="+", default=[32, 64, 128])
    sp.add_argument("--eps", type=float, default=1e-2)
    sp.add_argument("--T", type=float, default=2.0)
    sp.add_argument("--tol", type=float, default=0.02)
    sp.set_defaults(fn=cmd_oracle_compare)

    sp = sub.add_parser("sweep", help="lifespan sweep over an eps ladder")
    sp.set_defaults(fn=cmd_sweep)

    sp = sub.add_parser("fit", help="fit a lifespan law to stored runs")
    add_params(sp)
    sp.add_argument("--runs", help="runs.jsonl (default <out>/runs.jsonl)")
    sp.add_argument("--law", choices=["POWER", "EXP_POWER", "B_OF_EPS"])
    sp.add_argument("--tol", type=float)
    sp.set_defaults(fn=cmd_fit)

    sp = sub.add_parser("certificate", help="blow-up time certificate")
    add_params(sp)
    sp.add_argument("--kind", choices=["j", "pnu1", "functional"], default="j")
    sp.add_argument("--eps", type=float, required=True)
    sp.add_argument("--E", type=float, default=None, help="E (j) or E1~ (pnu1)")
    sp.add_argument("--theta", type=float, default=None)
    sp.set_defaults(fn=cmd_certificate)

    sp = sub.add_parser("lemmas", help="randomised inequality checks")
    sp.add_argument("--n", type=int, default=1000)
    sp.set_defaults(fn=cmd_lemmas)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    if args.threads > 0:
        os.environ.setdefault("NUMBA_NUM_THREADS", str(args.threads))
    try:
        cfg = load_config(args.config)
        return args.fn(args, cfg)
    except (AccuracyError, ArithmeticError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DampwaveError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
