"""Sweeps over eps, lifespan measurement, law fits and the run store."""

from __future__ import annotations

import csv
import json
import math
import threading
import time
import uuid
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .char_solver import (CONVERGED, ConeGrid, existence_horizon, linearized_solve,
                          picard_solve)
from .coefficients import KernelEvaluator, exact_inverse_profile, model_profile
from .errors import DampwaveError, UsageError
from .exponents import (B_OF_EPS, EXP_POWER, POWER, ProblemParams, classify_regime,
                        solve_b)
from .fd_oracle import BLEWUP, FdConfig, fd_solve
from .initial_data import make_data

FD = "FD"
PICARD_BISECTION = "PICARD_BISECTION"
LAWS = (POWER, EXP_POWER, B_OF_EPS)

PASS = "PASS"
FAIL = "FAIL"
INCONCLUSIVE = "INCONCLUSIVE"

CSV_HEADER = ["run_id", "p", "mu", "kappa", "eps", "method", "T", "censored", "h", "seed"]


# ------------------------------------------------------------ records

@dataclass
class RunRecord:
    run_id: str
    p: float
    mu: float
    kappa: float
    eps: float
    method: str
    T: Optional[float]
    censored: bool
    T_max: float
    status: str
    grid: dict = field(default_factory=dict)
    wall_time: float = 0.0
    seed: int = 0
    error: Optional[str] = None
    bracket: Optional[list] = None

    def to_json(self):
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_json(cls, line):
        return cls(**json.loads(line))

    @property
    def usable(self):
        return self.T is not None and not self.censored and self.error is None


class RunStore:
    """Append-only JSON-lines file; appends go through one lock."""

    def __init__(self, path):
        self.path = Path(path)
        self._lock = threading.Lock()

    def append(self, records):
        with self._lock:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            with open(self.path, "a") as fh:
                for rec in records:
                    fh.write(rec.to_json() + "\n")

    def load(self):
        if not self.path.exists():
            return []
        with open(self.path) as fh:
            return [RunRecord.from_json(line) for line in fh if line.strip()]


def export_csv(records, path):
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh)
        wr.writerow(CSV_HEADER)
        for r in records:
            h = r.grid.get("dr", r.grid.get("h"))
            wr.writerow([r.run_id, r.p, r.mu, r.kappa, repr(r.eps), r.method,
                         "" if r.T is None else repr(r.T), int(r.censored), h, r.seed])


# ------------------------------------------------------------ sweeps

def eps_ladder(lo=0.02, hi=0.5, per_decade=8, n=None):
    """Geometric ladder from hi down to lo."""
    if n is None:
        n = max(2, int(round(per_decade * math.log10(hi / lo))) + 1)
    if n == 0:
        return []
    return list(np.geomspace(hi, lo, n))


def _profile(cfg):
    prof = cfg.get("profile", {})
    mu = float(cfg["params"]["mu"])
    kind = prof.get("kind", "MODEL").upper()
    if kind == "MODEL":
        return model_profile(mu)
    if kind == "EXACT_INVERSE":
        return exact_inverse_profile(mu, float(prof.get("r0", 1.0)))
    raise UsageError(f"unknown profile kind {kind!r}")


def _data(cfg):
    d = dict(cfg.get("data", {}))
    family = d.pop("family", "BLOWUP_SLAB")
    kappa = d.pop("kappa", cfg["params"]["kappa"])
    return make_data(family, kappa, **d)


def resolve_ladder(sweep_cfg):
    if "eps" in sweep_cfg:
        return [float(e) for e in sweep_cfg["eps"]]
    return eps_ladder(sweep_cfg.get("eps_min", 0.02), sweep_cfg.get("eps_max", 0.5),
                      sweep_cfg.get("per_decade", 8), sweep_cfg.get("n"))


def horizon(sweep_cfg, eps):
    """T_max either fixed or coef * eps^power."""
    if "T_max_coef" in sweep_cfg:
        return float(sweep_cfg["T_max_coef"]) * eps ** float(sweep_cfg.get("T_max_power", -2.0))
    return float(sweep_cfg.get("T_max", 10.0))


def _fd_run(cfg, eps, T_max, params, profile, data):
    g = cfg.get("grid", {})
    dr = float(g.get("dr", 0.2))
    fc = FdConfig(dr=dr, cfl=float(g.get("cfl", 0.9)),
                  R_max=T_max + float(g.get("R_extra", 20.0)),
                  amp_threshold=float(g.get("amp_threshold", 1e6)), T_max=T_max,
                  pad=float(g.get("pad", 0.0)))
    res = fd_solve(profile, data, eps, params.p, fc)
    meta = {"dr": dr, "cfl": fc.cfl, "R_max": fc.R_max, "amp_threshold": fc.amp_threshold}
    if res.status == BLEWUP:
        T, cens = res.T_blow, False
        if g.get("refine", False):
            fine = fd_solve(profile, data, eps, params.p,
                            FdConfig(dr=dr / 2, cfl=fc.cfl, R_max=fc.R_max,
                                     amp_threshold=fc.amp_threshold, T_max=1.5 * T,
                                     pad=fc.pad))
            meta["T_refined"] = fine.T_blow
            if fine.T_blow is not None:
                meta["refine_change"] = abs(fine.T_blow - T) / T
    else:
        T, cens = T_max, True
    return res.status, T, cens, meta, None


def _picard_run(cfg, eps, T_max, params, profile, data):
    g = cfg.get("grid", {})
    R = float(g.get("R", 20.0))
    grid = ConeGrid.make(T_max, R, int(g.get("N_a", 64)))
    ke = KernelEvaluator(profile, grid.T + grid.R + 5)
    solver = linearized_solve if g.get("solver", "picard") == "linearized" else picard_solve
    lo, hi, _ = existence_horizon(solver, ke, data, eps, params, grid,
                                  int(g.get("budget", 500)), float(g.get("tol", 1e-10)))
    meta = {"h": grid.h, "N_a": grid.N_a, "R": grid.R, "solver": solver.__name__}
    if hi is None:
        return CONVERGED, T_max, True, meta, [lo, None]
    return "DIVERGED", 0.5 * (lo + hi), False, meta, [lo, hi]


def run_one(cfg, eps, run_id=None):
    """One sweep point; solver failures become records with ``error`` set."""
    pr = cfg["params"]
    params = ProblemParams(float(pr["p"]), float(pr["mu"]), float(pr["kappa"]))
    sw = cfg.get("sweep", {})
    method = sw.get("method", FD).upper()
    T_max = horizon(sw, eps)
    seed = int(cfg.get("seed", 0))
    run_id = run_id or uuid.uuid4().hex[:12]
    t0 = time.perf_counter()
    try:
        profile, data = _profile(cfg), _data(cfg)
        if method == FD:
            status, T, cens, meta, br = _fd_run(cfg, eps, T_max, params, profile, data)
        elif method == PICARD_BISECTION:
            status, T, cens, meta, br = _picard_run(cfg, eps, T_max, params, profile, data)
        else:
            raise UsageError(f"unknown method {method!r}")
        err = None
    except (DampwaveError, ArithmeticError, ValueError) as exc:
        if isinstance(exc, UsageError) and "unknown method" in str(exc):
            raise
        status, T, cens, meta, br, err = "ERROR", None, False, {}, None, f"{type(exc).__name__}: {exc}"
    return RunRecord(run_id, params.p, params.mu, params.kappa, float(eps), method, T, cens,
                     T_max, status, meta, time.perf_counter() - t0, seed, err, br)


def _run_star(args):
    return run_one(*args)


def sweep(config, store: Optional[RunStore] = None, workers=1):
    """One record per eps of the ladder, in ladder order."""
    ladder = resolve_ladder(config.get("sweep", {}))
    if not ladder:
        return []
    jobs = [(config, e) for e in ladder]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as ex:
            records = list(ex.map(_run_star, jobs))
    else:
        records = [run_one(*j) for j in jobs]
    if store is not None:
        store.append(records)
    return records


# ------------------------------------------------------------ fits

@dataclass
class FitReport:
    law: str
    fitted_exponent: float
    theory_exponent: float
    rel_error: float
    r_squared: float
    n_points: int
    prefactor: float = math.nan
    slope: float = math.nan

    def to_dict(self):
        # NaN is not valid JSON
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in asdict(self).items()}


def _linfit(x, y):
    A = np.column_stack([x, np.ones_like(x)])
    (m, c), *_ = np.linalg.lstsq(A, y, rcond=None)
    res = y - (m * x + c)
    ss = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(res ** 2)) / ss if ss > 0 else 1.0
    return float(m), float(c), r2


def theory_exponent(params: ProblemParams, law):
    rep = classify_regime(params)
    for lw in (rep.upper_law, rep.lower_law):
        if lw is not None and lw.kind == law:
            return 1.0 if law == B_OF_EPS else float(lw.exponent)
    return math.nan


def fit(records, law, params: Optional[ProblemParams] = None, include_censored=False,
        theory=None):
    """Least squares in the coordinates of ``law``.

    POWER: log T on log eps. EXP_POWER: log log T on log eps. B_OF_EPS: T on
    b(eps) (``slope``), with log T on log b as the exponent (theory 1).
    """
    if law not in LAWS:
        raise UsageError(f"unknown law {law!r}")
    pts = [r for r in records if r.T is not None and r.error is None
           and (include_censored or not r.censored)]
    if len(pts) < 4:
        raise UsageError(f"need at least 4 uncensored records, got {len(pts)}")
    pts = sorted(pts, key=lambda r: r.eps)
    eps = np.array([r.eps for r in pts])
    T = np.array([r.T for r in pts])
    if params is None:
        r0 = pts[0]
        params = ProblemParams(r0.p, r0.mu, r0.kappa)
    slope = math.nan
    if law == POWER:
        m, c, r2 = _linfit(np.log(eps), np.log(T))
        pref = math.exp(c)
    elif law == EXP_POWER:
        if np.any(T <= 1):
            raise UsageError("EXP_POWER needs T > 1")
        m, c, r2 = _linfit(np.log(eps), np.log(np.log(T)))
        pref = math.exp(c)
    else:
        b = np.array([solve_b(e, params.p, params.mu) for e in eps])
        slope, _, r2 = _linfit(b, T)
        m, c, _ = _linfit(np.log(b), np.log(T))
        pref = math.exp(c)
    th = theory_exponent(params, law) if theory is None else float(theory)
    rel = abs(m - th) / abs(th) if math.isfinite(th) and th != 0 else math.nan
    return FitReport(law, m, th, rel, r2, len(pts), pref, slope)


def try_fit(records, law, params=None, **kw):
    """fit, or None when there are too few usable records."""
    try:
        return fit(records, law, params, **kw)
    except UsageError:
        if sum(r.usable for r in records) < 4:
            return None
        raise


def compare_with_theory(report: Optional[FitReport], tol=0.20):
    if report is None or not math.isfinite(report.rel_error):
        return INCONCLUSIVE
    return PASS if report.rel_error <= tol else FAIL


# ------------------------------------------------------------ two solvers

def two_solver_difference(N, mu=2.0, p=3.0, kappa=3.0, eps=1e-2, T=2.0, R=4.0, budget=500):
    """Relative L-inf gap between the cone solver and the FD oracle on the
    cone lattice; FD runs at dr = h/2 and is sampled on the lattice nodes."""
    params = ProblemParams(p, mu, kappa)
    profile = model_profile(mu)
    data = make_data("DECAY", kappa)
    grid = ConeGrid.make(T, R, N)
    ke = KernelEvaluator(profile, grid.T + grid.R + 5)
    out = picard_solve(ke, data, eps, params, grid, budget)
    if out.status != CONVERGED:
        raise ArithmeticError(f"cone solver did not converge: {out.status}")
    half = grid.h / 2
    cfg = FdConfig(dr=half, cfl=0.5, R_max=grid.T + grid.R + 2 * grid.h, T_max=grid.T,
                   snapshot_every=half)
    res = fd_solve(profile, data, eps, p, cfg)
    sig, y = grid.coords()
    sel = grid.mask()
    it = np.rint(sig[sel] / half).astype(int)
    ir = np.rint(y[sel] / half).astype(int)
    fd = res.u[it, ir]
    cs = out.field.u[sel]
    return float(np.max(np.abs(cs - fd)) / np.max(np.abs(fd)))
