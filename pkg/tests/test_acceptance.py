"""Acceptance suite: one test and one printed verdict line per criterion.

Tolerances are pinned here; see the README for how each was chosen.
"""

import math
import time

import numpy as np
import pytest

from dampwave.blowup_certificate import functional_lifespan, j_functional, j_threshold_tau
from dampwave.blowup_certificate import DEFAULTS as CERT
from dampwave.char_solver import (CONVERGED, ConeField, ConeGrid, check_pointwise_bound,
                                  existence_horizon, lattice_u_L, linearized_solve,
                                  picard_solve, smallness_eps0, weighted_norm1)
from dampwave.coefficients import KernelEvaluator, model_profile
from dampwave.exponents import (ProblemParams, b_residual, gamma_f, gamma_s, solve_b,
                                strauss_exponent)
from dampwave.fd_oracle import BLEWUP, FdConfig, fd_solve
from dampwave.harness import compare_with_theory, fit, sweep, two_solver_difference
from dampwave.initial_data import blowup_family, decay_family, make_data
from dampwave.lemma_lab import run_all
from dampwave.linear_propagator import u_L_many, verify_velocity

TOL_IDENTITY = 1e-12
TOL_KERNEL = 1e-10
TOL_DALEMBERT = 1e-8
TOL_TWO_SOLVER = 0.02
TOL_SCALING = 0.20
TOL_REFINE = 0.05
TOL_LINEAR_EPS = 0.05
TOL_C8_SPREAD = 1.5
TOL_B_RES = 1e-10
TOL_THETA0 = 0.05
R2_THETA1 = 0.99


def _timed(fn):
    t0 = time.perf_counter()
    out = fn()
    return out, time.perf_counter() - t0


def test_criterion_01_exponent_algebra(accept):
    def run():
        rng = np.random.default_rng(20240101)
        p = rng.uniform(1.01, 6.0, 1000)
        mu = rng.uniform(0.0, 6.0, 1000)
        kappa = rng.uniform(0.05, 8.0, 1000)
        worst = 0.0
        for pi, mi, ki in zip(p, mu, kappa):
            pr = ProblemParams(pi, mi, ki)
            gs = gamma_s(pi, 3 + mi)
            worst = max(worst, abs((1 - pi * pr.eta) - gs / 2),
                        abs(gs / (2 * pi * (pi - 1))
                            - (gamma_f(pi, ki) / (pi - 1) + (pi * pr.nu - 1) / pi)))
        s3 = abs(strauss_exponent(3) - (1 + math.sqrt(2)))
        s5 = abs(strauss_exponent(5) - (3 + math.sqrt(17)) / 4)
        return worst, s3, s5

    (worst, s3, s5), dt = _timed(run)
    ok = worst <= TOL_IDENTITY and s3 <= TOL_IDENTITY and s5 <= TOL_IDENTITY
    assert accept(1, ok, f"identity err {worst:.1e}, p_S err {max(s3, s5):.1e} ({dt:.2f}s)")


def test_criterion_02_kernel(accept):
    def run():
        R = 20.0
        g = np.linspace(0.0, R, 100)
        t, r, y = np.meshgrid(g, g, g, indexing="ij")
        adm = y >= t - r
        t, r, y = t[adm], r[adm], y[adm]
        worst, diag = 0.0, True
        for mu in (0.0, 1.0, 2.0):
            ke = KernelEvaluator(model_profile(mu), R + 1)
            d = ke.log_kernel(t, r, y, path="closed") - ke.log_kernel(t, r, y, path="table")
            worst = max(worst, float(np.max(np.abs(d))))
            for path in ("closed", "table"):
                diag &= bool(np.all(ke.log_kernel(0.0, g, g, path=path) == 0.0))
        return worst, diag, t.size

    (worst, diag, n), dt = _timed(run)
    ok = worst <= TOL_KERNEL and diag
    assert accept(2, ok, f"max |log E diff| {worst:.1e} on {n} nodes, E(0,r,r)=1 {diag} ({dt:.1f}s)")


def test_criterion_03_linear_propagator(accept):
    def run():
        data = decay_family(2.0)
        ke = KernelEvaluator(model_profile(0.0), 40.0)
        g = np.linspace(0.0, 10.0, 50)
        tt, rr = np.meshgrid(g, g, indexing="ij")
        uL = u_L_many(ke, data, tt, rr)
        P = lambda s: -1 / np.sqrt(1 + s * s)
        ref = 0.5 * (data.phi(rr + tt) + data.phi(rr - tt)) + 0.5 * (P(rr + tt) - P(rr - tt))
        err = float(np.max(np.abs(uL - ref)))
        exact0 = bool(np.array_equal(u_L_many(ke, data, np.zeros(50), g), data.phi(g)))
        ke2 = KernelEvaluator(model_profile(2.0), 40.0)
        d3 = decay_family(3.0)
        e = [abs(verify_velocity(ke2, d3, 2.0, h) - d3.psi(2.0)) for h in (0.04, 0.02, 0.01)]
        order = min(math.log2(e[0] / e[1]), math.log2(e[1] / e[2]))
        return err, exact0, order

    (err, exact0, order), dt = _timed(run)
    ok = err <= TOL_DALEMBERT and exact0 and order >= 1
    assert accept(3, ok, f"d'Alembert err {err:.1e}, u_L(0)=phi {exact0}, "
                         f"velocity order {order:.2f} ({dt:.1f}s)")


def test_criterion_04_two_solvers(accept):
    (gaps, dt) = _timed(lambda: [two_solver_difference(N) for N in (32, 64, 128)])
    ok = all(g < TOL_TWO_SOLVER for g in gaps) and gaps[0] > gaps[1] > gaps[2]
    txt = ", ".join(f"N={N}: {g:.2e}" for N, g in zip((32, 64, 128), gaps))
    assert accept(4, ok, f"rel L-inf {txt} ({dt:.1f}s)")


def _fd_T(profile, data, eps, p, dr, T_max, R_extra=20.0):
    res = fd_solve(profile, data, eps, p,
                   FdConfig(dr=dr, cfl=0.9, R_max=T_max + R_extra, T_max=T_max))
    return res.T_blow if res.status == BLEWUP else None


def test_criterion_05_subcritical_scaling(accept):
    def run():
        eps = list(np.geomspace(0.4, 0.05, 8))
        cfg = {"params": {"p": 2, "mu": 0, "kappa": 3}, "data": {"family": "BLOWUP_SLAB"},
               "sweep": {"eps": eps, "method": "FD", "T_max_coef": 100.0, "T_max_power": -2.0},
               "grid": {"dr": 0.2, "cfl": 0.9, "R_extra": 20.0}}
        recs = sweep(cfg)
        rep = fit(recs, "POWER")
        prof, data = model_profile(0.0), blowup_family(3.0)
        changes = []
        for r in recs[:2]:
            Tf = _fd_T(prof, data, r.eps, 2.0, 0.1, 1.5 * r.T)
            changes.append(abs(Tf - r.T) / Tf if Tf else math.inf)
        return recs, rep, changes

    (recs, rep, changes), dt = _timed(run)
    ok = (all(r.usable for r in recs) and compare_with_theory(rep, TOL_SCALING) == "PASS"
          and max(changes) <= TOL_REFINE)
    assert accept(5, ok, f"exponent {rep.fitted_exponent:.4f} vs {rep.theory_exponent:.4f} "
                         f"(rel {rep.rel_error:.3f}, R2 {rep.r_squared:.5f}), "
                         f"refine change {max(changes):.3f} ({dt:.0f}s)")


def test_criterion_06_subfujita_scaling(accept):
    pr = ProblemParams(2.0, 0.0, 0.5)

    def run():
        eps = list(np.geomspace(0.4, 0.05, 8))
        cfg = {"params": {"p": 2, "mu": 0, "kappa": 0.5}, "data": {"family": "BLOWUP_SLAB"},
               "sweep": {"eps": eps, "method": "FD", "T_max": 200.0},
               "grid": {"dr": 0.2, "cfl": 0.9}}
        recs = sweep(cfg)
        rep = fit(recs, "POWER")
        taus = np.array([j_threshold_tau(pr, e) for e in eps])
        J_ok = all(j_functional(pr, e, CERT["E"], 1.5, t, t / 2) >= 2 * (1 - 1e-12)
                   for e, t in zip(eps, taus))
        slope = np.polyfit(np.log(eps), np.log(taus), 1)[0]
        return recs, rep, slope, J_ok

    (recs, rep, slope, J_ok), dt = _timed(run)
    theory = -(pr.p - 1) / gamma_f(pr.p, pr.kappa)
    ok = (all(r.usable for r in recs) and compare_with_theory(rep, TOL_SCALING) == "PASS"
          and abs(slope - theory) <= 1e-9 and J_ok)
    assert accept(6, ok, f"FD exponent {rep.fitted_exponent:.4f} vs {theory:.4f} "
                         f"(rel {rep.rel_error:.3f}), certificate slope {slope:.10f}, "
                         f"J>=2 {J_ok} ({dt:.1f}s)")


def test_criterion_07_global_regime(accept):
    pr = ProblemParams(3.0, 2.0, 3.0)
    data = decay_family(3.0)

    def run():
        rows = {}
        for N in (64, 128):
            grid = ConeGrid.make(8.0, 8.0, N)
            ke = KernelEvaluator(model_profile(2.0), grid.T + grid.R + 5)
            sm = smallness_eps0(ke, data, pr, grid)
            eps = min(1e-4, sm["eps0"] / 2)
            out = []
            for e in (eps, 2 * eps):
                o = picard_solve(ke, data, e, pr, grid)
                out.append((o.status, weighted_norm1(o.field, pr) / (2 * e * sm["C0"]),
                            check_pointwise_bound(o.field, pr)["C_hat"]))
            rows[N] = (sm, eps, out)
        return rows

    rows, dt = _timed(run)
    conv = all(s == CONVERGED for _, _, out in rows.values() for s, _, _ in out)
    norm_ok = all(q <= 1 for _, _, out in rows.values() for _, q, _ in out)
    C64, C128 = rows[64][2][0][2], rows[128][2][0][2]
    refine = abs(C128 - C64) / C128
    ratio = rows[128][2][1][2] / rows[128][2][0][2]
    finite = all(math.isfinite(c) for _, _, out in rows.values() for _, _, c in out)
    ok = conv and norm_ok and finite and refine <= TOL_REFINE and abs(ratio - 2) <= 0.1
    eps0 = rows[128][0]["eps0"]
    assert accept(7, ok, f"eps={rows[128][1]:.0e} (eps0 {eps0:.3f}), CONVERGED {conv}, "
                         f"norm/2epsC0 <= {max(q for _, _, o in rows.values() for _, q, _ in o):.3f}, "
                         f"C_hat refine {refine:.1e}, ratio {ratio:.4f} ({dt:.1f}s)")


def test_criterion_08_pnu1(accept):
    pr = ProblemParams(2.0, 0.0, 1.5)
    data = blowup_family(1.5)
    prof = model_profile(0.0)

    def run():
        rows = []
        for eps in (0.1, 0.07, 0.05):
            b = solve_b(eps, 2.0, 0.0)
            T_fd = _fd_T(prof, data, eps, 2.0, 0.2, 8 * b)
            T = 1.3 * T_fd
            grid = ConeGrid.make(T, 20.0, int(round((T + 20.0) / 0.5)))
            ke = KernelEvaluator(prof, grid.T + grid.R + 5)
            lo, hi, best = existence_horizon(linearized_solve, ke, data, eps, pr, grid, 2000)
            rows.append((eps, b, lo / b, T_fd / b, best is not None and best.status == CONVERGED))
        return rows

    rows, dt = _timed(run)
    cs = [r[2] for r in rows]
    Cs = [r[3] for r in rows]
    c, C = min(cs), max(Cs)
    ok = (all(r[4] for r in rows) and all(a < b for a, b in zip(cs, Cs)) and c < C
          and max(cs) / min(cs) <= TOL_C8_SPREAD and max(Cs) / min(Cs) <= TOL_C8_SPREAD)
    txt = ", ".join(f"eps {e}: {a:.2f}<{b_:.2f}" for e, _, a, b_, _ in rows)
    assert accept(8, ok, f"T_lin/b < T_fd/b: {txt}; c={c:.2f} < C={C:.2f} ({dt:.0f}s)")


def test_criterion_09_lemma_lab(accept):
    reports, dt = _timed(lambda: run_all({"n": 1000}, seed=0))
    ok = all(r.passed for r in reports) and all(r.n >= 1000 for r in reports)
    txt = ", ".join(f"{r.name} {'ok' if r.passed else 'FAIL'}" for r in reports)
    assert accept(9, ok, f"{txt} ({dt:.2f}s)")


def test_criterion_10_solve_b(accept):
    def run():
        worst, mono = 0.0, True
        for p, mu in ((2.0, 0.0), (1.5, 1.0), (1.2, 2.0)):
            eps = np.geomspace(1e-3, 1.0, 20)
            bs = [solve_b(e, p, mu) for e in eps]
            worst = max(worst, max(b_residual(b, e, p, mu) for b, e in zip(bs, eps)))
            mono &= bool(np.all(np.diff(bs) < 0))
        return worst, mono

    (worst, mono), dt = _timed(run)
    ok = worst < TOL_B_RES and mono
    assert accept(10, ok, f"max residual {worst:.1e}, strictly monotone {mono} ({dt:.3f}s)")


def test_criterion_11_functional(accept):
    def run():
        eps = np.geomspace(0.02, 0.1, 5)
        T0 = np.array([functional_lifespan(None, e, theta=0.0, p=2.0) for e in eps])
        s0 = np.polyfit(np.log(eps), np.log(T0), 1)[0]
        T1 = np.array([functional_lifespan(None, e, theta=1.0, p=2.0) for e in eps])
        x, y = np.log(eps), np.log(np.log(T1))
        m, c = np.polyfit(x, y, 1)
        r2 = 1 - np.sum((y - m * x - c) ** 2) / np.sum((y - y.mean()) ** 2)
        return s0, m, r2

    (s0, m1, r2), dt = _timed(run)
    theory = -(2.0 - 1) * 1.0
    ok = abs(s0 - theory) / abs(theory) <= TOL_THETA0 and r2 > R2_THETA1
    assert accept(11, ok, f"theta=0 slope {s0:.4f} vs {theory:.1f}; theta=1 log-log fit "
                          f"slope {m1:.3f}, R2 {r2:.5f} ({dt:.1f}s)")
