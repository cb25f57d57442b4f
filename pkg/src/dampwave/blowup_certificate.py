"""Constructive blow-up certificates.

Iterated lower bounds

    u >= C_n (t-r-T0)^{a_n} / (r^{mu/2} (t-r)^{b_n})

are pushed through the J functional to get an explicit time tau after which
u(tau, tau/2) cannot stay finite. The p*nu = 1 case goes through b(eps), and
the critical log case through the integral inequality for <u>(rho).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import AccuracyError, DomainError, RegimeError, UsageError
from .exponents import (ProblemParams, fujita_exponent, gamma_f, gamma_s, solve_b,
                        strauss_exponent)

# Frozen defaults; see calibrate_E for how E was obtained.
DEFAULTS = {
    "C": 1.0,
    "M": 1.0,
    "E": 4.8685,
    "E1_tilde": 0.5,
    "C1": 1.0,
    "C2": 1.0,
}


class EpsilonTooLarge(DomainError):
    """The certificate needs a smaller eps for its size condition."""


@dataclass
class IterationState:
    a: np.ndarray
    b: np.ndarray
    logC: np.ndarray
    n: int
    meta: dict = field(default_factory=dict)


def lower_bound_E(params: ProblemParams, C=None, M=None):
    """E with log C_n >= p^n log(eps E) for the sequence started at M eps."""
    C = DEFAULTS["C"] if C is None else C
    M = DEFAULTS["M"] if M is None else M
    p, mu = params.p, params.mu
    A = 2 / (p - 1) + mu / 2 + 1
    D = min(C / (A * p) ** 2, 1.0)
    return math.exp(math.log(M) + math.log(D) / (p - 1) - 2 * math.log(p) / (p - 1) ** 2)


def iterate_bounds(params: ProblemParams, eps, T0, n_max, C=None, M=None, case="i") -> IterationState:
    """Run the exponent and coefficient recursions in log space.

    case 'i' starts from (mu/2+1, kappa, M eps); case 'ii' (p*nu = 1) from
    (1, (mu/2+1)(p-1), M log(T0/2) eps^p).
    """
    if n_max < 1:
        raise UsageError("n_max must be at least 1")
    if not eps > 0 or not T0 > 1:
        raise DomainError("need eps > 0 and T0 > 1")
    C = DEFAULTS["C"] if C is None else C
    M = DEFAULTS["M"] if M is None else M
    p, mu, kappa = params.p, params.mu, params.kappa
    a = np.empty(n_max + 1)
    b = np.empty(n_max + 1)
    logC = np.empty(n_max + 1)
    if case == "i":
        a[0], b[0], logC[0] = mu / 2 + 1, kappa, math.log(M * eps)
    elif case == "ii":
        if T0 <= 2:
            raise DomainError("case ii needs T0 > 2")
        a[0], b[0] = 1.0, (mu / 2 + 1) * (p - 1)
        logC[0] = math.log(M) + math.log(math.log(T0 / 2)) + p * math.log(eps)
    else:
        raise UsageError(f"unknown case {case!r}")
    lc = math.log(C)
    for k in range(n_max):
        a[k + 1] = p * a[k] + 2
        b[k + 1] = p * b[k] + (mu / 2 + 1) * (p - 1)
        logC[k + 1] = lc + p * logC[k] - 2 * math.log(p * a[k] + 2)
    return IterationState(a, b, logC, n_max, {"C": C, "M": M, "case": case, "eps": eps, "T0": T0})


def closed_form_ab(params: ProblemParams, n):
    p, mu, kappa = params.p, params.mu, params.kappa
    n = np.asarray(n, dtype=float)
    a = (2 / (p - 1) + mu / 2 + 1) * p ** n - 2 / (p - 1)
    b = (kappa + mu / 2 + 1) * p ** n - mu / 2 - 1
    return a, b


def j_functional(params: ProblemParams, eps, E, T0, t, r):
    p, mu, kappa = params.p, params.mu, params.kappa
    s = t - r
    return eps * E * (s - T0) ** (2 / (p - 1) + mu / 2 + 1) * s ** (-kappa - mu / 2 - 1)


def j_threshold_tau(params: ProblemParams, eps, E=None, T0=1.5):
    """tau = (E1 eps / 2)^(-(p-1)/gamma_F), E1 = 2^(kappa - 4/(p-1) - mu/2 - 1) E.

    Checks tau >= 4 T0 and J(tau, tau/2) >= 2 at the returned value.
    """
    E = DEFAULTS["E"] if E is None else E
    p, mu, kappa = params.p, params.mu, params.kappa
    gf = gamma_f(p, kappa)
    if not p < fujita_exponent(kappa) or gf <= 0:
        raise RegimeError("the J threshold needs 1 < p < p_F(kappa)")
    if not (eps > 0 and E > 0 and T0 > 0):
        raise DomainError("eps, E and T0 must be positive")
    E1 = 2 ** (kappa - 4 / (p - 1) - mu / 2 - 1) * E
    log_tau = -(p - 1) / gf * math.log(0.5 * E1 * eps)
    tau = math.exp(log_tau)
    if tau < 4 * T0:
        raise EpsilonTooLarge(f"tau = {tau:.4g} < 4 T0; eps too large")
    J = j_functional(params, eps, E, T0, tau, tau / 2)
    if not J >= 2 * (1 - 1e-12):
        raise AccuracyError(f"J(tau, tau/2) = {J} < 2", estimate=J)
    return tau


def j_tilde(params: ProblemParams, eps, E_tilde, T0, t, r):
    p, mu = params.p, params.mu
    s = t - r
    return (E_tilde * eps ** p * math.log(T0 / 2)
            * (s - T0) ** ((p + 1) / (p - 1)) * s ** (-(mu / 2 + 1) * p))


def pnu1_certificate_tau(params: ProblemParams, eps, E1_tilde=None):
    """tau = 4 T0 with T0 = 4 E1~^(-2(p-1)/gamma_S) b(eps).

    J~ uses the constant that makes its lower bound at (tau, tau/2) an
    equality, then the definition of b(eps) turns that bound into 2.
    """
    E1 = DEFAULTS["E1_tilde"] if E1_tilde is None else E1_tilde
    p, mu = params.p, params.mu
    if abs(p * params.nu - 1) > 1e-9:
        raise RegimeError("this certificate needs p*nu = 1")
    ps = strauss_exponent(3 + mu)
    if not 1 < p < ps:
        raise RegimeError("this certificate needs 1 < p < p_S(3+mu)")
    if not 0 < E1 < 1:
        raise DomainError("E1_tilde must lie in (0, 1)")
    gs = gamma_s(p, 3 + mu)
    b = solve_b(eps, p, mu)
    T0 = 4 * E1 ** (-2 * (p - 1) / gs) * b
    if not T0 / 2 >= 1 + b:
        raise EpsilonTooLarge("T0/2 < 1 + b(eps); eps too large")
    tau = 4 * T0
    q = gs / (2 * (p - 1))
    E_tilde = 2 * E1 * 2 ** ((mu / 2 + 1) * p) * 4 ** (-q)
    J = j_tilde(params, eps, E_tilde, T0, tau, tau / 2)
    bound = 2 * E1 * eps ** p * (T0 / 4) ** q * math.log(T0 / 2)
    if not (J >= bound * (1 - 1e-12) and bound >= 2 * (1 - 1e-10)):
        raise AccuracyError(f"J~(tau, tau/2) = {J}, bound {bound}", estimate=J)
    return tau


def functional_theory_exponent(p, alpha, beta, theta):
    """Exponent of eps in log T* (theta = 1) or in T* (theta < 1)."""
    base = (p - 1) * alpha + beta
    return -base if theta == 1 else -base / (1 - theta)


def functional_lifespan(params: ProblemParams = None, eps=0.1, C1=None, C2=None, alpha=1.0,
                        beta=0.0, theta=None, p=None, ds=2e-4, s_max=700.0, f_cap=1e12):
    """Blow-up point of the extremal solution of

        f(y) = max(C1 eps^alpha, C2 eps^beta int_1^y (1 - xi/y) f^p xi^-theta dxi).

    Marches on a grid uniform in log y; the weight vanishes at xi = y, so
    each step is explicit. Returns the y where f first exceeds ``f_cap``, or
    math.inf if that does not happen before log y = s_max.
    """
    if p is None:
        p = params.p
    if theta is None:
        theta = params.p * params.eta
    if theta > 1 + 1e-12:
        raise RegimeError("the functional route needs theta <= 1")
    C1 = DEFAULTS["C1"] if C1 is None else C1
    C2 = DEFAULTS["C2"] if C2 is None else C2
    if not (C1 > 0 and C2 >= 0 and eps > 0):
        raise DomainError("need C1 > 0, C2 >= 0, eps > 0")
    floor = C1 * eps ** alpha
    if C2 == 0:
        return math.inf
    c2 = C2 * eps ** beta
    # A0 = int f^p xi^-theta, A1 = int f^p xi^(1-theta), trapezoid in xi
    A0 = A1 = 0.0
    y_prev, f_prev = 1.0, floor
    g0_prev = f_prev ** p
    g1_prev = g0_prev
    n = int(math.ceil(s_max / ds))
    growth = math.exp(ds)
    for k in range(1, n + 1):
        y = y_prev * growth
        dy = y - y_prev
        # last panel: its right end carries weight (1 - y/y) = 0
        integral = A0 - A1 / y + 0.5 * dy * g0_prev * (1 - y_prev / y)
        f = max(floor, c2 * integral)
        if f >= f_cap or not math.isfinite(f):
            # interpolate the crossing in log f
            if f_prev > 0 and math.isfinite(f) and f > f_prev:
                frac = (math.log(f_cap) - math.log(f_prev)) / (math.log(f) - math.log(f_prev))
                return y_prev * growth ** min(max(frac, 0.0), 1.0)
            return y
        fp = f ** p
        g0 = fp * y ** (-theta)
        g1 = g0 * y
        A0 += 0.5 * dy * (g0_prev + g0)
        A1 += 0.5 * dy * (g1_prev + g1)
        y_prev, f_prev, g0_prev, g1_prev = y, f, g0, g1
    return math.inf


def calibrate_E(params: ProblemParams, eps, T_measured):
    """E for which j_threshold_tau reproduces a measured lifespan at eps."""
    p, mu, kappa = params.p, params.mu, params.kappa
    gf = gamma_f(p, kappa)
    E1 = 2 / eps * T_measured ** (-gf / (p - 1))
    return E1 / 2 ** (kappa - 4 / (p - 1) - mu / 2 - 1)


def certificate_record(params: ProblemParams, eps, method, tau, verified):
    return {"params": {"p": params.p, "mu": params.mu, "kappa": params.kappa},
            "eps": eps, "method": method, "tau": tau, "verified": bool(verified)}
