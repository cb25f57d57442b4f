"""Closed-form exponents, weights and regime classification.

Everything here is a pure function of its arguments. Weight functions accept
numpy arrays and broadcast.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, RegimeError

TIE_TOL = 1e-12

# Lifespan law kinds
POWER = "POWER"
EXP_POWER = "EXP_POWER"
B_OF_EPS = "B_OF_EPS"
NONE = "NONE"

# Regimes
GLOBAL = "GLOBAL"
BLOWUP_CRITICAL = "BLOWUP_CRITICAL"
BLOWUP_SUBCRITICAL = "BLOWUP_SUBCRITICAL"
SLOW_DECAY_SUBFUJITA = "SLOW_DECAY_SUBFUJITA"
UNCLASSIFIED = "UNCLASSIFIED"


def bracket(s):
    """Japanese bracket <s> = (1 + s^2)^(1/2)."""
    return np.sqrt(1.0 + np.square(s))


@dataclass(frozen=True)
class ProblemParams:
    p: float
    mu: float
    kappa: float

    def __post_init__(self):
        if not self.p > 1:
            raise DomainError(f"p must exceed 1, got {self.p}")
        if not self.mu >= 0:
            raise DomainError(f"mu must be non-negative, got {self.mu}")
        if not self.kappa > 0:
            raise DomainError(f"kappa must be positive, got {self.kappa}")

    @property
    def nu(self):
        return self.kappa - self.mu / 2 - 1

    @property
    def eta(self):
        return (self.mu / 2 + 1) * self.p - (self.mu / 2 + 2)

    def derived(self) -> "DerivedExponents":
        return DerivedExponents(
            nu=self.nu,
            eta=self.eta,
            gamma_s=gamma_s(self.p, 3 + self.mu),
            gamma_f=gamma_f(self.p, self.kappa),
            p_strauss=strauss_exponent(3 + self.mu),
            p_fujita=fujita_exponent(self.kappa),
        )


@dataclass(frozen=True)
class DerivedExponents:
    nu: float
    eta: float
    gamma_s: float
    gamma_f: float
    p_strauss: float
    p_fujita: float


def gamma_s(p, n):
    """Strauss quadratic 2 + (n+1)p - (n-1)p^2."""
    return 2 + (n + 1) * p - (n - 1) * p * p


def gamma_f(p, kappa):
    return 2 - (p - 1) * kappa


def strauss_exponent(n):
    """Positive root of gamma_s(., n)."""
    if n <= 1:
        raise DomainError(f"Strauss exponent needs n > 1, got n={n}")
    a = n - 1
    b = n + 1
    # positive root of a p^2 - b p - 2 = 0
    return (b + math.sqrt(b * b + 8 * a)) / (2 * a)


def fujita_exponent(kappa):
    """1 + 2/kappa; math.inf for kappa = 0."""
    if kappa < 0:
        raise DomainError(f"kappa must be >= 0, got {kappa}")
    if kappa == 0:
        return math.inf
    return 1 + 2 / kappa


def psi_weight(beta, alpha):
    """Log weight 1 + log((1+alpha)/(1+|beta|)), defined for |beta| <= alpha."""
    beta = np.asarray(beta, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    if np.any(np.abs(beta) > alpha):
        raise DomainError("psi_weight requires |beta| <= alpha")
    out = 1 + np.log1p(alpha) - np.log1p(np.abs(beta))
    return out if out.ndim else float(out)


def _psi_unchecked(beta, alpha):
    return 1 + np.log1p(alpha) - np.log1p(np.abs(beta))


def phi_weight(rho, s):
    """max{1, <s>^rho}."""
    out = np.maximum(1.0, bracket(s) ** rho)
    return out if np.ndim(out) else float(out)


def solve_b(epsilon, p, mu):
    """Solve b * log(1+b)^(2(p-1)/g) = eps^(-2p(p-1)/g), g = gamma_s(p, 3+mu).

    Bisection in log variables; the left side is strictly increasing in b.
    """
    g = gamma_s(p, 3 + mu)
    if p >= strauss_exponent(3 + mu) or g <= 0:
        raise RegimeError("b(eps) needs 1 < p < p_S(3+mu)")
    if not 0 < epsilon <= 1:
        raise DomainError(f"epsilon must lie in (0, 1], got {epsilon}")
    q = 2 * (p - 1) / g
    log_target = -2 * p * (p - 1) / g * math.log(epsilon)

    def f(b):
        return math.log(b) + q * math.log(math.log1p(b)) - log_target

    lo, hi = 1e-8, 1.0
    while f(hi) < 0:
        lo, hi = hi, 2 * hi
    # relative residual ~ |f|; stop well inside the 1e-10 contract
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        fm = f(mid)
        if abs(fm) < 1e-12:
            return mid
        if fm < 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 4e-16 * hi:
            break
    return 0.5 * (lo + hi)


def b_residual(b, epsilon, p, mu):
    """Relative residual of the defining equation of b(eps)."""
    g = gamma_s(p, 3 + mu)
    lhs = b * math.log1p(b) ** (2 * (p - 1) / g)
    rhs = epsilon ** (-2 * p * (p - 1) / g)
    return abs(lhs - rhs) / rhs


# ---------------------------------------------------------------- weights

def nu_case(nu):
    if nu < 0:
        return "nu<0"
    if nu == 0:
        return "nu=0"
    return "nu>0"


def weight1(t, r, mu, nu):
    """Existence weight w_1(t, r)."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    base = r * bracket(r) ** (-mu / 2)
    if nu < 0:
        tail = bracket(t + r) ** (-1 - nu)
    elif nu == 0:
        tail = _psi_unchecked(t - r, t + r) / bracket(t + r)
    else:
        tail = bracket(t - r) ** (-nu) / bracket(t + r)
    return base * tail


def q_selectors(params: ProblemParams):
    """(q2, q3) for the second weight; q3 only defined when p*nu >= 1."""
    p, eta, nu = params.p, params.eta, params.nu
    pnu = p * nu
    if pnu < 1 - TIE_TOL:
        raise RegimeError("q3 needs p*nu >= 1")
    q2 = 1 if abs(eta) <= TIE_TOL else 0
    q3 = 1 if abs(pnu - 1) <= TIE_TOL else 0
    return q2, q3


def weight2(t, r, params: ProblemParams):
    """Lifespan weight w_2(t, r) used in the p*nu >= 1 analysis."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    q2, q3 = q_selectors(params)
    eta = params.eta
    base = r * bracket(r) ** (-params.mu / 2)
    if eta <= TIE_TOL:
        tail = (_psi_unchecked(t - r, t + r) ** q2
                * np.log(2 + t + r) ** q3
                / bracket(t + r) ** (1 + eta))
    else:
        tail = (np.log(2 + np.abs(t - r)) ** q3
                / (bracket(t + r) * bracket(t - r) ** eta))
    return base * tail


def pointwise_weight(t, r, params: ProblemParams):
    """Right-hand side of the global pointwise bound, without the factor eps.

    The 0 < nu <= 1 gap in the published case list is filled with the
    nu > 0 branch, using min(nu, eta) as the decay rate off the cone.
    """
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    nu, eta = params.nu, params.eta
    base = r * bracket(r) ** (-params.mu / 2)
    if nu < 0:
        tail = bracket(t + r) ** (-1 - nu)
    elif nu == 0:
        tail = _psi_unchecked(t - r, t + r) / bracket(t + r)
    else:
        tail = bracket(t - r) ** (-min(nu, eta)) / bracket(t + r)
    return base * tail


def growth_D1(T, params: ProblemParams):
    p, kappa = params.p, params.kappa
    if p >= fujita_exponent(kappa):
        return 1.0
    return (1 + T) ** (2 - (p - 1) * kappa)


def growth_D2(T, params: ProblemParams):
    p = params.p
    ps = strauss_exponent(3 + params.mu)
    _, q3 = q_selectors(params)
    if p < ps - TIE_TOL:
        return (1 + T) ** (gamma_s(p, 3 + params.mu) / 2) * math.log(2 + T) ** ((p - 1) * q3)
    if abs(p - ps) <= TIE_TOL:
        return math.log(2 + T) ** (1 + (p - 1) * q3)
    raise RegimeError("D2 is defined for 1 < p <= p_S(3+mu)")


# ---------------------------------------------------------------- regimes

@dataclass(frozen=True)
class LifespanLaw:
    kind: str
    exponent: float = math.nan
    text: str = "none"


@dataclass(frozen=True)
class RegimeReport:
    regime: str
    lower_law: LifespanLaw
    upper_law: LifespanLaw
    exponent_value: float
    notes: tuple = field(default_factory=tuple)


def _cmp(x, y):
    """Three-way comparison with the tie band; returns (sign, near_tie)."""
    if math.isinf(y):
        return (-1 if x < y else 0), False
    d = x - y
    if abs(d) <= TIE_TOL:
        return 0, d != 0
    return (1 if d > 0 else -1), False


def classify_regime(params: ProblemParams) -> RegimeReport:
    """Select the lifespan case for (p, mu, kappa).

    Lower laws follow the lifespan lower bound theorem (needs kappa > mu/2);
    upper laws are attached when the blow-up theorems apply to slab data.
    """
    p, mu, kappa = params.p, params.mu, params.kappa
    ps = strauss_exponent(3 + mu)
    pf = fujita_exponent(kappa)
    gs = gamma_s(p, 3 + mu)
    gf = gamma_f(p, kappa)
    pnu = p * params.nu
    notes = []

    s_cmp, s_tie = _cmp(p, ps)
    f_cmp, f_tie = _cmp(p, pf)
    n_cmp, n_tie = _cmp(pnu, 1.0)
    for flag, name in ((s_tie, "p~p_S"), (f_tie, "p~p_F"), (n_tie, "p*nu~1")):
        if flag:
            notes.append(f"tie band: {name} resolved as equality")
    if 0 < params.nu <= 1:
        notes.append("pointwise bound uses the nu>0 weight for 0<nu<=1")

    crit_exp = EXP_POWER, -p * (p - 1), "exp(C eps^-p(p-1))"
    crit_log = EXP_POWER, -(p - 1), "exp(C eps^-(p-1))"
    if s_cmp < 0:
        sub_pow = POWER, -2 * p * (p - 1) / gs, "C eps^(-2p(p-1)/gamma_S)"
    else:
        sub_pow = None
    if gf > 0:
        fuj_pow = POWER, -(p - 1) / gf, "C eps^(-(p-1)/gamma_F)"
    else:
        fuj_pow = None
    b_law = B_OF_EPS, (-2 * p * (p - 1) / gs if gs > 0 else math.nan), "C b(eps)"

    lower = upper = None
    regime = UNCLASSIFIED

    if s_cmp > 0 and f_cmp >= 0:
        regime = GLOBAL
    elif n_cmp > 0 and s_cmp == 0:
        regime, lower, upper = BLOWUP_CRITICAL, crit_exp, crit_exp
    elif n_cmp > 0 and s_cmp < 0:
        regime, lower, upper = BLOWUP_SUBCRITICAL, sub_pow, sub_pow
    elif n_cmp == 0 and s_cmp == 0:
        regime, lower, upper = BLOWUP_CRITICAL, crit_log, crit_log
    elif n_cmp == 0 and s_cmp < 0:
        regime, lower, upper = BLOWUP_SUBCRITICAL, b_law, b_law
    elif n_cmp < 0 and f_cmp < 0:
        regime, lower, upper = SLOW_DECAY_SUBFUJITA, fuj_pow, fuj_pow
    else:
        notes.append("no lifespan case matches")

    if not kappa > mu / 2:
        # both the global and the lower-bound theorems assume kappa > mu/2;
        # the blow-up upper bounds do not
        notes.append("kappa <= mu/2: only upper laws apply")
        lower = None
        if regime == GLOBAL:
            regime = UNCLASSIFIED

    def law(x):
        return LifespanLaw(*x) if x else LifespanLaw(NONE)

    lower_law, upper_law = law(lower), law(upper)
    src = lower_law if lower_law.kind != NONE else upper_law
    return RegimeReport(
        regime=regime,
        lower_law=lower_law,
        upper_law=upper_law,
        exponent_value=src.exponent,
        notes=tuple(notes),
    )
