"""Randomised checks of the weighted integral inequalities.

A "<~" inequality holds numerically when the extremal ratio LHS/RHS over a
fresh verification sample stays within 5% of the one found on an independent
calibration sample. Exponents that the implied constant depends on run over
fixed lattices (one constant per lattice cell), each cell getting an equal
share of the samples. Inside a cell the continuous variables come from a
seeded Latin hypercube in log coordinates, and both sample sets also carry
the box vertices, where these ratios typically peak.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.stats import qmc

from .exponents import _psi_unchecked, bracket, phi_weight
from .quadrature import gk_batch

STABILITY = 0.05
QUAD_TOL = 1e-10

K31 = (-3.0, -2.0, -1.0, -0.5, 0.0, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 3.0, 4.0, 5.0)
K32 = (0.0, 1.0, 2.0, 3.0)
K33 = (1.25, 1.5, 2.0, 3.0, 4.0, 5.0)
K34 = (0.0, 0.5, 1.0, 2.0, 3.0, 4.0)
R1_35 = (0.0, 0.5, 0.75, 1.25, 1.5, 2.0, 3.0)
R2_35 = (0.0, 0.5, 1.0, 2.0, 3.0)
RHO1_36 = (0.0, 0.5, 1.0, 2.0, 3.0)
RHO2_36 = (0.0, 0.5, 1.0, 2.0)


@dataclass
class CheckReport:
    name: str
    kind: str
    n: int
    seeds: tuple
    calibration: float
    verification: float
    passed: bool
    boxes: dict = field(default_factory=dict)
    worst: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def _rngs(seed):
    # two non-overlapping streams from one user seed
    return np.random.default_rng([int(seed), 0]), np.random.default_rng([int(seed), 1])


def _design(rng, cells, n, d, vertices):
    """Per-cell Latin hypercube points in [0, 1]^d plus fixed vertices.

    Returns (cell value array of shape (N, len(cell)), u of shape (N, d)).
    """
    cells = [tuple(np.atleast_1d(c)) for c in cells]
    m = max(2, -(-n // len(cells)))
    V = np.asarray(vertices, dtype=float).reshape(-1, d)
    cv, us = [], []
    for c in cells:
        u = qmc.LatinHypercube(d=d, seed=rng).random(m)
        u = np.vstack([u, V])
        us.append(u)
        cv.append(np.tile(np.asarray(c, float), (u.shape[0], 1)))
    return np.vstack(cv), np.vstack(us)


def _logmap(u, lo, hi):
    return np.exp(math.log(lo) + u * (math.log(hi) - math.log(lo)))


def _grid(*axes):
    return [c for c in np.array(np.meshgrid(*axes, indexing="ij")).reshape(len(axes), -1).T]


def _safe_ratio(lhs, rhs):
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where((lhs == 0) & (rhs == 0), 0.0, lhs / rhs)


def _cuts(lo, hi, pts):
    """Breakpoint matrix; points outside (lo, hi) become NaN."""
    bp = np.stack([np.broadcast_to(np.asarray(p, float), lo.shape) for p in pts], axis=1)
    return np.where((bp > lo[:, None]) & (bp < hi[:, None]), bp, np.nan)


def _integrate(f, lo, hi, pts=()):
    lo = np.asarray(lo, float)
    hi = np.asarray(hi, float)
    out = np.zeros(lo.size)
    nz = hi > lo
    if np.any(nz):
        bp = _cuts(lo[nz], hi[nz], [np.asarray(p, float)[nz] if np.ndim(p) else p for p in pts]) \
            if pts else None
        idx = np.flatnonzero(nz)
        val, _ = gk_batch(lambda x, o: f(x, idx[o]), lo[nz], hi[nz], abstol=1e-300,
                          reltol=QUAD_TOL, breakpoints=bp)
        out[nz] = val
    return out


# ------------------------------------------------------------ check_lemma_31

def lemma31_lhs(a, b, k):
    a, b, k = map(np.atleast_1d, (a, b, k))
    a, b, k = [np.asarray(v, float) for v in np.broadcast_arrays(a, b, k)]
    return _integrate(lambda x, i: bracket(x) ** (-k[i][:, None]), a, b,
                      pts=[a + 1, a + 10, a + 100])


def lemma31_rhs(a, b, k):
    a, b, k = [np.asarray(v, float) for v in np.broadcast_arrays(a, b, k)]
    out = np.where(k < 1, bracket(b) ** (-k),
                   np.where(k == 1, _psi_unchecked(a, b) / bracket(b),
                            bracket(a) ** (1 - k) / bracket(b)))
    return (b - a) * out


def _sample31(rng, n):
    c, u = _design(rng, K31, n, 2, [[0, 0], [1, 0]])
    b = _logmap(u[:, 0], 1e-3, 1e4)
    return {"a": b * u[:, 1], "b": b, "k": c[:, 0]}


def _ratio31(s):
    return _safe_ratio(lemma31_lhs(s["a"], s["b"], s["k"]), lemma31_rhs(s["a"], s["b"], s["k"]))


# ------------------------------------------------------------ check_lemma_32

def lemma32_lhs(alpha, k1, k2, k3):
    al, k1, k2, k3 = [np.asarray(v, float) for v in np.broadcast_arrays(alpha, k1, k2, k3)]
    al, k1, k2, k3 = (np.atleast_1d(v) for v in (al, k1, k2, k3))

    def f(x, i):
        A = al[i][:, None]
        return (bracket(A + x) ** (-(k1[i] + k2[i])[:, None])
                * bracket(x) ** (-(k1[i] + k3[i])[:, None]))

    return _integrate(f, -al, al, pts=[-al + 1, -al + 10, -1.0, 0.0, 1.0])


def lemma32_rhs(alpha, k1, k2, k3):
    al, k1, k2, k3 = [np.asarray(v, float) for v in np.broadcast_arrays(alpha, k1, k2, k3)]
    K = k1 + k2 + k3
    tail = np.where(np.abs(K - 1) < 1e-12, np.log(2 + al), phi_weight(1 - K, al))
    return bracket(al) ** (-k1) * tail


def _sample32(rng, n):
    c, u = _design(rng, _grid(K32, K32, K32), n, 1, [[0], [1]])
    al = _logmap(u[:, 0], 1e-3, 1e3)
    return {"alpha": al, "k1": c[:, 0], "k2": c[:, 1], "k3": c[:, 2]}


def _ratio32(s):
    args = (s["alpha"], s["k1"], s["k2"], s["k3"])
    return lemma32_lhs(*args) / lemma32_rhs(*args)


# ------------------------------------------------------------ check_lemma_33

def lemma33_lhs(a, b, k):
    a, b, k = [np.atleast_1d(np.asarray(v, float)) for v in np.broadcast_arrays(a, b, k)]
    return _integrate(lambda x, i: (1 + x) ** (-k[i][:, None]) * np.log1p(x), a, b,
                      pts=[a + 1, a + 10, a + 100])


def lemma33_rhs(a, b, k):
    a, b, k = [np.asarray(v, float) for v in np.broadcast_arrays(a, b, k)]
    return (b - a) / bracket(b) * bracket(a) ** (1 - k) * np.log(2 + a)


def _sample33(rng, n):
    c, u = _design(rng, K33, n, 2, [[0, 0], [1, 0]])
    b = _logmap(u[:, 0], 1e-3, 1e4)
    return {"a": b * u[:, 1], "b": b, "k": c[:, 0]}


def _ratio33(s):
    ok = s["b"] > s["a"]
    out = np.zeros(s["a"].size)
    args = (s["a"][ok], s["b"][ok], s["k"][ok])
    out[ok] = lemma33_lhs(*args) / lemma33_rhs(*args)
    return out


# ------------------------------------------------------------ check_lemma_34

def lemma34_lhs(alpha, a, k):
    al, a, k = [np.atleast_1d(np.asarray(v, float)) for v in np.broadcast_arrays(alpha, a, k)]
    return _integrate(lambda x, i: _psi_unchecked(x, al[i][:, None]) ** k[i][:, None], a, al,
                      pts=[a + 1, a + 10])


def _sample34(rng, n):
    c, u = _design(rng, K34, n, 2, [[0, 0], [1, 0]])
    al = _logmap(u[:, 0], 1e-3, 1e4)
    return {"alpha": al, "a": al * u[:, 1], "k": c[:, 0]}


def _ratio34(s):
    ok = s["alpha"] > s["a"]
    out = np.zeros(s["a"].size)
    out[ok] = (lemma34_lhs(s["alpha"][ok], s["a"][ok], s["k"][ok])
               / (s["alpha"][ok] - s["a"][ok]))
    return out


# ------------------------------------------------------------ check_lemma_35

def lemma35_lhs(alpha, r1, r2):
    al, r1, r2 = [np.atleast_1d(np.asarray(v, float)) for v in np.broadcast_arrays(alpha, r1, r2)]

    def f(x, i):
        A = al[i][:, None]
        return bracket(A + x) ** (-r1[i][:, None]) * _psi_unchecked(x, A) ** r2[i][:, None]

    return _integrate(f, -al, al, pts=[-al + 1, -al + 10, -1.0, 0.0, 1.0])


def lemma35_rhs(alpha, r1):
    al, r1 = np.broadcast_arrays(np.asarray(alpha, float), np.asarray(r1, float))
    return phi_weight(1 - r1, al)


def _sample35(rng, n):
    c, u = _design(rng, _grid(R1_35, R2_35), n, 1, [[0], [1]])
    al = _logmap(u[:, 0], 1e-3, 1e3)
    return {"alpha": al, "r1": c[:, 0], "r2": c[:, 1]}


def _ratio35(s):
    return lemma35_lhs(s["alpha"], s["r1"], s["r2"]) / lemma35_rhs(s["alpha"], s["r1"])


# ------------------------------------------------------------ check_lemma_36

def lemma36_lhs(a, b, rho1, rho2):
    """int_a^b (y-a)^rho2 y^-rho1 dy.

    On [a, min(b, 2a)] the substitution y - a = X v^(1/(rho2+1)) removes the
    endpoint singularity; the rest is done in log y.
    """
    a, b, r1, r2 = [np.atleast_1d(np.asarray(v, float)) for v in np.broadcast_arrays(a, b, rho1, rho2)]
    c = np.minimum(b, 2 * a)
    X = c - a
    q = 1.0 / (r2 + 1)

    def near(v, i):
        return (a[i][:, None] + X[i][:, None] * v ** q[i][:, None]) ** (-r1[i][:, None])

    def far(z, i):
        y = np.exp(z)
        return (y - a[i][:, None]) ** r2[i][:, None] * y ** (1 - r1[i][:, None])

    n = a.size
    inner = X ** (r2 + 1) / (r2 + 1) * _integrate(near, np.zeros(n), np.ones(n))
    lc, lb = np.log(c), np.log(b)
    outer = _integrate(far, lc, lb, pts=[lc + 1, lc + 3])
    return inner + outer


def lemma36_rhs(a, b, rho1, rho2):
    a, b, r1, r2 = [np.asarray(v, float) for v in np.broadcast_arrays(a, b, rho1, rho2)]
    return a ** (-r1 + r2 + 1) * (1 - a / b) ** (r2 + 1)


def _sample36(rng, n):
    c, u = _design(rng, _grid(RHO1_36, RHO2_36), n, 2, [[0, 0], [0, 1], [1, 0], [1, 1]])
    a = _logmap(u[:, 0], 1e-2, 1e2)
    B = 1 + _logmap(u[:, 1], 1e-4, 1e4)
    return {"a": a, "b": a * B, "rho1": c[:, 0], "rho2": c[:, 1]}


def _ratio36(s):
    args = (s["a"], s["b"], s["rho1"], s["rho2"])
    return lemma36_lhs(*args) / lemma36_rhs(*args)


# ------------------------------------------------------------ protocol

_BOXES = {
    "3.1": {"k": K31, "b": (1e-3, 1e4), "a/b": (0.0, 1.0)},
    "3.2": {"k1,k2,k3": K32, "alpha": (1e-3, 1e3)},
    "3.3": {"k": K33, "b": (1e-3, 1e4), "a/b": (0.0, 1.0)},
    "3.4": {"k": K34, "alpha": (1e-3, 1e4), "a/alpha": (0.0, 1.0)},
    "3.5": {"r1": R1_35, "r2": R2_35, "alpha": (1e-3, 1e3)},
    "3.6": {"rho1": RHO1_36, "rho2": RHO2_36, "a": (1e-2, 1e2), "b/a - 1": (1e-4, 1e4)},
}


def _n(sample_spec):
    if sample_spec is None:
        return 1000
    if isinstance(sample_spec, dict):
        return int(sample_spec.get("n", 1000))
    return int(sample_spec)


def _run(name, sampler, ratio, sample_spec, seed, kind="max"):
    cal_rng, ver_rng = _rngs(seed)
    cal = sampler(cal_rng, _n(sample_spec))
    ver = sampler(ver_rng, _n(sample_spec))
    n = int(next(iter(ver.values())).size)
    rc = ratio(cal)
    rv = ratio(ver)
    if kind == "max":
        c, v = float(np.max(rc)), float(np.max(rv))
        ok = v <= (1 + STABILITY) * c and math.isfinite(v)
        i = int(np.argmax(rv))
    else:
        c, v = float(np.min(rc)), float(np.min(rv))
        ok = v >= (1 - STABILITY) * c and v > 0
        i = int(np.argmin(rv))
    worst = {key: float(val[i]) for key, val in ver.items()}
    return CheckReport(name, kind, n, (int(seed), 0, 1), c, v, bool(ok), _BOXES[name], worst)


def check_lemma_31(sample_spec=None, seed=0):
    return _run("3.1", _sample31, _ratio31, sample_spec, seed)


def check_lemma_32(sample_spec=None, seed=0):
    return _run("3.2", _sample32, _ratio32, sample_spec, seed)


def check_lemma_33(sample_spec=None, seed=0):
    return _run("3.3", _sample33, _ratio33, sample_spec, seed)


def check_lemma_34(sample_spec=None, seed=0):
    return _run("3.4", _sample34, _ratio34, sample_spec, seed)


def check_lemma_35(sample_spec=None, seed=0):
    return _run("3.5", _sample35, _ratio35, sample_spec, seed)


def check_lemma_36(sample_spec=None, seed=0):
    return _run("3.6", _sample36, _ratio36, sample_spec, seed, kind="min")


ALL_CHECKS = {
    "3.1": check_lemma_31,
    "3.2": check_lemma_32,
    "3.3": check_lemma_33,
    "3.4": check_lemma_34,
    "3.5": check_lemma_35,
    "3.6": check_lemma_36,
}


def run_all(sample_spec=None, seed=0):
    return [fn(sample_spec, seed) for fn in ALL_CHECKS.values()]
