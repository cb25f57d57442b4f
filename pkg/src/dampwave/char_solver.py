"""Picard iteration for the integral equation on a null-coordinate lattice.

Nodes sit at a = m h, b = n h (a = sigma + y, b = sigma - y) with
|n| <= m <= N_a and m + n <= K, i.e. 0 <= sigma <= T and a <= T + R. The
line n = -m is sigma = 0, the line n = m is the axis y = 0 (u = 0 there).

The Duhamel term at node (M, N), t - r = N h, t + r = M h, factorises as

    1/4 e^{-W(r)} int_{|N|h}^{Mh} e^{2W((a-Nh)/2)} G(a, Nh) da,
    G(a, c) = int_{-a}^{c} e^{-W(y)} F db,

and (a - N h)/2 is the y-coordinate of node (m, N). Both integrals are
cumulative trapezoid sums, so one sweep costs O(N_a^2).
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .coefficients import KernelEvaluator
from .errors import RegimeError, UsageError
from .exponents import (GLOBAL, ProblemParams, classify_regime, growth_D1, nu_case,
                        pointwise_weight, weight1, weight2)
from .initial_data import ReducedData
from .linear_propagator import u_L_many

CONVERGED = "CONVERGED"
DIVERGED = "DIVERGED"
BUDGET_EXHAUSTED = "BUDGET_EXHAUSTED"


@dataclass(frozen=True)
class ConeGrid:
    """Lattice covering 0 <= sigma <= T, sigma + y <= T + R.

    R is nudged so that the top level sigma = T lies on the lattice.
    """
    T: float
    R: float
    N_a: int
    K: int
    h: float

    @classmethod
    def make(cls, T, R, N_a):
        if T <= 0 or R < 0 or N_a < 2:
            raise UsageError("need T > 0, R >= 0 and N_a >= 2")
        K = max(1, int(round(2 * T * N_a / (T + R))))
        h = 2 * T / K
        if K > 2 * N_a:
            raise UsageError("grid too coarse for T")
        return cls(T=float(T), R=float(N_a * h - T), N_a=int(N_a), K=K, h=h)

    @property
    def N_b(self):
        return self.N_a + self.K // 2 + 1

    def refined(self):
        return ConeGrid(T=self.T, R=self.R, N_a=2 * self.N_a, K=2 * self.K, h=self.h / 2)

    def index(self):
        """(m, n) index arrays of the dense storage, shape (N_a+1, N_b)."""
        m = np.arange(self.N_a + 1)[:, None]
        n = np.arange(-self.N_a, self.K // 2 + 1)[None, :]
        return np.broadcast_arrays(m, n)

    def mask(self, K=None):
        K = self.K if K is None else K
        m, n = self.index()
        return (np.abs(n) <= m) & (m + n <= K)

    def coords(self):
        m, n = self.index()
        return 0.5 * (m + n) * self.h, 0.5 * (m - n) * self.h

    def node(self, t, r):
        """Storage index of the node at (t, r); raises if off-lattice."""
        M = (t + r) / self.h
        N = (t - r) / self.h
        Mi, Ni = int(round(M)), int(round(N))
        if abs(M - Mi) > 1e-9 or abs(N - Ni) > 1e-9:
            raise UsageError(f"({t}, {r}) is not a lattice node")
        if not (abs(Ni) <= Mi <= self.N_a and Mi + Ni <= self.K):
            raise UsageError(f"({t}, {r}) lies outside the lattice")
        return Mi, Ni + self.N_a


@dataclass
class ConeField:
    grid: ConeGrid
    u: np.ndarray
    meta: dict = field(default_factory=dict)

    def at(self, t, r):
        return float(self.u[self.grid.node(t, r)])

    def to_csv(self, path):
        sig, y = self.grid.coords()
        mask = self.grid.mask()
        # row-major over sigma levels, then y
        order = np.lexsort((y[mask], sig[mask]))
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["sigma", "y", "u"])
            for s, yy, uu in zip(sig[mask][order], y[mask][order], self.u[mask][order]):
                wr.writerow([repr(float(s)), repr(float(yy)), repr(float(uu))])


@dataclass
class SolveOutcome:
    status: str
    field: ConeField
    iterations: int
    norm_history: list
    T_bracket: Optional[tuple] = None


class ConeOperator:
    """Cached geometry and kernel factors for one lattice."""

    def __init__(self, ke: KernelEvaluator, grid: ConeGrid):
        self.ke = ke
        self.grid = grid
        self.valid = grid.mask()
        self.sigma, self.y = grid.coords()
        yv = np.where(self.valid, self.y, 0.0)
        if yv.max() > ke.R_max:
            raise UsageError("kernel table too short for the lattice")
        W = np.asarray(ke.W(yv), dtype=float)
        self.e_m = np.where(self.valid, np.exp(-W), 0.0)
        self.e_2 = np.where(self.valid, np.exp(2 * W), 0.0)
        self.axis = self.valid & (self.y == 0)
        self.interior = self.valid & (self.y > 0)
        self._pair_b = self.valid[:, :-1] & self.valid[:, 1:]
        self._pair_a = self.valid[:-1, :] & self.valid[1:, :]

    def apply(self, F, valid=None):
        """Duhamel integral of F at every node (restricted to ``valid``)."""
        h = self.grid.h
        if valid is None:
            valid, pair_b, pair_a = self.valid, self._pair_b, self._pair_a
        else:
            pair_b = valid[:, :-1] & valid[:, 1:]
            pair_a = valid[:-1, :] & valid[1:, :]
        g = np.where(valid, self.e_m * F, 0.0)
        inc = 0.5 * h * (g[:, :-1] + g[:, 1:]) * pair_b
        G = np.zeros_like(g)
        np.cumsum(inc, axis=1, out=G[:, 1:])
        H = np.where(valid, self.e_2 * G, 0.0)
        inc = 0.5 * h * (H[:-1, :] + H[1:, :]) * pair_a
        Ic = np.zeros_like(H)
        np.cumsum(inc, axis=0, out=Ic[1:, :])
        return np.where(valid, 0.25 * self.e_m * Ic, 0.0)

    def nonlinearity(self, u, p):
        """|u|^p / y^(p-1), zero on the axis and outside the lattice."""
        a = np.abs(np.where(self.interior, u, 0.0))
        y = np.where(self.interior, self.y, 1.0)
        with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
            out = np.where(a > 0, np.exp(p * np.log(np.where(a > 0, a, 1.0))
                                         - (p - 1) * np.log(y)), 0.0)
        return np.where(self.interior, out, 0.0)


_UL_CACHE: dict = {}


def lattice_u_L(ke: KernelEvaluator, data: ReducedData, grid: ConeGrid, tol=1e-10, chunk=20000):
    """u_L at every lattice node (zero outside)."""
    key = (id(ke), id(data), grid, tol)
    if key in _UL_CACHE:
        return _UL_CACHE[key]
    valid = grid.mask()
    sig, y = grid.coords()
    out = np.zeros(valid.shape)
    ts, rs = sig[valid], y[valid]
    vals = np.empty(ts.size)
    for i in range(0, ts.size, chunk):
        vals[i:i + chunk] = u_L_many(ke, data, ts[i:i + chunk], rs[i:i + chunk], tol)
    out[valid] = vals
    if len(_UL_CACHE) > 16:
        _UL_CACHE.clear()
    _UL_CACHE[key] = out
    return out


def cone_integral(ke: KernelEvaluator, F: ConeField, t, r):
    """Duhamel integral of the node values F.u evaluated at node (t, r)."""
    idx = F.grid.node(t, r)
    op = ConeOperator(ke, F.grid)
    return float(op.apply(F.u)[idx])


def weighted_norm1(field: ConeField, params: ProblemParams, valid=None):
    """sup |u| / w_1 over nodes off the axis."""
    g = field.grid
    sig, y = g.coords()
    sel = g.mask() & (y > 0) if valid is None else valid & (y > 0)
    if not np.any(sel):
        return 0.0
    w = weight1(sig[sel], y[sel], params.mu, params.nu)
    return float(np.max(np.abs(field.u[sel]) / w))


def _norm(u, sel, w):
    if not np.any(sel):
        return 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        val = np.max(np.abs(u[sel]) / w)
    return float(val)


def weighted_norm2(field: ConeField, params: ProblemParams, T=None):
    """sup |v| / w_2 over nodes with sigma <= T."""
    if params.p * params.nu < 1 - 1e-12:
        raise UsageError("the second weighted norm needs p*nu >= 1")
    g = field.grid
    sig, y = g.coords()
    T = g.T if T is None else T
    sel = g.mask() & (y > 0) & (sig <= T + 1e-12)
    try:
        w = weight2(sig[sel], y[sel], params)
    except RegimeError as exc:
        raise UsageError(str(exc)) from exc
    return _norm(field.u, sel, w)


def _rising10(seq):
    if len(seq) < 4:
        return False
    a, b, c, d = seq[-4:]
    return b > a and c > b and d > c and d >= 10 * a


def _diverging(hist, incs):
    """10x norm growth over three iterations, with growing increments.

    The increment condition keeps a scheme started from zero (whose norm
    trivially grows at first) from being flagged while it contracts.
    """
    return _rising10(hist) and incs[-1] > incs[-2] > incs[-3]


def _iterate(op, step, first, norm_w, sel, budget, tol, offset=0.0):
    """Generic fixed-point loop; ``step`` maps an iterate to the next one.

    The norm history tracks ``offset + iterate`` (the full solution), the
    stopping rule the increment relative to the current iterate.
    """
    hist = []
    incs = []
    cur = first
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(1, budget + 1):
            nxt = step(cur)
            if not np.all(np.isfinite(nxt[sel])):
                hist.append(math.inf)
                return DIVERGED, cur, k, hist
            nrm = _norm(offset + nxt, sel, norm_w)
            hist.append(nrm)
            diff = _norm(nxt - cur, sel, norm_w)
            incs.append(diff)
            base = _norm(cur, sel, norm_w)
            cur = nxt
            if diff <= tol * base or (diff == 0 and base == 0):
                return CONVERGED, cur, k, hist
            if not math.isfinite(nrm) or _diverging(hist, incs):
                return DIVERGED, cur, k, hist
    return BUDGET_EXHAUSTED, cur, budget, hist


def _setup(ke, data, eps, params, grid, K_level):
    op = ConeOperator(ke, grid)
    valid = op.valid if K_level is None else grid.mask(K_level)
    uL = eps * lattice_u_L(ke, data, grid)
    uL = np.where(valid, uL, 0.0)
    sel = valid & (op.y > 0)
    return op, valid, uL, sel


def picard_solve(ke, data, eps, params: ProblemParams, grid: ConeGrid, budget=500, tol=1e-10,
                 K_level=None) -> SolveOutcome:
    """u^{k+1} = eps u_L + I(|u^k|^p / y^(p-1)), monitored in the first norm."""
    op, valid, uL, sel = _setup(ke, data, eps, params, grid, K_level)
    w1 = weight1(op.sigma[sel], op.y[sel], params.mu, params.nu)
    p = params.p

    def step(u):
        return uL + op.apply(op.nonlinearity(u, p), valid)

    status, u, k, hist = _iterate(op, step, uL, w1, sel, budget, tol)
    meta = {"eps": eps, "p": p, "mu": params.mu, "kappa": params.kappa,
            "family": data.family, "scheme": "picard", "K_level": K_level}
    return SolveOutcome(status, ConeField(grid, u, meta), k, hist)


def linearized_solve(ke, data, eps, params: ProblemParams, grid: ConeGrid, budget=500, tol=1e-10,
                     K_level=None) -> SolveOutcome:
    """v^{n+1} = I(|eps u_L + v^n|^p / y^(p-1)) from v = 0.

    Monitored in the second norm when p*nu >= 1, otherwise in the first.
    The returned field holds u = eps u_L + v.
    """
    op, valid, uL, sel = _setup(ke, data, eps, params, grid, K_level)
    p = params.p
    if params.p * params.nu >= 1 - 1e-12:
        wn = weight2(op.sigma[sel], op.y[sel], params)
        norm_name = "norm2"
    else:
        wn = weight1(op.sigma[sel], op.y[sel], params.mu, params.nu)
        norm_name = "norm1"

    def step(v):
        return op.apply(op.nonlinearity(uL + v, p), valid)

    status, v, k, hist = _iterate(op, step, np.zeros_like(uL), wn, sel, budget, tol, offset=uL)
    meta = {"eps": eps, "p": p, "mu": params.mu, "kappa": params.kappa,
            "family": data.family, "scheme": "linearized", "norm": norm_name,
            "K_level": K_level}
    return SolveOutcome(status, ConeField(grid, uL + v, meta), k, hist)


def existence_horizon(solver, ke, data, eps, params, grid: ConeGrid, budget=500, tol=1e-10):
    """Bisect the top level sigma = T' at which ``solver`` stops converging.

    Returns (T_lo, T_hi, last converged outcome); T_hi is None when the full
    lattice converges. Stops once T_hi - T_lo <= 2h.
    """
    full = solver(ke, data, eps, params, grid, budget, tol)
    if full.status == CONVERGED:
        return grid.T, None, full
    lo, hi = 0, grid.K
    best = None
    while hi - lo > 4:
        mid = (lo + hi) // 2
        out = solver(ke, data, eps, params, grid, budget, tol, K_level=mid)
        if out.status == CONVERGED:
            lo, best = mid, out
        else:
            hi = mid
    h = grid.h
    return lo * h / 2, hi * h / 2, best


def smallness_eps0(ke, data, params: ProblemParams, grid: ConeGrid):
    """Largest eps meeting 2^p p C1 D1(T) (eps C0)^(p-1) <= 1.

    C0 = ||u_L||_1 on the lattice; C1 is measured as the ratio
    ||I(|u_L|^p / y^(p-1))||_1 / (||u_L||_1^p D1(T)).
    """
    op = ConeOperator(ke, grid)
    uL = lattice_u_L(ke, data, grid)
    C0 = weighted_norm1(ConeField(grid, uL), params)
    p = params.p
    D1 = growth_D1(grid.T, params)
    I = op.apply(op.nonlinearity(uL, p))
    C1 = weighted_norm1(ConeField(grid, I), params) / (C0 ** p * D1)
    eps0 = (2 ** p * p * C1 * D1) ** (-1 / (p - 1)) / C0
    return {"C0": C0, "C1": C1, "D1": D1, "eps0": eps0}


# ------------------------------------------------------------- residual

def prolong(field: ConeField, eps, data: ReducedData):
    """Interpolate a lattice field onto the h/2 lattice."""
    g = field.grid
    fg = g.refined()
    fm, fn = fg.index()
    fvalid = fg.mask()
    out = np.zeros(fvalid.shape)
    u = field.u
    off = g.N_a

    def c(m, n):
        return u[m, n + off]

    mm, nn = fm[fvalid], fn[fvalid]
    vals = np.zeros(mm.size)
    e_m, e_n = (mm % 2 == 0), (nn % 2 == 0)
    sel = e_m & e_n
    vals[sel] = c(mm[sel] // 2, nn[sel] // 2)
    sel = ~e_m & e_n
    vals[sel] = 0.5 * (c((mm[sel] - 1) // 2, nn[sel] // 2) + c((mm[sel] + 1) // 2, nn[sel] // 2))
    sel = e_m & ~e_n
    vals[sel] = 0.5 * (c(mm[sel] // 2, (nn[sel] - 1) // 2) + c(mm[sel] // 2, (nn[sel] + 1) // 2))
    sel = ~e_m & ~e_n & (nn < mm)
    vals[sel] = 0.5 * (c((mm[sel] - 1) // 2, (nn[sel] + 1) // 2)
                       + c((mm[sel] + 1) // 2, (nn[sel] - 1) // 2))
    out[fvalid] = vals
    _, fy = fg.coords()
    axis = fvalid & (fm == fn)
    out[axis] = 0.0
    base = fvalid & (fn == -fm)
    out[base] = eps * np.asarray(data.phi(fy[base]), dtype=float)
    return ConeField(fg, out, dict(field.meta))


def residual(ke, data, eps, params: ProblemParams, field: ConeField):
    """max |u - eps u_L - I(|u|^p/y^(p-1))| / (1 + |u|) at the nodes.

    The Duhamel term is evaluated on the h/2 lattice from the prolonged field,
    so the defect measures discretisation error rather than self-consistency.
    """
    g = field.grid
    if not np.all(np.isfinite(field.u[g.mask()])):
        raise UsageError("field has non-finite values")
    fine = prolong(field, eps, data)
    fop = ConeOperator(ke, fine.grid)
    K_level = field.meta.get("K_level")
    fvalid = fop.valid if K_level is None else fine.grid.mask(2 * K_level)
    fuL = eps * lattice_u_L(ke, data, fine.grid) if eps != 0 else np.zeros(fvalid.shape)
    duh = fop.apply(fop.nonlinearity(fine.u, params.p), fvalid)
    valid = g.mask() if K_level is None else g.mask(K_level)
    m, n = g.index()
    mm, nn = m[valid], n[valid]
    fidx = (2 * mm, 2 * nn + fine.grid.N_a)
    u = field.u[valid]
    d = np.abs(u - fuL[fidx] - duh[fidx]) / (1 + np.abs(u))
    return float(d.max()) if d.size else 0.0


# ------------------------------------------------------- pointwise bound

def check_pointwise_bound(field: ConeField, params: ProblemParams):
    """max |u| / (r <r>^(-mu/2) x decay factor), the global-regime bound
    without its factor eps."""
    rep = classify_regime(params)
    if rep.regime != GLOBAL:
        raise UsageError(f"pointwise bound needs the global regime, got {rep.regime}")
    g = field.grid
    sig, y = g.coords()
    sel = g.mask() & (y > 0)
    w = pointwise_weight(sig[sel], y[sel], params)
    C = float(np.max(np.abs(field.u[sel]) / w)) if np.any(sel) else 0.0
    eps = field.meta.get("eps")
    return {"C_hat": C, "case": nu_case(params.nu),
            "C_hat_over_eps": (C / eps) if eps else None}
