"""Damping profiles, the potential they induce, and the transport kernel.

A profile is the coefficient w(r) with 2w(r) = mu/r + O(r^(-1-delta)) at
infinity. The kernel along characteristics is

    E(t, r, y) = exp(-W(r) + 2 W((y - t + r)/2) - W(y)),   W(r) = int_0^r w,

evaluated in log space.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator
from scipy.stats import qmc

from .errors import DomainError, UsageError
from .exponents import bracket

MODEL = "MODEL"
EXACT_INVERSE = "EXACT_INVERSE"
TABULATED = "TABULATED"


@dataclass(frozen=True)
class DampingProfile:
    mu: float
    delta: float
    r0: float
    w: Callable
    wprime: Callable
    kind: str
    K: float = 1.0
    W_exact: Optional[Callable] = None
    meta: dict = field(default_factory=dict)


def model_profile(mu) -> DampingProfile:
    """2w(r) = mu/(1+r): smooth at the origin, W(r) = (mu/2) log(1+r)."""
    if mu < 0:
        raise DomainError(f"mu must be non-negative, got {mu}")
    mu = float(mu)

    def w(r):
        return 0.5 * mu / (1.0 + np.asarray(r, dtype=float))

    def wprime(r):
        return -0.5 * mu / (1.0 + np.asarray(r, dtype=float)) ** 2

    def W(r):
        return 0.5 * mu * np.log1p(np.asarray(r, dtype=float))

    return DampingProfile(mu=mu, delta=1.0, r0=1.0, w=w, wprime=wprime,
                          kind=MODEL, K=mu, W_exact=W)


def exact_inverse_profile(mu, r0=1.0) -> DampingProfile:
    """w = mu/(2r) for r >= r0, continued by the C^1 quadratic below r0.

    The inner piece a + b r^2 matches c/r in value and slope at r0.
    """
    if mu < 0:
        raise DomainError(f"mu must be non-negative, got {mu}")
    if r0 <= 0:
        raise DomainError("r0 must be positive")
    mu = float(mu)
    c = 0.5 * mu

    # inner piece a + b r^2 matching c/r and -c/r^2 at r0
    b_in = -0.5 * c / r0 ** 3
    a_in = c / r0 - b_in * r0 ** 2

    def w(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r >= r0, r, r0)
        return np.where(r >= r0, c / safe, a_in + b_in * r * r)

    def wprime(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r >= r0, r, r0)
        return np.where(r >= r0, -c / safe ** 2, 2 * b_in * r)

    W0 = a_in * r0 + b_in * r0 ** 3 / 3

    def W(r):
        r = np.asarray(r, dtype=float)
        safe = np.where(r >= r0, r, r0)
        return np.where(r >= r0, W0 + c * np.log(safe / r0),
                        a_in * r + b_in * r ** 3 / 3)

    return DampingProfile(mu=mu, delta=1.0, r0=r0, w=w, wprime=wprime,
                          kind=EXACT_INVERSE, K=0.0, W_exact=W)


def tabulated_profile(r, wvals, mu=None, delta=1.0, r0=None, K=None) -> DampingProfile:
    """Profile from samples of w on a strictly increasing grid starting at 0.

    w is interpolated with a monotone cubic; mu defaults to 2 r w(r) at the
    last sample.
    """
    r = np.asarray(r, dtype=float)
    wvals = np.asarray(wvals, dtype=float)
    if r.ndim != 1 or r.size < 4 or r.size != wvals.size:
        raise UsageError("need at least 4 (r, w) samples")
    if r[0] != 0 or np.any(np.diff(r) <= 0):
        raise UsageError("r must start at 0 and increase strictly")
    interp = PchipInterpolator(r, wvals, extrapolate=False)
    dinterp = interp.derivative()
    rmax = r[-1]

    def w(x):
        x = np.asarray(x, dtype=float)
        if np.any(x > rmax) or np.any(x < 0):
            raise DomainError(f"tabulated w defined on [0, {rmax}]")
        return interp(x)

    def wprime(x):
        x = np.asarray(x, dtype=float)
        if np.any(x > rmax) or np.any(x < 0):
            raise DomainError(f"tabulated w defined on [0, {rmax}]")
        return dinterp(x)

    if mu is None:
        mu = float(2 * r[-1] * wvals[-1])
    if r0 is None:
        r0 = float(min(1.0, rmax / 2))
    if K is None:
        tail = r >= r0
        K = float(np.max(np.abs(2 * wvals[tail] - mu / r[tail]) * r[tail] ** (1 + delta)))
    return DampingProfile(mu=float(mu), delta=delta, r0=r0, w=w, wprime=wprime,
                          kind=TABULATED, K=K, meta={"r_max": float(rmax)})


def load_profile_csv(path, **kwargs) -> DampingProfile:
    """Read a two-column CSV with header 'r,w'."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["r", "w"]:
            raise UsageError("profile CSV must have header 'r,w'")
        rows = [(float(row["r"]), float(row["w"])) for row in reader]
    r, w = zip(*rows) if rows else ((), ())
    return tabulated_profile(r, w, **kwargs)


def check_profile(profile: DampingProfile, r_max=1e4, n=400):
    """Sampled check of the asymptotic hypothesis and continuity at 0.

    Returns the worst observed |2w - mu/r| r^(1+delta) on [r0, r_max].
    """
    r_lim = profile.meta.get("r_max", r_max)
    r = np.geomspace(profile.r0, min(r_max, r_lim), n)
    dev = np.abs(2 * profile.w(r) - profile.mu / r) * r ** (1 + profile.delta)
    w_small = profile.w(np.array([0.0, 1e-9, 1e-6]))
    if not np.all(np.isfinite(w_small)) or abs(w_small[0] - w_small[1]) > 1e-6:
        raise DomainError("w is not continuous at the origin")
    return float(np.max(dev))


def potential_from_damping(profile: DampingProfile, r):
    """V(r) = -w'(r) + w(r)^2 for r > 0."""
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise DomainError("potential is evaluated for r > 0 only")
    out = -profile.wprime(r) + profile.w(r) ** 2
    return out if out.ndim else float(out)


def _simpson_cumulative(f, r_max, step):
    """Cumulative integral of f on [0, r_max] by composite Simpson per cell."""
    n = max(2, int(math.ceil(r_max / step)))
    grid = np.linspace(0.0, r_max, n + 1)
    h = grid[1] - grid[0]
    left = f(grid[:-1])
    mid = f(grid[:-1] + 0.5 * h)
    right = f(grid[1:])
    cells = h / 6.0 * (left + 4 * mid + right)
    W = np.concatenate(([0.0], np.cumsum(cells)))
    return grid, W


class KernelEvaluator:
    """Precomputed W on [0, R_max] and the kernel E built from it.

    ``path='table'`` forces the tabulated W (Simpson + cubic Hermite
    interpolation); ``'closed'`` uses the profile's exact W; ``'auto'``
    prefers the exact one when available.
    """

    def __init__(self, profile: DampingProfile, R_max, step=2.5e-3):
        if R_max <= 0:
            raise UsageError("R_max must be positive")
        self.profile = profile
        self.R_max = float(R_max)
        grid, W = _simpson_cumulative(profile.w, self.R_max, step)
        self._grid = grid
        self._W = W
        self._spline = CubicHermiteSpline(grid, W, profile.w(grid))
        self.closed_form = profile.W_exact

    def W_table(self, r):
        r = np.asarray(r, dtype=float)
        if np.any(r > self.R_max * (1 + 1e-12)) or np.any(r < 0):
            raise DomainError(f"W table covers [0, {self.R_max}]")
        return self._spline(np.clip(r, 0.0, self.R_max))

    def W(self, r, path="auto"):
        if path == "closed" or (path == "auto" and self.closed_form is not None):
            if self.closed_form is None:
                raise UsageError("profile has no closed-form W")
            return self.closed_form(np.asarray(r, dtype=float))
        if path in ("auto", "table"):
            return self.W_table(r)
        raise UsageError(f"unknown path {path!r}")

    def log_kernel(self, t, r, y, path="auto"):
        t = np.asarray(t, dtype=float)
        r = np.asarray(r, dtype=float)
        y = np.asarray(y, dtype=float)
        mid = 0.5 * (y - t + r)
        if np.any(mid < -1e-12 * (1 + np.abs(y) + np.abs(t))):
            raise DomainError("kernel needs y >= t - r")
        mid = np.maximum(mid, 0.0)
        if path == "auto" and self.profile.mu == 0 and self.profile.kind == MODEL:
            return np.zeros(np.broadcast(t, r, y).shape)
        return -self.W(r, path) + 2 * self.W(mid, path) - self.W(y, path)

    def kernel(self, t, r, y, path="auto"):
        out = np.exp(self.log_kernel(t, r, y, path))
        return out if np.ndim(out) else float(out)


def kernel_E(ke: KernelEvaluator, t, r, y, path="auto"):
    return ke.kernel(t, r, y, path)


def admissible_samples(n, R, seed=0):
    """Sobol points in [0, R]^3 restricted to y >= t - r, columns (t, r, y)."""
    m = int(math.ceil(math.log2(max(2 * n, 2))))
    pts = qmc.Sobol(d=3, scramble=True, seed=seed).random_base2(m) * R
    keep = pts[:, 2] >= pts[:, 0] - pts[:, 1]
    pts = pts[keep]
    return pts[:n]


def kernel_bound_ratio(ke: KernelEvaluator, samples):
    """Extremes of E(t,r,y) / (<r-t+y>^mu / (<r>^(mu/2) <y>^(mu/2))).

    ``samples`` is an (n, 3) array of (t, r, y) or a dict
    ``{"n": ..., "R": ..., "seed": ...}`` for Sobol sampling.
    """
    if isinstance(samples, dict):
        samples = admissible_samples(samples["n"], samples["R"], samples.get("seed", 0))
    samples = np.asarray(samples, dtype=float).reshape(-1, 3)
    if samples.shape[0] == 0:
        raise UsageError("empty sample set")
    t, r, y = samples.T
    mu = ke.profile.mu
    logE = ke.log_kernel(t, r, y)
    log_model = (mu * np.log(bracket(r - t + y))
                 - 0.5 * mu * np.log(bracket(r)) - 0.5 * mu * np.log(bracket(y)))
    ratio = np.exp(logE - log_model)
    return {"min_ratio": float(ratio.min()), "max_ratio": float(ratio.max())}
