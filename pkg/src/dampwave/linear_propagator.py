"""Free solution of the damped linear problem by quadrature of its
characteristic representation:

    u_L(t,r) = 1/2 int_{|t-r|}^{t+r} E(t,r,y) (psi + phi' + w phi)(y) dy
               + chi(r-t) E(t,r,r-t) phi(r-t),

with chi(s) = 1 for s >= 0 (the boundary term is kept on the light cone).
"""

from __future__ import annotations

import numpy as np

from .coefficients import KernelEvaluator
from .exponents import weight1
from .initial_data import ReducedData, source_density
from .quadrature import DEFAULT_LIMIT, gk_batch
from .errors import UsageError


def _breakpoints(data: ReducedData, lo, hi):
    """Support edges of compactly supported data, plus a graded point near lo."""
    cols = [lo + 1e-3 * (hi - lo), lo + 0.05 * (hi - lo)]
    if data.support is not None:
        cols += [np.full_like(lo, data.support[0]), np.full_like(lo, data.support[1])]
    bp = np.stack(cols, axis=1)
    bp = np.where((bp > lo[:, None]) & (bp < hi[:, None]), bp, np.nan)
    return bp


def u_L_many(ke: KernelEvaluator, data: ReducedData, t, r, tol=1e-10, limit=DEFAULT_LIMIT):
    """Vectorized u_L over broadcast arrays t, r."""
    t, r = np.broadcast_arrays(np.asarray(t, dtype=float), np.asarray(r, dtype=float))
    shape = t.shape
    t = t.ravel()
    r = r.ravel()
    if np.any(t < 0) or np.any(r < 0):
        raise UsageError("u_L needs t >= 0 and r >= 0")
    if tol <= 0:
        raise UsageError("tol must be positive")
    lo = np.abs(t - r)
    hi = t + r
    prof = ke.profile

    nz = hi > lo
    vals = np.zeros(t.size)
    if np.any(nz):
        idx = np.flatnonzero(nz)
        sub_t, sub_r = t[idx], r[idx]

        def sub_integrand(y, owner):
            tt = sub_t[owner][:, None]
            rr = sub_r[owner][:, None]
            return ke.kernel(tt, rr, y) * source_density(data, prof, y)

        integral, _ = gk_batch(sub_integrand, lo[idx], hi[idx], abstol=tol, reltol=tol,
                               limit=limit, breakpoints=_breakpoints(data, lo[idx], hi[idx]))
        vals[idx] = 0.5 * integral
    inside = r >= t
    if np.any(inside):
        s = r[inside] - t[inside]
        vals[inside] += ke.kernel(t[inside], r[inside], s) * data.phi(s)
    return vals.reshape(shape)


def u_L(ke: KernelEvaluator, data: ReducedData, t, r, tol=1e-10):
    out = u_L_many(ke, data, t, r, tol)
    return out if out.ndim else float(out)


def verify_velocity(ke: KernelEvaluator, data: ReducedData, r, h, tol=1e-12):
    """One-sided second-order estimate of d/dt u_L at t = 0."""
    if r <= 0 or h <= 0:
        raise UsageError("need r > 0 and h > 0")
    u0, u1, u2 = u_L_many(ke, data, np.array([0.0, h, 2 * h]), np.full(3, float(r)), tol)
    return float((-3 * u0 + 4 * u1 - u2) / (2 * h))


def linear_weighted_bound(ke: KernelEvaluator, data: ReducedData, T, R, nt=41, nr=81, tol=1e-10):
    """C0_hat = max |u_L| / w_1 over the grid [0,T] x (0,R]."""
    if T < 0 or R <= 0:
        raise UsageError("need T >= 0 and R > 0")
    mu = ke.profile.mu
    nu = data.kappa - mu / 2 - 1
    tg = np.linspace(0.0, T, nt)
    rg = np.linspace(R / nr, R, nr)
    tt, rr = np.meshgrid(tg, rg, indexing="ij")
    u = u_L_many(ke, data, tt, rr, tol)
    ratio = np.abs(u) / weight1(tt, rr, mu, nu)
    i = np.unravel_index(np.argmax(ratio), ratio.shape)
    return {"C0_hat": float(ratio[i]), "argmax": (float(tt[i]), float(rr[i])),
            "nu": nu, "grid": (nt, nr)}


def slab_lower_bound(ke: KernelEvaluator, data: ReducedData, t, r, tol=1e-10):
    """Samples of u_L r^(mu/2) (t-r)^nu on r+1 <= t <= 2r; the minimum is the
    fitted lower-bound constant M."""
    t = np.asarray(t, dtype=float)
    r = np.asarray(r, dtype=float)
    if np.any(t < r + 1) or np.any(t > 2 * r):
        raise UsageError("lower-bound samples must satisfy r+1 <= t <= 2r")
    mu = ke.profile.mu
    nu = data.kappa - mu / 2 - 1
    u = u_L_many(ke, data, t, r, tol)
    return u * r ** (mu / 2) * (t - r) ** nu
