"""Finite-difference oracle for

    u_tt - u_rr + 2 w u_t + (w^2 - w') u = |u|^p / r^(p-1),   u(t, 0) = 0.

Leapfrog in time, centred second differences in space, damping averaged
over the new and old levels. The outer edge uses the upwind outflow
condition (d_t + d_r + w) u = 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from numba import njit

from .coefficients import DampingProfile
from .errors import UsageError
from .initial_data import ReducedData

COMPLETED = "COMPLETED"
BLEWUP = "BLEWUP"


class ConfigError(UsageError):
    """Invalid FD configuration."""


@dataclass(frozen=True)
class FdConfig:
    dr: float
    cfl: float = 0.5
    R_max: float = 20.0
    amp_threshold: float = 1e6
    T_max: float = 10.0
    snapshot_every: Optional[float] = None
    pad: float = 0.0

    def validate(self):
        if not 0 < self.cfl <= 0.9:
            raise ConfigError(f"cfl must lie in (0, 0.9], got {self.cfl}")
        if not self.dr > 0:
            raise ConfigError("dr must be positive")
        if self.R_max < self.T_max + self.pad:
            raise ConfigError("R_max must cover T_max plus the data padding")
        if not self.amp_threshold > 0:
            raise ConfigError("amp_threshold must be positive")


@dataclass
class FdResult:
    status: str
    T_blow: Optional[float]
    t: np.ndarray
    r: np.ndarray
    u: np.ndarray
    steps: int
    dt: float

    def at(self, t, r):
        """Bilinear lookup in the stored snapshots."""
        from scipy.interpolate import RegularGridInterpolator
        f = RegularGridInterpolator((self.t, self.r), self.u)
        pts = np.stack(np.broadcast_arrays(np.asarray(t, float), np.asarray(r, float)), axis=-1)
        return f(pts)

    def to_csv(self, path):
        tt, rr = np.meshgrid(self.t, self.r, indexing="ij")
        arr = np.column_stack([tt.ravel(), rr.ravel(), self.u.ravel()])
        np.savetxt(path, arr, delimiter=",", header="t,r,u", comments="", fmt="%.17g")


@njit(cache=True)
def _march(prev, cur, n, lam2, dt, dr, w, V, inv_r, p, nonlinear, amp):
    """Advance n leapfrog steps; returns (prev, cur, steps taken, blew up)."""
    J = cur.size - 1
    nxt = np.empty_like(cur)
    dt2 = dt * dt
    square = p == 2.0
    # per-node constants
    cn = 1.0 / (1.0 + w * dt)
    cb = (1.0 - w * dt) * cn
    cv = dt2 * V
    cs = np.empty_like(inv_r)
    for j in range(J + 1):
        cs[j] = dt2 * inv_r[j] ** (p - 1.0) * cn[j] if nonlinear else 0.0
    for k in range(n):
        peak = 0.0
        bad = False
        for j in range(1, J):
            c = cur[j]
            a = abs(c)
            if square:
                src = a * a
            elif a > 0.0:
                src = np.exp(p * np.log(a))
            else:
                src = 0.0
            val = (cn[j] * (2.0 * c + lam2 * (cur[j + 1] - 2.0 * c + cur[j - 1]) - cv[j] * c)
                   - cb[j] * prev[j] + cs[j] * src)
            nxt[j] = val
            bad |= val != val
            if abs(val) > peak:
                peak = abs(val)
        nxt[0] = 0.0
        nxt[J] = cur[J] - dt * ((cur[J] - cur[J - 1]) / dr + w[J] * cur[J])
        bad |= nxt[J] != nxt[J]
        peak = max(peak, abs(nxt[J]))
        prev, cur, nxt = cur, nxt, prev
        if bad or peak >= amp:
            return prev, cur, k + 1, True
    return prev, cur, n, False


def fd_solve(profile: DampingProfile, data: ReducedData, eps, p, cfg: FdConfig,
             nonlinear=True) -> FdResult:
    """March to T_max or until max|u| >= amp_threshold."""
    cfg.validate()
    dr = cfg.dr
    dt = cfg.cfl * dr
    J = int(round(cfg.R_max / dr))
    r = np.arange(J + 1) * dr
    w = np.asarray(profile.w(r), dtype=float)
    V = np.zeros_like(r)
    V[1:] = -np.asarray(profile.wprime(r[1:])) + w[1:] ** 2
    inv_r = np.zeros_like(r)
    inv_r[1:] = 1.0 / r[1:]
    lam2 = (dt / dr) ** 2
    n_steps = int(np.ceil(cfg.T_max / dt - 1e-9))
    stride = (max(1, n_steps) if cfg.snapshot_every is None
              else max(1, int(round(cfg.snapshot_every / dt))))

    def source(u):
        if not nonlinear or p is None:
            return 0.0
        return np.abs(u) ** p * inv_r ** (p - 1)

    u0 = eps * np.asarray(data.phi(r), dtype=float)
    v0 = eps * np.asarray(data.psi(r), dtype=float)
    u0[0] = 0.0
    v0[0] = 0.0

    def lap(u):
        out = np.zeros_like(u)
        out[1:-1] = u[2:] - 2 * u[1:-1] + u[:-2]
        return out

    snaps_t = [0.0]
    snaps_u = [u0.copy()]
    status, T_blow = COMPLETED, None

    # Taylor start
    acc = lap(u0) / dr ** 2 - 2 * w * v0 - V * u0 + source(u0)
    u1 = u0 + dt * v0 + 0.5 * dt * dt * acc
    u1[0] = 0.0
    u1[-1] = u0[-1] - dt * ((u0[-1] - u0[-2]) / dr + w[-1] * u0[-1])
    prev, cur = u0.copy(), u1
    step = 1
    if not np.all(np.isfinite(cur)) or np.max(np.abs(cur)) >= cfg.amp_threshold:
        status, T_blow = BLEWUP, dt
    pexp = float(p) if p is not None else 1.0
    while status == COMPLETED:
        if step % stride == 0:
            snaps_t.append(step * dt)
            snaps_u.append(cur.copy())
        if step >= n_steps:
            break
        chunk = min(stride - step % stride, n_steps - step)
        prev, cur, done, blew = _march(prev, cur, chunk, lam2, dt, dr, w, V, inv_r, pexp,
                            bool(nonlinear and p is not None), float(cfg.amp_threshold))
        step += done
        if blew:
            status, T_blow = BLEWUP, step * dt
    if snaps_t[-1] < step * dt:
        snaps_t.append(step * dt)
        snaps_u.append(cur.copy())
    return FdResult(status, T_blow, np.array(snaps_t), r, np.array(snaps_u), step, dt)


def linear_energy(res: FdResult):
    """Discrete 1/2 int (u_t^2 + u_r^2) dr at interior snapshots (centred u_t)."""
    dt = res.t[1] - res.t[0]
    ut = (res.u[2:] - res.u[:-2]) / (2 * dt)
    ur = np.diff(res.u[1:-1], axis=1) / (res.r[1] - res.r[0])
    dr = res.r[1] - res.r[0]
    e = 0.5 * (np.sum(ut ** 2, axis=1) * dr + np.sum(ur ** 2, axis=1) * dr)
    return res.t[1:-1], e
