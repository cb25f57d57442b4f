"""Reduced initial data (phi, psi) = (r f0, r f1) for the radial problem."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np

from .errors import DomainError, UsageError
from .exponents import bracket

DECAY = "DECAY"
BLOWUP_SLAB = "BLOWUP_SLAB"
BUMP = "BUMP"
ZERO = "ZERO"


@dataclass(frozen=True)
class ReducedData:
    phi: Callable
    psi: Callable
    phiprime: Callable
    kappa: float
    family: str
    support: Optional[tuple] = None
    meta: dict = field(default_factory=dict)

    def scaled(self, c):
        """Data multiplied by the constant c."""
        c = float(c)
        return replace(
            self,
            phi=lambda r, f=self.phi: c * f(r),
            psi=lambda r, f=self.psi: c * f(r),
            phiprime=lambda r, f=self.phiprime: c * f(r),
            meta={**self.meta, "scale": c * self.meta.get("scale", 1.0)},
        )


def _arr(r):
    return np.asarray(r, dtype=float)


def decay_family(kappa) -> ReducedData:
    """f0 = <r>^-kappa, f1 = <r>^(-kappa-1)."""
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    k = float(kappa)

    def phi(r):
        r = _arr(r)
        return r * bracket(r) ** (-k)

    def psi(r):
        r = _arr(r)
        return r * bracket(r) ** (-k - 1)

    def phiprime(r):
        r = _arr(r)
        return bracket(r) ** (-k) - k * r * r * bracket(r) ** (-k - 2)

    return ReducedData(phi, psi, phiprime, k, DECAY,
                       meta={"f0": "<r>^-kappa", "f1": "<r>^(-kappa-1)"})


def blowup_family(kappa) -> ReducedData:
    """phi = 0, psi = (1+r)^-kappa, given directly at the reduced level.

    The matching 3D velocity f1 = psi/r is singular at the origin.
    """
    if not kappa > 0:
        raise DomainError(f"kappa must be positive, got {kappa}")
    k = float(kappa)

    def zero(r):
        return np.zeros_like(_arr(r))

    def psi(r):
        return (1.0 + _arr(r)) ** (-k)

    return ReducedData(zero, psi, zero, k, BLOWUP_SLAB,
                       meta={"level": "reduced", "f1": "psi/r (singular at 0)"})


def bump_family(s0, s1, phi_amp=1.0, psi_amp=0.0, kappa=np.inf) -> ReducedData:
    """C^2 bump B(x) = (1-x^2)^3 on [s0, s1], x mapped to [-1, 1].

    phi = phi_amp * B, psi = psi_amp * B. Compact support gives any decay
    rate; kappa is a nominal label.
    """
    if not 0 <= s0 < s1:
        raise UsageError("bump support needs 0 <= s0 < s1")
    c = 0.5 * (s0 + s1)
    half = 0.5 * (s1 - s0)

    def B(r):
        x = (_arr(r) - c) / half
        return np.where(np.abs(x) < 1, (1 - x * x) ** 3, 0.0)

    def dB(r):
        x = (_arr(r) - c) / half
        return np.where(np.abs(x) < 1, -6 * x * (1 - x * x) ** 2 / half, 0.0)

    return ReducedData(
        phi=lambda r: phi_amp * B(r),
        psi=lambda r: psi_amp * B(r),
        phiprime=lambda r: phi_amp * dB(r),
        kappa=float(kappa),
        family=BUMP,
        support=(float(s0), float(s1)),
        meta={"phi_amp": phi_amp, "psi_amp": psi_amp},
    )


def zero_family() -> ReducedData:
    def zero(r):
        return np.zeros_like(_arr(r))

    return ReducedData(zero, zero, zero, np.inf, ZERO, support=(0.0, 0.0))


def source_density(data: ReducedData, profile, y):
    """psi(y) + phi'(y) + w(y) phi(y)."""
    y = _arr(y)
    out = data.psi(y) + data.phiprime(y) + profile.w(y) * data.phi(y)
    return out if np.ndim(out) else float(out)


def check_decay_bounds(data: ReducedData, r_max=100.0, n=2001, const=1.0):
    """Sampled decay hypothesis at the 3D level.

    Returns (max |f0|/<r>^-k, max (|f0'|+|f1|)/<r>^(-k-1)); both should be
    <= const.
    """
    r = np.linspace(1e-6, r_max, n)
    k = data.kappa
    f0 = data.phi(r) / r
    f1 = data.psi(r) / r
    f0p = (data.phiprime(r) - f0) / r
    a = np.max(np.abs(f0) * bracket(r) ** k)
    b = np.max((np.abs(f0p) + np.abs(f1)) * bracket(r) ** (k + 1))
    return float(a), float(b)


def make_data(family, kappa=None, **kw) -> ReducedData:
    """Factory used by the CLI config layer."""
    family = family.upper()
    if family == DECAY:
        return decay_family(kappa)
    if family == BLOWUP_SLAB:
        return blowup_family(kappa)
    if family == BUMP:
        return bump_family(kw.get("s0", 1.0), kw.get("s1", 3.0),
                           kw.get("phi_amp", 1.0), kw.get("psi_amp", 0.0))
    if family == ZERO:
        return zero_family()
    raise UsageError(f"unknown data family {family!r}")
