"""Radial semilinear wave equation with scale-invariant damping: lifespan
solvers, oracles and certificates."""

from .errors import AccuracyError, DampwaveError, DomainError, RegimeError, UsageError
from .exponents import ProblemParams, classify_regime, solve_b

__version__ = "0.1.0"

__all__ = ["AccuracyError", "DampwaveError", "DomainError", "RegimeError", "UsageError",
           "ProblemParams", "classify_regime", "solve_b"]
