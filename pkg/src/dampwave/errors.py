"""Exception types shared across the package.

The CLI maps these onto exit codes: usage/config problems exit with 2,
numerical failures with 3.
"""


class DampwaveError(Exception):
    """Base class for all package errors."""


class DomainError(DampwaveError, ValueError):
    """An argument lies outside the domain of a closed-form expression."""


class RegimeError(DampwaveError, ValueError):
    """The parameters fall outside the regime an operation is defined for."""


class UsageError(DampwaveError, ValueError):
    """Invalid call shape or configuration (empty samples, off-grid node, ...)."""


class AccuracyError(DampwaveError, ArithmeticError):
    """Quadrature did not reach the requested tolerance within its budget.

    ``estimate`` and ``error`` carry the best value found so far.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error
