"""Exception hierarchy shared by all modules.

Each exception carries a short machine-readable ``category`` so that the
command-line front end can map it to an exit status without string matching.
"""

from __future__ import annotations


class CollapseError(Exception):
    """Base class for all package errors."""

    category = "error"


class DomainError(CollapseError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""

    category = "validation"


class ConfigError(CollapseError, ValueError):
    """A configuration file, override, or geometry is malformed."""

    category = "validation"


class DistributionalKernelError(DomainError):
    """The requested kernel is a distribution in time (white noise ``D``)."""


class DivergentKernelError(DomainError):
    """The requested quantity is infinite for the given parameters."""


class UnboundedGrowthError(DivergentKernelError):
    """A time-asymptotic quantity grows without bound.

    Attributes
    ----------
    exponent, stderr : float
        Least-squares power-law growth exponent over the last sampled decade
        and its standard error.
    """

    def __init__(self, message, exponent, stderr):
        super().__init__(message)
        self.exponent = float(exponent)
        self.stderr = float(stderr)


class NonConvergenceError(CollapseError, RuntimeError):
    """A numerical procedure failed to reach the requested tolerance."""

    category = "nonconvergence"


class IntegrandNaNError(NonConvergenceError):
    """The integrand returned NaN; ``abscissa`` records where."""

    def __init__(self, abscissa):
        super().__init__(f"integrand returned NaN at x = {abscissa!r}")
        self.abscissa = abscissa


class PSDError(CollapseError, RuntimeError):
    """A covariance matrix is not positive semidefinite beyond tolerance."""

    category = "psd"

    def __init__(self, message, min_eigenvalue=float("nan"), trace=float("nan")):
        super().__init__(message)
        self.min_eigenvalue = min_eigenvalue
        self.trace = trace
