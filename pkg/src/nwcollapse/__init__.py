"""Non-white-noise collapse-model kinetics.

Correlation kernels for several noise families, reduction rates of localized
superpositions, exact Monte Carlo of collapse statistics, energy-production
and radiation observables, and dark-matter phenomenology.
"""

from . import (config, correlators, dynamics, observables, phenomenology, quadrature, rates,
               units)
from .errors import (CollapseError, ConfigError, DistributionalKernelError,
                     DivergentKernelError, DomainError, IntegrandNaNError,
                     NonConvergenceError, PSDError, UnboundedGrowthError)

__version__ = "0.1.0"

__all__ = [
    "config", "correlators", "dynamics", "observables", "phenomenology", "quadrature", "rates", "units",
    "CollapseError", "ConfigError", "DistributionalKernelError", "DivergentKernelError",
    "DomainError", "IntegrandNaNError", "NonConvergenceError", "PSDError",
    "UnboundedGrowthError",
]
