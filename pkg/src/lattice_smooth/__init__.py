"""Kernel regression on lattices with dependent errors.

Submodules:

``field_gen``   stationary error fields on {1..n}^d
``kernel``      kernels with a positive floor on [-1, 1]^d
``estimator``   the fixed design kernel estimator and its sup-norm deviation
``orlicz``      exponential Orlicz norms and quantile-integral coefficients
``dependence``  lexicographic pasts, mixing profiles and condition checkers
``experiment``  Monte Carlo studies and the ``lattice-smooth`` CLI
"""

from . import dependence, estimator, field_gen, kernel, orlicz
from .errors import (
    CapacityError,
    ConfigurationError,
    DegenerateBandwidthError,
    DomainError,
    LatticeSmoothError,
    NumericalError,
    UnsupportedModelError,
    ValidationError,
)

__version__ = "0.1.0"

__all__ = [
    "dependence",
    "estimator",
    "field_gen",
    "kernel",
    "orlicz",
    "CapacityError",
    "ConfigurationError",
    "DegenerateBandwidthError",
    "DomainError",
    "LatticeSmoothError",
    "NumericalError",
    "UnsupportedModelError",
    "ValidationError",
]
