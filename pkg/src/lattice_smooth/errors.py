"""Exception hierarchy shared by every module of the package."""


class LatticeSmoothError(Exception):
    """Base class for all package errors."""


class ValidationError(LatticeSmoothError, ValueError):
    """An input object violates its invariants."""


class CapacityError(LatticeSmoothError):
    """A requested lattice is too large to materialise."""


class DomainError(LatticeSmoothError, ValueError):
    """An argument lies outside the domain of a function."""


class UnsupportedModelError(LatticeSmoothError):
    """The operation has no closed form for the given error model."""


class DegenerateBandwidthError(LatticeSmoothError):
    """The kernel window around an evaluation point contains no site."""


class ConfigurationError(LatticeSmoothError, ValueError):
    """An experiment or estimation problem is misconfigured."""


class NumericalError(LatticeSmoothError):
    """A numerical routine failed to converge or diverged.

    ``diagnostics`` carries whatever state helps explain the failure.
    """

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
