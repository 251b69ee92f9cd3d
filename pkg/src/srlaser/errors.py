"""Exception and warning types shared across the package."""


class SrLaserError(Exception):
    """Base class for all library errors."""


class ConfigurationError(SrLaserError, ValueError):
    """Inconsistent or unknown configuration input."""


class DomainError(SrLaserError, ValueError):
    """A numeric argument lies outside its valid domain."""


class SingularGeometryError(DomainError):
    pass


class SpaceMismatchError(SrLaserError, ValueError):
    pass


class SolverError(SrLaserError, RuntimeError):
    pass


class MultiplicityError(SolverError):
    """The Liouvillian kernel is not one-dimensional."""


class StiffnessError(SolverError):
    pass


class FitError(SrLaserError, RuntimeError):
    pass


class WindowingError(SrLaserError, ValueError):
    """Correlation has not decayed by the end of the time grid."""


class TruncationWarning(UserWarning):
    """Top Fock level carries non-negligible population."""


class WindowingWarning(UserWarning):
    pass
