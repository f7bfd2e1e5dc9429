"""Custom exceptions for the qmunu library."""


class QmunuError(Exception):
    """Base exception for all qmunu errors."""

    pass


class ConfigurationError(QmunuError):
    """Raised when configuration is invalid or cannot be loaded."""

    pass


class DomainError(QmunuError, ValueError):
    """Raised when parameters fall outside the domain of a formula."""

    pass


class RangeError(QmunuError, ValueError):
    """Raised when an index lies outside the support of a distribution."""

    pass


class DivergenceError(QmunuError):
    """Raised when a non-terminating series is evaluated outside its disc of convergence."""

    pass


class PoleError(QmunuError):
    """Raised when a denominator Pochhammer factor vanishes."""

    pass


class PoleProximityError(QmunuError):
    """Raised when an evaluation point lies within the guard distance of a pole."""

    pass


class ScheduleError(QmunuError):
    """Raised when an effective jump parameter a_i * mu_t leaves [nu, 1)."""

    pass


class CapacityError(QmunuError):
    """Raised when an enumeration or word space exceeds its configured cap."""

    pass


class TailBoundError(QmunuError):
    """Raised when a certified truncation tail is larger than allowed."""

    pass


class ContourInfeasible(QmunuError):
    """Raised when no nested contour family satisfies the constraints."""

    pass


class ConvergenceError(QmunuError):
    """Raised when node doubling does not reach the requested tolerance."""

    pass


class ConfigError(QmunuError):
    """Raised when a Fredholm kernel configuration violates a contour constraint."""

    pass


class TruncationError(QmunuError):
    """Raised when the last retained series term exceeds the tolerance."""

    pass


class IllConditionedError(QmunuError):
    """Raised when a floating point linear system is too ill-conditioned to solve."""

    pass


class TailTruncationWarning(UserWarning):
    """Emitted when an infinite-support sampler hits its enumeration cap."""

    pass
