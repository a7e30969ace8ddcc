"""Shared exception types."""


class JumpIbpError(Exception):
    pass


class InsufficientOrder(JumpIbpError):
    """A jet does not carry enough derivative orders for the requested operation."""


class DomainError(JumpIbpError):
    """Composition evaluated outside the domain of the univariate function."""


class Singular(JumpIbpError):
    """Covariance matrix determinant at or below the singularity threshold."""


class DegenerateDensity(JumpIbpError):
    """Path density evaluated at a point where it vanishes."""


class OutsideSupport(JumpIbpError):
    """Jump amplitude lies in neither branch of the mixture density."""


class QuadratureFailure(JumpIbpError):
    pass


class SamplerFailure(JumpIbpError):
    pass


class CoordinateBudgetExceeded(JumpIbpError):
    """A path (or configuration) needs more active coordinates than the dense cap."""


class NonInvertibleJump(JumpIbpError):
    """I + grad_x c_M singular at a jump; inverse tangent flow undefined."""


class TooManyRejections(JumpIbpError):
    """More than the tolerated fraction of Monte Carlo paths was rejected as Singular."""


class Inconclusive(JumpIbpError):
    """A numerical limit estimate did not stabilise."""


class ValidityViolation(JumpIbpError):
    """The (q, t, theta) admissibility condition for integration by parts fails."""


class ConfigError(JumpIbpError):
    pass
