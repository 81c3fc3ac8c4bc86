"""Exception hierarchy shared by all modules."""


class FinslerError(Exception):
    """Base class for library errors."""


class PreconditionError(FinslerError, ValueError):
    """An input violates the documented precondition of an operation."""


class BranchCutError(PreconditionError):
    """The principal logarithm is undefined: an eigenvalue lies on (-inf, 0]."""


class SingularPointError(PreconditionError):
    """A group element on a path is (numerically) singular."""


class IntegrationError(FinslerError, RuntimeError):
    """The ODE integrator failed (step budget exhausted, NaN or overflow)."""


class SingularDriftError(IntegrationError):
    """The integrated group element lost invertibility."""


class FrameBreakError(FinslerError, RuntimeError):
    """Spectral projections changed rank or eigenvalues collided along a grid."""


class NotConvergedError(FinslerError, RuntimeError):
    """A boundary value solve failed to converge.

    The best available result is attached as ``result``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
