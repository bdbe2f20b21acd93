"""Exception hierarchy shared by the solver modules."""


class PFSIError(Exception):
    """Base class for all package errors."""


class InputDomainError(PFSIError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigurationError(PFSIError, ValueError):
    """Inconsistent discretizations or invalid parameters."""


class SolverError(PFSIError, RuntimeError):
    """A linear or nonlinear solve did not converge.

    Attributes
    ----------
    residual : float or None
        Final residual norm reached.
    history : list of float
        Residual history, when the solver is iterative.
    """

    def __init__(self, message, residual=None, history=None):
        super().__init__(message)
        self.residual = residual
        self.history = list(history) if history is not None else []


class InternalError(PFSIError, RuntimeError):
    """A condition the theory rules out (singular Gram, singular coercive system)."""


class ArchiveError(PFSIError, ValueError):
    """A state archive is corrupt or has an incompatible version."""
