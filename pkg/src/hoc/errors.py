"""Exception hierarchy shared by the package."""


class HocError(Exception):
    """Base class for all package errors."""


class UnsupportedConfigurationError(HocError):
    """A grid/boundary/PDE combination that no scheme is defined for."""


class SingularParameterError(HocError):
    """A closed-form coefficient set hit a vanishing denominator."""


class InconsistentSystemError(HocError):
    """The moment system has no exact solution in a mode that requires one."""

    def __init__(self, message, residual):
        super().__init__(message)
        self.residual = residual


class InfeasibleError(HocError):
    """The sign-constrained coefficient problem has no feasible point."""

    def __init__(self, message, violation):
        super().__init__(message)
        self.violation = violation


class SingularMatrixError(HocError):
    """The assembled matrix is (numerically) singular."""


class ConvergenceError(HocError):
    """An iterative solve hit its iteration cap."""

    def __init__(self, message, stats=None):
        super().__init__(message)
        self.stats = stats


class BreakdownError(ConvergenceError):
    """BiCGStab breakdown (rho or omega vanished)."""


class ConfigError(HocError):
    """Configuration file could not be parsed or validated."""
