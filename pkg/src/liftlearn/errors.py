"""Exception hierarchy shared across the package."""


class LiftLearnError(Exception):
    """Base class for all errors raised by liftlearn."""


class DimensionError(LiftLearnError, ValueError):
    """An argument has the wrong shape or dimension."""


class DomainError(LiftLearnError, ArithmeticError):
    """A function was evaluated outside the region where it is finite."""


class DivergenceError(LiftLearnError):
    """A simulation produced a non-finite state.

    ``last_time`` is the last grid time with a finite state and ``partial``
    optionally carries whatever was computed before the failure.
    """

    def __init__(self, message, last_time=None, partial=None):
        super().__init__(message)
        self.last_time = last_time
        self.partial = partial


class RootFindingError(LiftLearnError):
    """Newton iteration failed to reach the residual tolerance."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class EvaluationError(LiftLearnError, ArithmeticError):
    """A network or objective evaluation produced non-finite values."""


class SolvabilityError(LiftLearnError):
    """The Riccati equation has no stabilizing solution for the given data."""


class RiccatiNumericalError(LiftLearnError):
    """The Riccati solution came out indefinite or otherwise unusable."""


class DegenerateSolutionError(LiftLearnError):
    """Training converged to the trivial (collapsed) lifting."""


class OptimizerError(LiftLearnError):
    """The inner minimizer failed; ``diagnostics`` holds iteration info."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(LiftLearnError, ValueError):
    """Malformed or unknown configuration keys."""
