"""Exception hierarchy shared by the solvers and the CLI."""


class EnvelopeError(Exception):
    """Base class for every error raised by this package."""


class InvalidInputError(EnvelopeError, ValueError):
    """A problem statement or law violates its invariants."""


class DomainError(EnvelopeError, ValueError):
    """An argument lies outside the domain of an auxiliary function."""


class DegenerateLawError(EnvelopeError):
    """The auxiliary inverse does not exist because the law is already quadratic.

    The auxiliary parameter must be pinned to ``pinned_value`` instead.
    """

    def __init__(self, message, pinned_value):
        super().__init__(message)
        self.pinned_value = pinned_value


class NoBindingError(EnvelopeError):
    """No positive solution exists; the system does not bind."""


class ConvergenceError(EnvelopeError):
    """An iterative solver ran out of iterations.

    ``residual`` holds the best residual (scalar or vector) reached.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ConfigError(InvalidInputError):
    """A run configuration is malformed or contains unknown keys."""
