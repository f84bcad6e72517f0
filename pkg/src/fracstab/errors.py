"""Exception hierarchy shared by all modules."""


class FracStabError(Exception):
    """Base class for every error raised by this package."""


class DomainError(FracStabError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class AccuracyError(FracStabError, ArithmeticError):
    """A numerical method could not reach its error contract.

    ``bound`` carries the best error bound that was achieved.
    """

    def __init__(self, message, bound=float("inf")):
        super().__init__(message)
        self.bound = bound


class StabilityPreconditionError(DomainError):
    """A matrix that must be Hurwitz has an eigenvalue with Re >= 0."""


class FitError(FracStabError):
    pass


class PreconditionError(FracStabError):
    pass


class InfeasibleError(FracStabError):
    """A certificate quantity has no admissible value for the given inputs."""

    def __init__(self, message, minimal=None):
        super().__init__(message)
        self.minimal = minimal


class DivergenceError(FracStabError, ArithmeticError):
    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class EnsembleError(FracStabError):
    pass


class ConfigError(FracStabError):
    """Invalid configuration file; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
