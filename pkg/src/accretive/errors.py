"""Exception hierarchy shared by all modules."""

from __future__ import annotations


class AccretiveError(Exception):
    """Base class for every error raised by the library."""


class DimensionMismatch(AccretiveError, ValueError):
    pass


class NonFiniteInput(AccretiveError, ValueError):
    pass


class NonFiniteOutput(AccretiveError, ArithmeticError):
    pass


class NumericalBreakdown(AccretiveError, ArithmeticError):
    pass


class EmptyWitnessSet(AccretiveError, ValueError):
    pass


class EmptyInput(AccretiveError, ValueError):
    pass


class DomainViolation(AccretiveError, ValueError):
    """A point fell outside an operator's declared box."""

    def __init__(self, message, point=None):
        super().__init__(message)
        self.point = point


class InvalidK(AccretiveError, ValueError):
    pass


class NoValidSamples(AccretiveError, ValueError):
    pass


class LipschitzUnavailable(AccretiveError, ValueError):
    pass


class SingularLinearSystem(AccretiveError, ArithmeticError):
    pass


class InnerDiverged(AccretiveError, ArithmeticError):
    """An inner resolvent solve failed to reach its tolerance."""

    def __init__(self, message, residual=None, point=None):
        super().__init__(message)
        self.residual = residual
        self.point = point


class NonFiniteIterate(AccretiveError, ArithmeticError):
    pass


class NotContractive(AccretiveError, ArithmeticError):
    """The outer iteration of a zero solve stopped contracting."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class StrategyUnavailable(AccretiveError, ValueError):
    """The requested inner solve strategy does not apply to this operator."""
