"""Exception hierarchy shared by all modules.

Every error carries an ``exit_code`` so the CLI can map failures onto its
stable contract: 2 for usage/config problems, 3 for numerical failures.
"""


class FracBallError(Exception):
    exit_code = 3


class PreconditionError(FracBallError, ValueError):
    exit_code = 2


class OutOfDomain(PreconditionError):
    pass


class CoincidentPoints(PreconditionError):
    pass


class TooCloseToBoundary(PreconditionError):
    exit_code = 3


class DimensionMismatch(PreconditionError):
    pass


class ConfigError(PreconditionError):
    pass


class NumericalError(FracBallError, ArithmeticError):
    exit_code = 3


class NonFinite(NumericalError):
    pass


class SlowDecay(NumericalError):
    pass


class Divergent(NumericalError):
    pass


class NonIntegrable(NumericalError):
    pass


class NonContractive(NumericalError):
    def __init__(self, message, ratio=None, suggested_tau_steps=None):
        super().__init__(message)
        self.ratio = ratio
        self.suggested_tau_steps = suggested_tau_steps


class MaxItersExceeded(NumericalError):
    pass


class DivisionByZero(NumericalError, ZeroDivisionError):
    pass


class FieldSyntaxError(FracBallError):
    """Base for field-expression errors; ``position`` is a 0-based offset."""

    exit_code = 2

    def __init__(self, message, position=None, text=None):
        self.position = position
        self.text = text
        if position is not None:
            message = f"{message} (at position {position})"
        super().__init__(message)

    def pointer(self):
        if self.text is None or self.position is None:
            return str(self)
        return f"{self.text}\n{' ' * self.position}^"


class ParseError(FieldSyntaxError):
    def __init__(self, message, position=None, text=None, expected=()):
        self.expected = tuple(sorted(set(expected)))
        if self.expected:
            message = f"{message}; expected one of {', '.join(self.expected)}"
        super().__init__(message, position, text)


class ArityError(FieldSyntaxError):
    pass


class UnknownIdentifier(FieldSyntaxError):
    pass
