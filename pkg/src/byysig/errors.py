"""Exception types raised by byysig."""


class ByySigError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(ByySigError, ValueError):
    """A signature file could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(ByySigError, ValueError):
    """An input violates a documented invariant."""


class NumericError(ByySigError, ArithmeticError):
    """A numerical routine failed, e.g. a covariance is not positive definite."""

    def __init__(self, message, component=None):
        self.component = component
        if component is not None:
            message = f"component {component}: {message}"
        super().__init__(message)


class FitError(ByySigError, RuntimeError):
    """Model fitting could not produce a usable model."""
