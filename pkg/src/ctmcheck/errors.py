"""Exception types shared across the package."""


class CtmcheckError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(CtmcheckError):
    """Static diagnostic for model or property sources (lexing, syntax,
    identifier resolution, typing)."""

    def __init__(self, message, line=0, column=0):
        super().__init__(message)
        self.message = message
        self.line = line
        self.column = column

    def __str__(self):
        if self.line:
            return f"{self.line}:{self.column}: {self.message}"
        return self.message


class UnsupportedOperatorError(ParseError):
    """A property uses an operator the checker rejects by contract
    (steady-state, next, unbounded or interval until)."""

    def __init__(self, operator, message, line=0, column=0):
        super().__init__(message, line, column)
        self.operator = operator


class ModelRuntimeError(CtmcheckError):
    """Dynamic model error: an update leaves declared bounds, a rate is
    non-positive on an enabled guard, integer overflow, division by zero."""

    def __init__(self, message, state=None):
        super().__init__(message)
        self.message = message
        self.state = state


class ResourceCapError(CtmcheckError):
    """State exploration exceeded a configured resource cap."""
