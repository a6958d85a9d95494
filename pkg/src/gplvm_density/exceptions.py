"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class NumericalError(ArithmeticError):
    """Raised when a factorization or density evaluation breaks down.

    Parameters
    ----------
    message : str
        Human readable description.
    jitter : float, optional
        Last diagonal jitter tried before giving up, if any.
    """

    def __init__(self, message, jitter=None):
        super().__init__(message)
        self.jitter = jitter


class ParseError(ValueError):
    """Raised by the svmlight reader; carries the offending location."""

    def __init__(self, message, path=None, line=None):
        loc = ""
        if path is not None:
            loc = f"{path}"
        if line is not None:
            loc = f"{loc}:{line}" if loc else f"line {line}"
        super().__init__(f"{loc}: {message}" if loc else message)
        self.path = path
        self.line = line
