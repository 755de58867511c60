"""Exception types raised across the package."""


class MotionError(Exception):
    """Base class for all package errors."""


class InvalidInputError(MotionError, ValueError):
    pass


class ParseError(MotionError):
    """Malformed motion file. Carries the offending line (1-based) when known."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class UnsupportedFormatError(MotionError):
    pass


class DegenerateFrameError(MotionError, ArithmeticError):
    """Two frame-defining vectors are (nearly) collinear."""
