"""Exception hierarchy shared by every module."""


class SwitchDwellError(Exception):
    """Base class for all package errors."""


class InputError(SwitchDwellError, ValueError):
    """Malformed or out-of-range input.

    ``path`` carries the field path for document-level diagnostics
    (e.g. ``modes[1].B``), or is empty.
    """

    def __init__(self, message, path=""):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InfeasibleError(SwitchDwellError):
    """A stability condition cannot be met (non-Hurwitz shift, etc.)."""

    def __init__(self, message, mode=None, eigenvalue=None):
        self.mode = mode
        self.eigenvalue = eigenvalue
        super().__init__(message)


class NumericError(SwitchDwellError, ArithmeticError):
    """Singular system or non-finite intermediate value."""


class SynthesisError(SwitchDwellError):
    """Gain synthesis failed for a mode (e.g. uncontrollable pair)."""

    def __init__(self, message, mode=None):
        self.mode = mode
        super().__init__(message)


class UnsupportedError(SwitchDwellError):
    """Configuration outside what the library implements."""
