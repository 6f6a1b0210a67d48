"""Exception types shared across the package."""


class InputError(ValueError):
    """Raised when caller-supplied data or configuration is invalid."""


class NumericalError(RuntimeError):
    """Raised when a numerical routine cannot produce a usable result."""
