"""Exception types shared across the package."""


class ChoquardError(Exception):
    """Base class for all package-specific errors."""


class InvalidParameterError(ChoquardError, ValueError):
    """A scalar argument is outside its admissible range."""


class DegenerateFieldError(ChoquardError, ValueError):
    """An operation received a field without the structure it requires
    (zero field, vanishing kinetic or nonlocal term, ...)."""


class NumericalFailureError(ChoquardError, RuntimeError):
    """An iteration produced non-finite values or failed to make progress."""

    def __init__(self, message: str, diagnostics: dict | None = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class CaseMismatchError(ChoquardError, ValueError):
    """Parameters do not sit at the critical exponent the requested case needs."""


class NonMonotoneMarginError(ChoquardError, RuntimeError):
    """Sampled margins are not monotone in the search knob; bisection refused."""

    def __init__(self, message: str, samples: list | None = None):
        super().__init__(message)
        self.samples = samples or []


class ConfigError(ChoquardError, ValueError):
    """A run configuration document is malformed or has unknown keys."""
