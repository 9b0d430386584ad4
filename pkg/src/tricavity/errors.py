"""Exception types shared across the package."""


class TricavityError(Exception):
    """Base class for all package errors."""


class CutoffError(TricavityError, ValueError):
    """Photon-number cutoff is invalid or exceeded by a requested state."""


class TruncationError(TricavityError, ValueError):
    """A state loses more weight to the Fock cutoff than allowed."""


class ConvergenceError(TricavityError, RuntimeError):
    """Cutoff escalation did not converge; ``diagnostics`` holds the history."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class DegenerateSeriesError(TricavityError, ValueError):
    """Box counting on a series with no excursion (M = 0)."""


class GridBoundaryError(TricavityError, ValueError):
    """Critical-coupling spike sits on the edge of the scanned grid; widen it."""


class ConfigError(TricavityError, ValueError):
    """Invalid scenario configuration. ``line`` is the 1-based source line if known."""

    def __init__(self, message, line=None, source=None):
        self.line = line
        self.source = source
        where = ""
        if source is not None and line is not None:
            where = f"{source}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
