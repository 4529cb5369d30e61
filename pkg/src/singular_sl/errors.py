"""Exception hierarchy shared by all modules."""


class SpectralError(Exception):
    """Base class for every error raised by this package."""


class GridMismatchError(SpectralError, ValueError):
    """Two grid functions live on different grids."""


class AlignmentError(SpectralError, ValueError):
    """Coefficient sequences cannot be aligned to a common index range."""


class ResolutionError(SpectralError, ValueError):
    """A request exceeds what the grid can resolve (refine the grid)."""


class AccuracyError(SpectralError, ArithmeticError):
    """A stochastic or iterative estimate missed its accuracy target."""


class BracketingError(SpectralError, ArithmeticError):
    """Root localization could not account for the expected number of roots.

    The ``scan`` attribute carries the (lambda, value) table that was used.
    """

    def __init__(self, message, scan=None):
        super().__init__(message)
        self.scan = scan


class ContourError(SpectralError, ArithmeticError):
    """A winding number was not close to an integer (contour hit a root)."""


class FactorizationError(SpectralError, ArithmeticError):
    """The zero-energy solution vanishes or the Riccati check failed."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ConfigError(SpectralError, ValueError):
    """Invalid run configuration; ``line`` is 1-based when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
