"""Exception hierarchy shared by all modules."""


class SpatialHOMError(Exception):
    """Base class for every error raised by the package."""


class InvalidParameterError(SpatialHOMError, ValueError):
    """An argument falls outside an operation's domain."""


class ResolutionError(SpatialHOMError, ValueError):
    """A tabulated grid is too coarse for the requested computation."""


class QuadratureError(SpatialHOMError, ArithmeticError):
    """Adaptive quadrature failed to reach its tolerance.

    ``achieved`` holds the error estimate at the point of failure.
    """

    def __init__(self, message: str, achieved: float):
        super().__init__(f"{message} (achieved error estimate {achieved:.3e})")
        self.achieved = achieved


class NoDataError(SpatialHOMError, ValueError):
    """No usable (non-lost) detection events."""


class OutOfModelError(SpatialHOMError, ValueError):
    """Observed statistics cannot be produced by the model for any separation."""


class ParseError(SpatialHOMError, ValueError):
    """Malformed input file; ``line`` is 1-based when known."""

    def __init__(self, message: str, line: int | None = None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(where + message)
        self.line = line
