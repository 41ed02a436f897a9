"""Exception hierarchy.

The CLI maps ``ConfigurationError`` to exit code 2 and every other
``CsbcError`` to exit code 1.
"""


class CsbcError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(CsbcError, ValueError):
    """Invalid parameter or inconsistent configuration."""


class InputError(CsbcError, ValueError):
    """Malformed numeric input (NaN, wrong dimension, ...)."""


class ParseError(CsbcError, ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FormatError(CsbcError, ValueError):
    """Corrupt, truncated or unsupported file content."""


class DegenerateTargetError(CsbcError, ValueError):
    """Regression target has no variance."""


class DegenerateDistributionError(CsbcError, ValueError):
    """Score sample has fewer than two distinct values."""


class EmptyTrainingSetError(CsbcError, ValueError):
    pass


class OutOfBoundsError(CsbcError, ValueError):
    pass


class PlacementError(CsbcError, RuntimeError):
    pass


class UndefinedMissRateError(CsbcError, ValueError):
    pass


class MissingImageError(CsbcError, FileNotFoundError):
    def __init__(self, frame_id: str, detail: str = ""):
        self.frame_id = frame_id
        msg = f"no image for frame {frame_id!r}"
        if detail:
            msg += f" ({detail})"
        super().__init__(msg)
