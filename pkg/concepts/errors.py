class GridSchedulingError(Exception):
    """Base class for every error raised on purpose by this package."""


class GridConfigError(GridSchedulingError, ValueError):
    """Invalid grid, agent or experiment configuration."""


class ConfigParseError(GridConfigError):
    """Config file could not be parsed or failed validation; line is 1-based when known."""

    def __init__(self, message: str, line: int = None):
        self.line = line
        if line is not None and not message.startswith(f"line {line}:"):
            message = f"line {line}: {message}"
        super().__init__(message)


class PolicyMismatchError(GridConfigError):
    """Policy dimensions do not fit the grid configuration."""


class EpisodeCompleteError(GridSchedulingError, RuntimeError):
    """step() was called on a finished episode."""


class UnsupportedDiscountError(GridSchedulingError, ValueError):
    """Discount factor outside [0, 1)."""


class PolicyLoadError(GridSchedulingError):
    """Policy file is corrupt, truncated or from another format version."""
