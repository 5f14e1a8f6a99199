"""Exception hierarchy shared by the toolkit."""

from __future__ import annotations

from pathlib import Path


class MidoriCpaError(Exception):
    """Base class for every error raised by this package."""


class MissingFileError(MidoriCpaError, FileNotFoundError):
    def __init__(self, path: str | Path):
        self.path = Path(path)
        super().__init__(f"{self.path}: no such file")


# -- configuration ---------------------------------------------------------

class ConfigError(MidoriCpaError, ValueError):
    """Invalid leakage or campaign configuration."""


class UnknownKeyError(ConfigError):
    pass


class ConfigValueError(ConfigError):
    """A value that does not parse or lies outside its allowed range."""


class InvariantError(ConfigError):
    """A combination of values violating a configuration invariant."""


# -- trace files -----------------------------------------------------------

class TraceFileError(MidoriCpaError):
    """A trace file that cannot be parsed.

    ``line`` is 1-based and ``None`` when the problem is not tied to a line.
    """

    def __init__(self, path: str | Path, line: int | None, message: str):
        self.path = Path(path)
        self.line = line
        self.message = message
        where = f"{self.path}:{line}" if line is not None else str(self.path)
        super().__init__(f"{where}: {message}")


class BadHeaderError(TraceFileError):
    pass


class BadHexError(TraceFileError):
    pass


class RaggedRowError(TraceFileError):
    pass


class NonNumericSampleError(TraceFileError):
    pass


class ManifestError(MidoriCpaError):
    pass


# -- attack ----------------------------------------------------------------

class AttackError(MidoriCpaError, ValueError):
    """Inputs on which the correlation attack cannot run."""
