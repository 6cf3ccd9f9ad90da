"""Exception types shared across the package.

The three classes partition every failure mode the library reports, and the
command-line layer maps them onto process exit codes (config -> 2, data -> 3,
numerical -> 4).
"""


class ConfigError(ValueError):
    """A parameter or option is out of range or options are incompatible."""


class DataError(ValueError):
    """Input data is malformed, non-finite, or geometrically degenerate."""


class NumericalError(RuntimeError):
    """A numerical routine failed to meet its accuracy contract."""
