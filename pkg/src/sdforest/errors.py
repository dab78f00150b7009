"""Exception hierarchy.  The CLI maps each class to an exit code."""


class SDFError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 4


class DataError(SDFError, ValueError):
    """Malformed or inconsistent input data (CSV files, pair sets, shapes)."""

    exit_code = 2


class ModelFormatError(DataError):
    """A model file failed version, schema or invariant checks on load."""


class ConfigError(SDFError, ValueError):
    """Invalid configuration value or unknown configuration key."""

    exit_code = 3


class InvariantError(SDFError, ValueError):
    """An internal invariant was violated (simplex feasibility, normalization...)."""

    exit_code = 4
