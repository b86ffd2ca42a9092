"""Exception hierarchy shared across the package."""


class SpikecountError(Exception):
    """Base class for all package-specific errors."""


class NumericError(SpikecountError):
    """A numeric routine failed: bad bracket, no convergence, non-PSD input."""


class DataError(SpikecountError):
    """Input data could not be parsed or has an unusable shape."""


class ConfigError(SpikecountError):
    """A plan, preset, or flag combination is invalid."""
