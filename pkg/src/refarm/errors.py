"""Exception types shared across the package."""


class RefarmError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(RefarmError, ValueError):
    """A parameter violates its documented domain or an invariant."""


class ConfigError(RefarmError):
    """A configuration file or override could not be parsed or validated."""


class NumericalError(RefarmError):
    """An iterative numerical routine failed to reach its tolerance."""
