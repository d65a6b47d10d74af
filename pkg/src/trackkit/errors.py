"""Exception types shared across the package."""


class TrackkitError(Exception):
    """Base class for all package-specific errors."""


class InputError(TrackkitError):
    """Malformed or missing input data (CLI exit code 1)."""


class ConfigError(TrackkitError):
    """Configuration value outside its valid range (CLI exit code 2)."""
