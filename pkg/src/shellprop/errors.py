"""Exception hierarchy shared by all modules.

The CLI maps these onto process exit codes; library callers catch them
directly.
"""


class ShellPropError(Exception):
    """Base class for all library errors."""


class InputError(ShellPropError):
    """Malformed or out-of-contract input data (bad ids, shapes, files)."""


class ConfigError(ShellPropError):
    """Invalid hyperparameter or configuration value."""


class NumericError(ShellPropError):
    """Numerical failure: non-finite values, zero row sums, overflow risk."""


class ResourceError(ShellPropError):
    """Problem size exceeds what the requested computation path supports."""
