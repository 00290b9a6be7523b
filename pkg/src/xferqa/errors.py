"""Exception types shared across the toolkit.

The CLI maps these onto exit codes: ConfigError -> 2, DataError -> 3,
NumericError -> 4. Plain ValueError is reserved for programmer errors
(bad arguments to library calls).
"""


class XferqaError(Exception):
    """Base class for toolkit errors."""


class ConfigError(XferqaError):
    """Invalid or incomplete experiment configuration."""


class DataError(XferqaError):
    """Input files or corpus/embedding contents violate a contract."""


class NumericError(XferqaError):
    """Non-finite values encountered during training or checking."""
