"""Exception types shared across the package.

The CLI maps these onto exit codes: usage errors -> 1, data errors -> 2,
numeric failures -> 3.
"""


class StancelabError(Exception):
    """Base class for package errors."""


class UsageError(StancelabError):
    """Bad command line or config key."""


class DataError(StancelabError):
    """Missing or malformed input data."""


class NumericError(StancelabError):
    """Non-finite loss or gradient encountered during training."""
