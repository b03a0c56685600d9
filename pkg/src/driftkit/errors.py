"""Exception hierarchy.

CLI exit codes key off the two top-level families: ``UsageError`` (and its
``ConfigurationError`` subclass) exit with 1, ``DataError`` subclasses with 2.
"""


class DriftkitError(Exception):
    """Base class for every error raised by driftkit."""


class UsageError(DriftkitError, ValueError):
    """Bad call: wrong dimensions, missing prerequisite model, and so on."""


class ConfigurationError(UsageError):
    """Invalid run configuration or an unusable split."""


class DataError(DriftkitError, ValueError):
    """The data itself cannot be processed."""


class IngestionError(DataError):
    pass


class BinningError(DataError):
    pass


class FittingError(DataError):
    pass


class SupportError(DataError):
    """A target label has no mass under the source sample."""
