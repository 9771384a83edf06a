"""Exception hierarchy shared by every stage of the pipeline.

Grouped so the CLI can map failures onto distinct exit codes:
config problems, bad data, training divergence, and fetch failures.
"""


class EegmiError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(EegmiError):
    """Invalid configuration: unknown keys, bad values, contract violations."""


class ArgumentError(EegmiError):
    """An operation was called with arguments outside its domain."""


class ShapeError(EegmiError):
    """Tensor/array shapes are incompatible."""


class DataError(EegmiError):
    """Input data violates a precondition (non-finite values, empty sets, ...)."""


class DivergenceError(EegmiError):
    """Training produced a non-finite loss."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class EdfParseError(DataError):
    """Malformed EDF/EDF+ content; carries the byte offset when known."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class FetchError(EegmiError):
    """Network-level fetch failure; retrying may succeed."""


class InvalidRecordError(EegmiError):
    """Subject/run outside the archive's catalogue (or HTTP 404)."""


class ChecksumError(FetchError):
    """Downloaded file did not match its published checksum."""


class CheckpointError(EegmiError):
    """Checkpoint file corrupt or incompatible with the requested model spec."""
