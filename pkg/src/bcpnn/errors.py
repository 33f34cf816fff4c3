"""Exception hierarchy shared by the library and the command-line harness."""


class BCPNNError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class ConfigError(BCPNNError, ValueError):
    """Invalid hyperparameters or configuration file content."""

    exit_code = 2


class DataError(BCPNNError, ValueError):
    """Malformed or inconsistent input data."""

    exit_code = 3


class IdxFormatError(DataError):
    """IDX parse failure at a known byte offset."""

    def __init__(self, message, offset):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class BadMagicError(IdxFormatError):
    pass


class WrongKindError(BadMagicError):
    """The magic number is valid IDX, but for the other file kind."""


class TruncatedError(IdxFormatError):
    pass


class CountMismatchError(IdxFormatError):
    pass


class CheckpointError(DataError):
    """Checkpoint file is corrupted, truncated or from another version."""


class DimensionError(BCPNNError, ValueError):
    """Array shapes do not match the layer layout they are used with."""

    exit_code = 3


class NumericDomainError(BCPNNError, ArithmeticError):
    """Non-finite values where finite ones are required."""

    exit_code = 4

    def __init__(self, message, hc=None, sample=None):
        super().__init__(message)
        self.hc = hc
        self.sample = sample
