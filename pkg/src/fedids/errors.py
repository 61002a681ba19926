"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: ConfigError -> 1, DataError (and its
wire-protocol subclasses) -> 2, OSError -> 3.
"""


class FidsError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(FidsError):
    """Invalid configuration value or argument."""


class DataError(FidsError):
    """Data or model violates a contract (shape, range, schema)."""


class WireError(DataError):
    """Malformed bytes on the model-exchange wire."""


class TruncatedError(WireError):
    """Input ended before a complete record could be read."""


class MagicError(WireError):
    """Frame does not start with the expected magic bytes."""


class VersionError(WireError):
    """Frame carries an unsupported protocol version."""


class ChecksumError(WireError):
    """Payload checksum does not match."""


class TagError(WireError):
    """Unknown record tag or message type."""
