"""Exception types shared across the package."""


class EarlyEmoError(Exception):
    """Base class for all package errors."""


class ConfigError(EarlyEmoError):
    """Invalid configuration or dimension mismatch."""


class NumericError(EarlyEmoError):
    """NaN/inf encountered where finite values are required."""


class FormatError(EarlyEmoError):
    """Malformed or truncated binary/text file."""


class ManifestError(FormatError):
    """Corpus manifest failed parsing or validation."""


class CheckError(EarlyEmoError):
    """A gradient check could not be carried out (e.g. non-deterministic loss)."""
