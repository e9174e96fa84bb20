"""Exception types shared across the toolkit.

The CLI maps these onto exit codes, so library code should raise the most
specific type that applies rather than bare ValueError for user-facing
failures.
"""


class OvertokError(Exception):
    """Base class for all toolkit errors."""


class ConfigurationError(OvertokError):
    """Inputs are individually valid but inconsistent with each other."""


class FormatError(OvertokError):
    """A file or text input does not match its declared format."""


class ArpaParseError(FormatError):
    """An ARPA model file is malformed; message carries a line number."""


class IndexLoadError(FormatError):
    """A serialized index is unreadable: bad magic, version, size or checksum."""


class CountsUnavailableError(OvertokError):
    """An operation needs occurrence counts that were never annotated."""
