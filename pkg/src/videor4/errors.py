"""Exception hierarchy shared across the toolkit.

``InputError`` subclasses map to CLI exit status 1; anything else that
escapes a command maps to exit status 2.
"""

from __future__ import annotations


class VideoR4Error(Exception):
    """Base class for all toolkit errors."""


class InputError(VideoR4Error):
    """Bad user-supplied data or configuration."""


class CorpusError(InputError):
    """Malformed or inconsistent corpus data.

    Carries optional file/line/field context so ingestion failures point
    at the offending record.
    """

    def __init__(self, message: str, *, file: str | None = None,
                 line: int | None = None, field: str | None = None):
        self.file = file
        self.line = line
        self.field = field
        prefix = ""
        if file is not None:
            prefix = file if line is None else f"{file}:{line}"
        if field is not None:
            prefix = f"{prefix} field '{field}'" if prefix else f"field '{field}'"
        super().__init__(f"{prefix}: {message}" if prefix else message)


class ConfigError(InputError):
    """Invalid configuration value or missing config file."""


class TurnParseError(InputError):
    """A turn's wire text does not parse; ``offset`` is the first bad position."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"offset {offset}: {message}")
