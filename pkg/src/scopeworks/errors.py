"""Exception types shared across the toolkit.

Every failure the library raises deliberately derives from
:class:`ScopeworksError`, so callers (including the CLI) can catch one
type and report the pipeline stage that failed.
"""


class ScopeworksError(Exception):
    """Base class for all toolkit errors."""

    #: pipeline stage tag, filled in by orchestration code when known
    stage: str | None = None


class CorpusParseError(ScopeworksError):
    """Malformed input file (XML syntax, bad JSON line, ...)."""

    def __init__(self, message, *, byte_offset=None, line=None):
        detail = []
        if line is not None:
            detail.append(f"line {line}")
        if byte_offset is not None:
            detail.append(f"byte offset {byte_offset}")
        if detail:
            message = f"{message} ({', '.join(detail)})"
        super().__init__(message)
        self.byte_offset = byte_offset
        self.line = line


class CorpusStructureError(ScopeworksError):
    """Well-formed input whose annotations do not hang together."""


class ColumnFormatError(CorpusParseError):
    """Column-layout violation (ragged rows, bad group arithmetic)."""


class SchemaError(ScopeworksError):
    """An interchange file violates its documented schema."""


class SchemaVersionError(SchemaError):
    """An interchange file declares an unsupported schema version."""


class EncodingError(ScopeworksError):
    """A sentence cannot be turned into a task instance."""


class TruncationError(ScopeworksError):
    """An instance does not fit the tokenizer's maximum length."""

    def __init__(self, instance_id, needed, max_len):
        super().__init__(
            f"instance {instance_id!r} needs {needed} tokens but the "
            f"maximum input length is {max_len}; refusing to truncate"
        )
        self.instance_id = instance_id
        self.needed = needed
        self.max_len = max_len


class InputError(ScopeworksError):
    """An argument violates an operation's precondition."""


class ConfigError(ScopeworksError):
    """An invalid or inconsistent configuration."""


class ReplayLookupError(ScopeworksError):
    """A replay backend has no stored rows for a requested instance."""
