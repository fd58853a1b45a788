"""Exception types shared across the package.

The CLI maps these onto its exit-code taxonomy: ParseError -> 1,
ConfigError -> 2, and I/O failures (OSError) -> 3.
"""


class EvhtaError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(EvhtaError):
    """Malformed input data (event files, tensor files).

    ``line`` is set for text inputs, ``offset`` (bytes) for binary ones;
    either may be None when not applicable.
    """

    def __init__(self, message: str, *, line: int | None = None,
                 offset: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)
        self.line = line
        self.offset = offset


class ConfigError(EvhtaError):
    """Invalid configuration: unknown key, bad value, or violated constraint."""


class SinkWriteError(EvhtaError):
    """A frame sink failed while encoding; carries the window index."""

    def __init__(self, window_index: int, cause: BaseException):
        super().__init__(f"sink write failed at window {window_index}: {cause}")
        self.window_index = window_index
