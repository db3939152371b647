from typing import Optional


class AttentionError(Exception):
    """Base class for every error raised by the pipeline."""


class ConfigurationError(AttentionError):
    """A parameter is outside its allowed range."""


class DataError(AttentionError):
    """Input data violates a format or invariant."""


class TokenizeError(DataError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"{message} at line {line}, column {column}")
        self.reason, self.line, self.column = message, line, column


class FixationParseError(DataError):
    def __init__(self, message: str, row: Optional[int] = None):
        super().__init__(f"row {row}: {message}" if row is not None else message)
        self.row = row


class CorpusError(DataError):
    pass


class DivergenceError(AttentionError):
    """Training produced a non-finite loss."""
