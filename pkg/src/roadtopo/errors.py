"""Error types distinguishing bad input data from programming errors.

Contract violations (extent mismatches, invalid windows, bad parameters) raise
plain ValueError; the classes below mark problems with external data so the
CLI can map them to its I/O-error exit code.
"""
from __future__ import annotations


class ParseError(ValueError):
    """Malformed graph text. Carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class FileFormatError(ValueError):
    """Corrupt or inconsistent binary grid file."""
