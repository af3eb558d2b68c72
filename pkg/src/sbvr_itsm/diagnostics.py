"""Diagnostics shared by the vocabulary parser, the tree loader and the CLI."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Optional


class Severity(enum.Enum):
    ERROR = "error"
    WARNING = "warning"


@dataclass(frozen=True)
class Diagnostic:
    severity: Severity
    message: str
    line: Optional[int] = None
    # machine-readable tag, e.g. "PriorityTie"
    code: Optional[str] = None

    @classmethod
    def error(cls, message: str, line: Optional[int] = None, code: Optional[str] = None) -> "Diagnostic":
        return cls(Severity.ERROR, message, line, code)

    @classmethod
    def warning(cls, message: str, line: Optional[int] = None, code: Optional[str] = None) -> "Diagnostic":
        return cls(Severity.WARNING, message, line, code)

    @property
    def is_error(self) -> bool:
        return self.severity is Severity.ERROR

    def __str__(self) -> str:
        if self.line is None:
            return f"{self.severity.value} {self.message}"
        return f"{self.severity.value} {self.line} {self.message}"


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.is_error for d in diagnostics)


class DiagnosticError(Exception):
    """Raised when an input cannot be turned into a model.

    Carries every diagnostic found, not just the first one.
    """

    def __init__(self, diagnostics: Iterable[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


class VocabularyError(DiagnosticError):
    pass


class TreeError(DiagnosticError):
    pass
