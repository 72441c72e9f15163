"""Shared error type for static (resolution and typing) failures."""

from __future__ import annotations

from typing import Optional

from .ast import Span
from .lexer import line_col


class StaticError(Exception):
    """A resolution or typing error, renderable as ``file:line:col: msg``."""

    def __init__(self, message: str, span: Optional[Span] = None):
        super().__init__(message)
        self.message = message
        self.span = span

    def render(self, source: str = "") -> str:
        if self.span is None:
            return self.message
        if source:
            line, col = line_col(source, self.span.start)
            return f"{self.span.file}:{line}:{col}: {self.message}"
        return f"{self.span.file}:+{self.span.start}: {self.message}"


class EvalError(Exception):
    """A runtime fault: a stuck term, a partial function table, an
    out-of-range projection, and the like."""
