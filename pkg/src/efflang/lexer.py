"""Tokenizer for ``.eff`` source files.

Line comments start with ``--``.  Identifiers may contain ``'``, which the
fresh-name supply exploits so printed terms stay parseable.
"""

from __future__ import annotations

from dataclasses import dataclass

from .ast import Span

KEYWORDS = {
    "return", "do", "in", "handle", "with", "to", "match", "fun", "rec",
    "force", "thunk", "if", "then", "else", "let", "theory", "base", "arity",
    "op", "handler", "def", "main", "eq", "when", "use", "prj", "gen",
    "type", "interpret", "and", "or", "not", "F", "U",
}

# Order matters: longest first.
SYMBOLS = [
    "<-", "->", "=>", "~>", "!=", "==", "<=",
    "(", ")", "{", "}", "[", "]", "<", ">", ",", ".", ":", ";", "|",
    "=", "!", "#", "'", "*", "+", "-",
]


@dataclass(frozen=True)
class Token:
    kind: str        # "ident", "int", a keyword, or a symbol
    text: str
    span: Span


class LexError(Exception):
    def __init__(self, message: str, span: Span):
        super().__init__(message)
        self.message = message
        self.span = span


def tokenize(src: str, filename: str = "<input>") -> list[Token]:
    toks: list[Token] = []
    i, n = 0, len(src)
    while i < n:
        c = src[i]
        if c in " \t\r\n":
            i += 1
            continue
        if src.startswith("--", i):
            j = src.find("\n", i)
            i = n if j < 0 else j + 1
            continue
        if c.isalpha() or c == "_":
            j = i + 1
            while j < n and (src[j].isalnum() or src[j] in "_'"):
                j += 1
            text = src[i:j]
            kind = text if text in KEYWORDS else "ident"
            toks.append(Token(kind, text, Span(filename, i, j)))
            i = j
            continue
        if c.isdigit():
            j = i + 1
            while j < n and src[j].isdigit():
                j += 1
            toks.append(Token("int", src[i:j], Span(filename, i, j)))
            i = j
            continue
        for sym in SYMBOLS:
            if src.startswith(sym, i):
                toks.append(Token(sym, sym, Span(filename, i, i + len(sym))))
                i += len(sym)
                break
        else:
            raise LexError(f"unexpected character {c!r}", Span(filename, i, i + 1))
    toks.append(Token("eof", "", Span(filename, n, n)))
    return toks


def line_col(src: str, offset: int) -> tuple[int, int]:
    """1-based line and column of a byte offset."""
    line = src.count("\n", 0, offset) + 1
    last_nl = src.rfind("\n", 0, offset)
    return line, offset - last_nl
