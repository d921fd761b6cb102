"""Lexer for MiniSol source text.

Produces a flat token stream; doc comments (/// runs and /** */ blocks) are
kept as DOC tokens so the parser can attach them to declarations, everything
else comment-like is dropped.
"""
from __future__ import annotations

from dataclasses import dataclass, field


class LexError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


# Longest match first.
PUNCT = [
    "**",  # rejected later; lexed so the error is a parse error, not a lex error
    "+=", "-=", "++", "--", "=>", "==", "!=", "<=", ">=", "&&", "||",
    "+", "-", "*", "/", "%", "=", "<", ">", "!", "(", ")", "{", "}",
    "[", "]", ",", ";", ".", "?", ":",
]

KEYWORDS = frozenset({
    "contract", "function", "constructor", "event", "emit", "mapping",
    "address", "uint", "uint256", "bool", "bytes32", "bytes", "string",
    "memory", "calldata", "storage", "public", "external", "internal",
    "private", "payable", "view", "pure", "constant", "returns", "return",
    "require", "if", "else", "for", "true", "false", "new", "indexed",
    "this", "delete", "while",
})

TYPE_KEYWORDS = frozenset({"uint", "uint256", "bool", "address", "bytes32", "bytes", "mapping", "string"})


@dataclass(frozen=True)
class Token:
    kind: str          # IDENT, NUMBER, STRING, PUNCT, DOC, EOF
    value: str
    line: int
    col: int
    number: int = field(default=0, compare=False)

    def __repr__(self) -> str:
        return f"Token({self.kind}, {self.value!r}, {self.line}:{self.col})"


def tokenize(source: str) -> list[Token]:
    toks: list[Token] = []
    i = 0
    line = 1
    col = 1
    n = len(source)

    def here() -> tuple[int, int]:
        return line, col

    def advance(k: int) -> None:
        nonlocal i, line, col
        for _ in range(k):
            if i < n and source[i] == "\n":
                line += 1
                col = 1
            else:
                col += 1
            i += 1

    while i < n:
        c = source[i]
        if c in " \t\r\n":
            advance(1)
            continue
        # Comments / doc comments.
        if source.startswith("///", i):
            l0, c0 = here()
            lines = []
            while source.startswith("///", i):
                j = source.find("\n", i)
                if j == -1:
                    j = n
                lines.append(source[i:j])
                advance(j - i)
                # Swallow the newline and leading whitespace of the next line,
                # but only if it continues the /// run.
                k = i
                while k < n and source[k] in " \t\r\n":
                    k += 1
                if source.startswith("///", k):
                    advance(k - i)
                else:
                    break
            toks.append(Token("DOC", "\n".join(lines), l0, c0))
            continue
        if source.startswith("/**", i) and not source.startswith("/**/", i):
            l0, c0 = here()
            j = source.find("*/", i + 3)
            if j == -1:
                raise LexError("unterminated doc comment", l0, c0)
            toks.append(Token("DOC", source[i:j + 2], l0, c0))
            advance(j + 2 - i)
            continue
        if source.startswith("//", i):
            j = source.find("\n", i)
            advance((j if j != -1 else n) - i)
            continue
        if source.startswith("/*", i):
            l0, c0 = here()
            j = source.find("*/", i + 2)
            if j == -1:
                raise LexError("unterminated comment", l0, c0)
            advance(j + 2 - i)
            continue
        # String literal.
        if c == '"':
            l0, c0 = here()
            j = i + 1
            buf = []
            while j < n and source[j] != '"':
                if source[j] == "\\" and j + 1 < n:
                    esc = source[j + 1]
                    buf.append({"n": "\n", "t": "\t", '"': '"', "\\": "\\"}.get(esc, esc))
                    j += 2
                else:
                    if source[j] == "\n":
                        raise LexError("unterminated string literal", l0, c0)
                    buf.append(source[j])
                    j += 1
            if j >= n:
                raise LexError("unterminated string literal", l0, c0)
            toks.append(Token("STRING", "".join(buf), l0, c0))
            advance(j + 1 - i)
            continue
        # Number.
        if c.isdigit():
            l0, c0 = here()
            if source.startswith("0x", i) or source.startswith("0X", i):
                j = i + 2
                while j < n and (source[j].isdigit() or source[j].lower() in "abcdef"):
                    j += 1
                if j == i + 2:
                    raise LexError("malformed hex literal", l0, c0)
                text = source[i:j]
                val = int(text, 16)
            else:
                j = i
                while j < n and source[j].isdigit():
                    j += 1
                text = source[i:j]
                val = int(text)
            if j < n and (source[j].isalpha() or source[j] == "_"):
                raise LexError(f"malformed number near {source[i:j + 1]!r}", l0, c0)
            toks.append(Token("NUMBER", text, l0, c0, number=val))
            advance(j - i)
            continue
        # Identifier / keyword.
        if c.isalpha() or c == "_" or c == "$":
            l0, c0 = here()
            j = i
            while j < n and (source[j].isalnum() or source[j] in "_$"):
                j += 1
            toks.append(Token("IDENT", source[i:j], l0, c0))
            advance(j - i)
            continue
        # Punctuation.
        for p in PUNCT:
            if source.startswith(p, i):
                l0, c0 = here()
                toks.append(Token("PUNCT", p, l0, c0))
                advance(len(p))
                break
        else:
            raise LexError(f"unexpected character {c!r}", line, col)
    toks.append(Token("EOF", "", line, col))
    return toks
