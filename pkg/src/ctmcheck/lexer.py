"""Tokenizer shared by the model and property parsers.

Produces a small, lookahead-2 token stream. Token kinds: 'ident', 'int',
'real', 'string' (a double-quoted name), 'op', 'eof'. `//` comments run to
end of line. `0..` lexes as an int followed by the range operator, never as
a decimal point.
"""

from .errors import ParseError

# longest match first
_OPERATORS = (
    "..", "->", "<=", ">=", "!=",
    "[", "]", "(", ")", ";", ":", "'", "=", "<", ">",
    "+", "-", "*", "/", "&", "|", "!", "?", ",",
)

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | set("0123456789")
_DIGITS = set("0123456789")


class Token:
    __slots__ = ("kind", "text", "line", "column")

    def __init__(self, kind, text, line, column):
        self.kind = kind
        self.text = text
        self.line = line
        self.column = column

    def __repr__(self):
        return f"Token({self.kind}, {self.text!r}, {self.line}:{self.column})"


def tokenize(source):
    """Yield Tokens for `source`, ending with a single 'eof' token."""
    i = 0
    n = len(source)
    line = 1
    col = 1

    def advance(k=1):
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
            advance()
            continue
        if c == "/" and i + 1 < n and source[i + 1] == "/":
            while i < n and source[i] != "\n":
                advance()
            continue
        start_line, start_col = line, col
        if c in _IDENT_START:
            j = i
            while j < n and source[j] in _IDENT_CONT:
                j += 1
            text = source[i:j]
            advance(j - i)
            yield Token("ident", text, start_line, start_col)
            continue
        if c in _DIGITS:
            j = i
            while j < n and source[j] in _DIGITS:
                j += 1
            is_real = False
            # fractional part, but not the '..' range operator
            if j < n and source[j] == "." and not (j + 1 < n and source[j + 1] == "."):
                if j + 1 >= n or source[j + 1] not in _DIGITS:
                    raise ParseError("digit expected after decimal point",
                                     start_line, start_col)
                is_real = True
                j += 1
                while j < n and source[j] in _DIGITS:
                    j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k] in _DIGITS:
                    is_real = True
                    j = k
                    while j < n and source[j] in _DIGITS:
                        j += 1
            text = source[i:j]
            advance(j - i)
            yield Token("real" if is_real else "int", text, start_line, start_col)
            continue
        if c == '"':
            j = i + 1
            while j < n and source[j] != '"':
                if source[j] == "\n":
                    raise ParseError("unterminated quoted name", start_line, start_col)
                j += 1
            if j >= n:
                raise ParseError("unterminated quoted name", start_line, start_col)
            text = source[i + 1:j]
            advance(j - i + 1)
            yield Token("string", text, start_line, start_col)
            continue
        for op in _OPERATORS:
            if source.startswith(op, i):
                advance(len(op))
                yield Token("op", op, start_line, start_col)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", start_line, start_col)
    yield Token("eof", "", line, col)


class TokenStream:
    """Token cursor with two tokens of lookahead."""

    def __init__(self, source):
        self._tokens = list(tokenize(source))
        self._pos = 0

    @property
    def current(self):
        return self._tokens[self._pos]

    @property
    def next(self):
        if self._pos + 1 < len(self._tokens):
            return self._tokens[self._pos + 1]
        return self._tokens[-1]

    def at_end(self):
        return self.current.kind == "eof"

    def consume(self):
        tok = self.current
        if tok.kind != "eof":
            self._pos += 1
        return tok

    def check(self, kind, text=None):
        tok = self.current
        return tok.kind == kind and (text is None or tok.text == text)

    def accept(self, kind, text=None):
        if self.check(kind, text):
            return self.consume()
        return None

    def expect(self, kind, text=None, what=None):
        if self.check(kind, text):
            return self.consume()
        wanted = what or (text if text is not None else kind)
        got = self.current.text or self.current.kind
        raise ParseError(f"expected {wanted!r} but found {got!r}",
                         self.current.line, self.current.column)

    def error(self, message):
        raise ParseError(message, self.current.line, self.current.column)
