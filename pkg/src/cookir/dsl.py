"""Parser and canonical printer for the textual program language.

Example::

    # comments run to end of line
    h1 = Bake(chicken, tool=oven, time='10 minutes', temp='400 degrees F');
    out = Serve(h1);

Positional arguments are ingredients or variable references, keyword arguments
are parameter roles (``tool``, ``quantity``, ``time``, ``temp``, ``how``,
``why``) plus the ``output`` label naming the intermediate product.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator

from .errors import CookirError
from .ir import (OUT, ROLES, ArgRef, Command, Entity, EntityKind, Lit, Program, Var,
                 parse_var_name)

OUTPUT_KEYWORD = "output"
SEPARATOR = "---"

_BARE = r"[^\s=(),;'\"#\\]+"
_BARE_RE = re.compile(_BARE + r"\Z")
_TOKEN_RE = re.compile(rf"(?P<ws>\s+)|(?P<comment>#[^\n]*)|(?P<bare>{_BARE})|(?P<punct>[=(),;])")
_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'"}
_UNESCAPES = {v: "\\" + k for k, v in _ESCAPES.items()}


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1


class ParseError(CookirError):
    def __init__(self, span: SourceSpan, message: str, expected: str | None = None):
        text = f"{span.line}:{span.column}: {message}"
        if expected:
            text += f" (expected {expected})"
        super().__init__(text)
        self.span = span
        self.message = message
        self.expected = expected


@dataclass(frozen=True)
class _Tok:
    kind: str  # "bare" | "str" | one of = ( ) , ;
    text: str
    span: SourceSpan


class _Lexer:
    def __init__(self, text: str, first_line: int = 1):
        self.text = text
        self.first_line = first_line
        self._line_starts = [0] + [m.end() for m in re.finditer("\n", text)]

    def span(self, offset: int, length: int = 1) -> SourceSpan:
        lo, hi = 0, len(self._line_starts) - 1
        while lo < hi:
            mid = (lo + hi + 1) // 2
            if self._line_starts[mid] <= offset:
                lo = mid
            else:
                hi = mid - 1
        return SourceSpan(self.first_line + lo, offset - self._line_starts[lo] + 1, max(1, length))

    def tokens(self) -> Iterator[_Tok]:
        text, pos = self.text, 0
        while pos < len(text):
            if text[pos] == "'":
                tok, pos = self._string(pos)
                yield tok
                continue
            m = _TOKEN_RE.match(text, pos)
            if m is None:
                raise ParseError(self.span(pos), f"unexpected character {text[pos]!r}")
            if m.lastgroup == "bare":
                yield _Tok("bare", m.group(), self.span(pos, m.end() - pos))
            elif m.lastgroup == "punct":
                yield _Tok(m.group(), m.group(), self.span(pos))
            pos = m.end()

    def _string(self, start: int) -> tuple[_Tok, int]:
        text, pos, out = self.text, start + 1, []
        while pos < len(text):
            ch = text[pos]
            if ch == "'":
                return _Tok("str", "".join(out), self.span(start, pos + 1 - start)), pos + 1
            if ch == "\\":
                if pos + 1 >= len(text):
                    break
                out.append(_ESCAPES.get(text[pos + 1], text[pos + 1]))
                pos += 2
                continue
            out.append(ch)
            pos += 1
        raise ParseError(self.span(start, len(text) - start), "unterminated string", "'")


class _Parser:
    def __init__(self, text: str, first_line: int = 1):
        self.lexer = _Lexer(text, first_line)
        self.toks = list(self.lexer.tokens())
        self.pos = 0
        self.text = text

    def _eof_span(self) -> SourceSpan:
        stripped = self.text.rstrip()
        return self.lexer.span(max(0, len(stripped) - 1))

    def peek(self, ahead: int = 0) -> _Tok | None:
        i = self.pos + ahead
        return self.toks[i] if i < len(self.toks) else None

    def expect(self, kind: str, what: str) -> _Tok:
        tok = self.peek()
        if tok is None:
            raise ParseError(self._eof_span(), "unexpected end of input", what)
        if tok.kind != kind:
            raise ParseError(tok.span, f"unexpected {tok.text!r}", what)
        self.pos += 1
        return tok

    def value(self, what: str) -> _Tok:
        tok = self.peek()
        if tok is not None and tok.kind in ("bare", "str"):
            if not tok.text:
                raise ParseError(tok.span, "empty value", what)
            self.pos += 1
            return tok
        if tok is None:
            raise ParseError(self._eof_span(), "unexpected end of input", what)
        raise ParseError(tok.span, f"unexpected {tok.text!r}", what)

    def statements(self):
        if not self.toks:
            raise ParseError(self._eof_span(), "empty input", "statement")
        stmts = []
        while self.peek() is not None:
            name = self.expect("bare", "variable name")
            self.expect("=", "'='")
            action = self.value("action name")
            self.expect("(", "'('")
            args: list[tuple[_Tok | None, _Tok]] = []
            if self.peek() is not None and self.peek().kind != ")":
                while True:
                    args.append(self.arg())
                    tok = self.peek()
                    if tok is not None and tok.kind == ",":
                        self.pos += 1
                        continue
                    break
            self.expect(")", "',' or ')'")
            self.expect(";", "';'")
            stmts.append((name, action, args))
        return stmts

    def arg(self):
        tok, nxt = self.peek(), self.peek(1)
        if tok is not None and tok.kind == "bare" and nxt is not None and nxt.kind == "=":
            if tok.text not in ROLES and tok.text != OUTPUT_KEYWORD:
                raise ParseError(tok.span, f"unknown role {tok.text!r}",
                                 "one of " + ", ".join(list(ROLES) + [OUTPUT_KEYWORD]))
            self.pos += 2
            return tok, self.value(f"value for {tok.text}")
        return None, self.value("argument")


def parse_program(text: str, *, first_line: int = 1) -> Program:
    """Parse one program. Raises :class:`ParseError` at the first offending token."""
    parser = _Parser(text, first_line)
    stmts = parser.statements()

    defined: dict[str, int] = {}
    for i, (name, _, _) in enumerate(stmts):
        if name.text in defined:
            raise ParseError(name.span, f"variable {name.text!r} defined twice")
        defined[name.text] = i
    n = len(stmts)

    def resolve(tok: _Tok, kind: EntityKind) -> ArgRef:
        if tok.kind == "bare":
            if tok.text in defined:
                return Var(defined[tok.text])
            idx = parse_var_name(tok.text)
            if idx is not None:
                return Var(idx)
            if tok.text == OUT:
                return Var(n - 1)
        return Lit(Entity(kind, tok.text))

    commands = []
    for i, (name, action, args) in enumerate(stmts):
        inputs: list[ArgRef] = []
        params: dict[str, list[ArgRef]] = {}
        label = None
        for key, val in args:
            if key is None:
                inputs.append(resolve(val, EntityKind.INGREDIENT))
            elif key.text == OUTPUT_KEYWORD:
                if label is not None:
                    raise ParseError(key.span, "output label given twice")
                label = Entity(EntityKind.OUTPUT, val.text)
            else:
                params.setdefault(key.text, []).append(resolve(val, ROLES[key.text]))
        out_var = OUT if name.text == OUT else f"h{i + 1}"
        commands.append(Command(Entity(EntityKind.ACTION, action.text), tuple(inputs),
                                {r: tuple(v) for r, v in params.items()}, out_var, label))
    return Program(tuple(commands))


def parse_programs(text: str) -> list[Program]:
    """Parse a file holding one or more programs separated by ``---`` lines."""
    chunks, current, start = [], [], 1
    for lineno, line in enumerate(re.findall(r"[^\n]*\n|[^\n]+\Z", text), 1):
        if line.strip() == SEPARATOR:
            chunks.append((start, "".join(current)))
            current, start = [], lineno + 1
        else:
            current.append(line)
    chunks.append((start, "".join(current)))
    if len(chunks) == 1:
        return [parse_program(text)]
    return [parse_program(chunk, first_line=line) for line, chunk in chunks]


# --------------------------------------------------------------------------
# printing


def _quote(s: str) -> str:
    return "'" + "".join(_UNESCAPES.get(ch, ch) for ch in s) + "'"


def _is_varlike(s: str) -> bool:
    return s == OUT or parse_var_name(s) is not None


def format_value(s: str, reserved: frozenset[str] = frozenset()) -> str:
    if _BARE_RE.match(s) and not _is_varlike(s) and s not in reserved:
        return s
    return _quote(s)


def print_program(p: Program) -> str:
    names = [c.output_var for c in p.commands]
    reserved = frozenset(names)

    def arg(a: ArgRef) -> str:
        if isinstance(a, Var):
            return names[a.index] if 0 <= a.index < len(names) else f"h{a.index + 1}"
        return format_value(a.entity.value, reserved)

    lines = []
    for c in p.commands:
        parts = [arg(a) for a in c.inputs]
        for role, values in c.params.items():
            parts.extend(f"{role}={arg(a)}" for a in values)
        if c.output_label is not None:
            parts.append(f"{OUTPUT_KEYWORD}={format_value(c.output_label.value)}")
        action = c.action.value
        action = action if _BARE_RE.match(action) else _quote(action)
        lines.append(f"{c.output_var} = {action}({', '.join(parts)});")
    return "\n".join(lines)


def print_programs(programs: list[Program]) -> str:
    return f"\n{SEPARATOR}\n".join(print_program(p) for p in programs)
