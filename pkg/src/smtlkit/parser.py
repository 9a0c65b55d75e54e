"""Concrete syntax: parsing and canonical pretty-printing.

The grammar, lowest precedence first:

    formula  := implies
    implies  := or ("->" implies)?                  right-associative
    or       := and ("|" and)*
    and      := until ("&" until)*
    until    := unary (("U" | "R") interval unary)* left-associative
    unary    := "!" unary | "F" interval unary | "G" interval unary
              | "L" nat unary | primary
    primary  := "true" | "false" | ident | "(" formula ")"
    interval := ("[" | "(") bound "," bound ("]" | ")")
    bound    := nat ("." digits)? | nat "/" nat | "inf"

``inf`` is only legal as an upper bound and forces a ``)`` closer.  ``#``
starts a comment running to end of line; whitespace is insignificant.
``U``, ``R``, ``F``, ``G`` and ``L`` double as ordinary identifiers except
where an interval (or, for ``L``, a level number) follows, so ``p U q`` is a
syntax error (intervals are mandatory) while ``U & G`` is a conjunction of
two atoms.

Numbers are parsed exactly: ``0.01`` becomes the rational 1/100, never a
binary float.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

from .formulas import (
    Always,
    And,
    Atom,
    Const,
    Eventually,
    Formula,
    Implies,
    Interval,
    Not,
    Or,
    Release,
    Stratum,
    Until,
)


@dataclass(frozen=True)
class SourceSpan:
    """Half-open byte range in the source text, with 1-based line/column."""

    start_offset: int
    end_offset: int
    line: int
    column: int


class ParseError(Exception):
    def __init__(self, span: SourceSpan, expected: list[str], found: str):
        if not expected:
            raise ValueError("ParseError needs at least one expected alternative")
        self.span = span
        self.expected = list(expected)
        self.found = found
        super().__init__(
            f"line {span.line}, column {span.column}: expected "
            f"{' or '.join(self.expected)}, found {found}"
        )


_PUNCT = ("->", "[", "]", "(", ")", ",", "&", "|", "!", "/")
_IDENT_START = frozenset("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")
_IDENT_CONT = _IDENT_START | frozenset("0123456789")
_DIGITS = frozenset("0123456789")


@dataclass(frozen=True)
class _Token:
    kind: str  # "ident", "number", "stratum", "eof", or the punctuation itself
    text: str
    span: SourceSpan
    level: int = 0  # stratum level for "stratum" tokens


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    line = 1
    col = 1
    n = len(text)

    def span(start: int, end: int, start_line: int, start_col: int) -> SourceSpan:
        return SourceSpan(start, end, start_line, start_col)

    while pos < n:
        ch = text[pos]
        if ch == "#":
            while pos < n and text[pos] != "\n":
                pos += 1
                col += 1
            continue
        if ch == "\n":
            pos += 1
            line += 1
            col = 1
            continue
        if ch in " \t\r":
            pos += 1
            col += 1
            continue
        start, start_line, start_col = pos, line, col
        if ch in _IDENT_START:
            while pos < n and text[pos] in _IDENT_CONT:
                pos += 1
                col += 1
            word = text[start:pos]
            sp = span(start, pos, start_line, start_col)
            if word[0] == "L" and len(word) > 1 and all(c in _DIGITS for c in word[1:]):
                tokens.append(_Token("stratum", word, sp, level=int(word[1:])))
            else:
                tokens.append(_Token("ident", word, sp))
            continue
        if ch in _DIGITS:
            while pos < n and text[pos] in _DIGITS:
                pos += 1
                col += 1
            if pos < n and text[pos] == ".":
                if pos + 1 >= n or text[pos + 1] not in _DIGITS:
                    raise ParseError(
                        span(pos, pos + 1, line, col),
                        ["a digit after the decimal point"],
                        "'.'" if pos + 1 >= n else repr(text[pos + 1]),
                    )
                pos += 1
                col += 1
                while pos < n and text[pos] in _DIGITS:
                    pos += 1
                    col += 1
            tokens.append(_Token("number", text[start:pos], span(start, pos, start_line, start_col)))
            continue
        two = text[pos : pos + 2]
        if two == "->":
            pos += 2
            col += 2
            tokens.append(_Token("->", two, span(start, pos, start_line, start_col)))
            continue
        if ch in "[](),&|!/":
            pos += 1
            col += 1
            tokens.append(_Token(ch, ch, span(start, pos, start_line, start_col)))
            continue
        raise ParseError(span(pos, pos + 1, line, col), ["a valid token"], repr(ch))

    tokens.append(_Token("eof", "", SourceSpan(n, n, line, col)))
    return tokens


class _Infinity:
    pass


_INF = _Infinity()


class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.pos = 0

    def peek(self, ahead: int = 0) -> _Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def fail(self, expected: list[str], tok: _Token | None = None) -> ParseError:
        tok = tok or self.peek()
        found = "end of input" if tok.kind == "eof" else repr(tok.text)
        return ParseError(tok.span, expected, found)

    def expect(self, kind: str, label: str) -> _Token:
        if self.peek().kind != kind:
            raise self.fail([label])
        return self.advance()

    def parse(self) -> Formula:
        f = self.implies()
        if self.peek().kind != "eof":
            raise self.fail(["an operator or end of input"])
        return f

    def implies(self) -> Formula:
        left = self.or_()
        if self.peek().kind == "->":
            self.advance()
            return Implies(left, self.implies())
        return left

    def or_(self) -> Formula:
        left = self.and_()
        while self.peek().kind == "|":
            self.advance()
            left = Or(left, self.and_())
        return left

    def and_(self) -> Formula:
        left = self.until()
        while self.peek().kind == "&":
            self.advance()
            left = And(left, self.until())
        return left

    def until(self) -> Formula:
        left = self.unary()
        while True:
            tok = self.peek()
            if (
                tok.kind == "ident"
                and tok.text in ("U", "R")
                and self.peek(1).kind in ("[", "(")
            ):
                self.advance()
                interval = self.interval()
                right = self.unary()
                left = Until(left, interval, right) if tok.text == "U" else Release(left, interval, right)
            else:
                return left

    def unary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "!":
            self.advance()
            return Not(self.unary())
        if tok.kind == "ident" and tok.text in ("F", "G") and self.peek(1).kind in ("[", "("):
            self.advance()
            interval = self.interval()
            operand = self.unary()
            return Eventually(interval, operand) if tok.text == "F" else Always(interval, operand)
        if tok.kind == "stratum":
            self.advance()
            if tok.level < 1:
                raise ParseError(tok.span, ["a stratum level >= 1"], repr(tok.text))
            return Stratum(tok.level, self.unary())
        if (
            tok.kind == "ident"
            and tok.text == "L"
            and self.peek(1).kind == "number"
            and "." not in self.peek(1).text
        ):
            self.advance()
            level_tok = self.advance()
            level = int(level_tok.text)
            if level < 1:
                raise ParseError(level_tok.span, ["a stratum level >= 1"], repr(level_tok.text))
            return Stratum(level, self.unary())
        return self.primary()

    def primary(self) -> Formula:
        tok = self.peek()
        if tok.kind == "ident":
            self.advance()
            if tok.text == "true":
                return Const(True)
            if tok.text == "false":
                return Const(False)
            return Atom(tok.text)
        if tok.kind == "(":
            self.advance()
            inner = self.implies()
            self.expect(")", "')'")
            return inner
        raise self.fail(["'('", "'!'", "'true'", "'false'", "an atom name"])

    def interval(self) -> Interval:
        opener = self.peek()
        if opener.kind not in ("[", "("):
            raise self.fail(["'['", "'('"])
        self.advance()
        lower_closed = opener.kind == "["
        lower = self.bound()
        if lower is _INF:
            raise ParseError(
                self.tokens[self.pos - 1].span, ["a finite lower bound"], "'inf'"
            )
        self.expect(",", "','")
        upper = self.bound()
        closer = self.peek()
        if upper is _INF:
            if closer.kind != ")":
                raise self.fail(["')' (an 'inf' upper bound must be open)"], closer)
        elif closer.kind not in ("]", ")"):
            raise self.fail(["']'", "')'"], closer)
        self.advance()
        upper_closed = closer.kind == "]"
        whole = SourceSpan(
            opener.span.start_offset, closer.span.end_offset, opener.span.line, opener.span.column
        )
        upper_value = None if upper is _INF else upper
        try:
            return Interval(lower, upper_value, lower_closed, upper_closed)
        except ValueError as exc:
            raise ParseError(
                whole,
                ["a non-empty interval"],
                repr(self.text[whole.start_offset : whole.end_offset]),
            ) from exc

    def bound(self):
        tok = self.peek()
        if tok.kind == "ident" and tok.text == "inf":
            self.advance()
            return _INF
        if tok.kind != "number":
            raise self.fail(["a number", "'inf'"])
        self.advance()
        value = Fraction(tok.text)
        if self.peek().kind == "/":
            if "." in tok.text:
                raise ParseError(
                    tok.span, ["a natural number numerator"], repr(tok.text)
                )
            self.advance()
            denom_tok = self.peek()
            if denom_tok.kind != "number" or "." in denom_tok.text:
                raise self.fail(["a natural number denominator"])
            self.advance()
            denom = int(denom_tok.text)
            if denom == 0:
                raise ParseError(denom_tok.span, ["a nonzero denominator"], "'0'")
            value = Fraction(int(tok.text), denom)
        return value


def parse(text: str) -> Formula:
    """Parse ``text`` into a formula; raise ``ParseError`` with the failing span."""
    return _Parser(text).parse()


def format_rational(value: Fraction) -> str:
    """Canonical text for a non-negative rational.

    Integers print bare, exactly-representable decimals print in decimal
    form with no trailing zeros (``0.5``, ``0.01``), everything else falls
    back to ``numerator/denominator``.
    """
    value = Fraction(value)
    num, den = value.numerator, value.denominator
    if den == 1:
        return str(num)
    twos = 0
    fives = 0
    rest = den
    while rest % 2 == 0:
        rest //= 2
        twos += 1
    while rest % 5 == 0:
        rest //= 5
        fives += 1
    if rest != 1:
        return f"{num}/{den}"
    places = max(twos, fives)
    scaled = num * 10**places // den
    digits = str(scaled).rjust(places + 1, "0")
    whole, frac = digits[:-places], digits[-places:].rstrip("0")
    return f"{whole}.{frac}"


def format_interval(interval: Interval) -> str:
    opener = "[" if interval.lower_closed else "("
    if interval.upper is None:
        return f"{opener}{format_rational(interval.lower)},inf)"
    closer = "]" if interval.upper_closed else ")"
    return f"{opener}{format_rational(interval.lower)},{format_rational(interval.upper)}{closer}"


# Precedence ranks used by the printer; higher binds tighter.
_IMPLIES, _OR, _AND, _UNTIL, _UNARY, _ATOMIC = range(6)


def _prec(f: Formula) -> int:
    if isinstance(f, Implies):
        return _IMPLIES
    if isinstance(f, Or):
        return _OR
    if isinstance(f, And):
        return _AND
    if isinstance(f, (Until, Release)):
        return _UNTIL
    if isinstance(f, (Not, Eventually, Always, Stratum)):
        return _UNARY
    return _ATOMIC


def _fmt(f: Formula, min_prec: int) -> str:
    text = _render(f)
    if _prec(f) < min_prec:
        return f"({text})"
    return text


def _render(f: Formula) -> str:
    if isinstance(f, Atom):
        return f.name
    if isinstance(f, Const):
        return "true" if f.value else "false"
    if isinstance(f, Not):
        return "!" + _fmt(f.operand, _UNARY)
    if isinstance(f, Eventually):
        return f"F{format_interval(f.interval)} " + _fmt(f.operand, _UNARY)
    if isinstance(f, Always):
        return f"G{format_interval(f.interval)} " + _fmt(f.operand, _UNARY)
    if isinstance(f, Stratum):
        return f"L{f.level} " + _fmt(f.operand, _UNARY)
    if isinstance(f, Until):
        return f"{_fmt(f.left, _UNTIL)} U{format_interval(f.interval)} {_fmt(f.right, _UNTIL + 1)}"
    if isinstance(f, Release):
        return f"{_fmt(f.left, _UNTIL)} R{format_interval(f.interval)} {_fmt(f.right, _UNTIL + 1)}"
    if isinstance(f, And):
        return f"{_fmt(f.left, _AND)} & {_fmt(f.right, _AND + 1)}"
    if isinstance(f, Or):
        return f"{_fmt(f.left, _OR)} | {_fmt(f.right, _OR + 1)}"
    if isinstance(f, Implies):
        return f"{_fmt(f.left, _IMPLIES + 1)} -> {_fmt(f.right, _IMPLIES)}"
    raise TypeError(f"not a formula node: {f!r}")


def pretty_print(f: Formula) -> str:
    """Render ``f`` with minimal parentheses; ``parse`` inverts it exactly."""
    return _render(f)
