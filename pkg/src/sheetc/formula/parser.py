"""Recursive-descent parser for the formula language.

Precedence, loosest to tightest: Or, And, Not, comparisons, additive,
multiplicative, unary minus. Bracketed identifiers ``[Name]`` are column
(or parameter) references, ``[Link].[Attr]`` paths are link references,
and string literals are double-quoted with ``""`` as the escape.
"""

from __future__ import annotations

import datetime
import re
from dataclasses import dataclass

from sheetc.formula.ast import BinOp, Call, ColumnRef, Expr, If, LinkRef, Literal
from sheetc.scalars import ScalarType


class ParseError(ValueError):
    def __init__(self, message: str, offset: int, expected: tuple[str, ...] = ()):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset
        self.expected = expected


@dataclass
class _Token:
    kind: str  # num, str, bracket, ident, op, lparen, rparen, comma, dot, eof
    text: str
    value: object
    offset: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>\s+)
  | (?P<num>\d+(?:\.\d+)?(?:[eE][+-]?\d+)?)
  | (?P<str>"(?:[^"]|"")*")
  | (?P<bracket>\[[^\]]+\])
  | (?P<ident>[A-Za-z_][A-Za-z_0-9]*)
  | (?P<op><>|<=|>=|!=|[-+*/=<>(),.])
    """,
    re.VERBOSE,
)

_OP_KINDS = {"(": "lparen", ")": "rparen", ",": "comma", ".": "dot"}


def _tokenize(text: str) -> list[_Token]:
    tokens: list[_Token] = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", pos)
        pos = m.end()
        if m.lastgroup == "ws":
            continue
        raw = m.group()
        if m.lastgroup == "num":
            value: object = float(raw) if ("." in raw or "e" in raw or "E" in raw) else int(raw)
            tokens.append(_Token("num", raw, value, m.start()))
        elif m.lastgroup == "str":
            tokens.append(_Token("str", raw, raw[1:-1].replace('""', '"'), m.start()))
        elif m.lastgroup == "bracket":
            tokens.append(_Token("bracket", raw, raw[1:-1], m.start()))
        elif m.lastgroup == "ident":
            tokens.append(_Token("ident", raw, raw, m.start()))
        else:
            kind = _OP_KINDS.get(raw, "op")
            tokens.append(_Token(kind, "<>" if raw == "!=" else raw, raw, m.start()))
    tokens.append(_Token("eof", "", None, len(text)))
    return tokens


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.i = 0

    @property
    def cur(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, kind: str, what: str) -> _Token:
        if self.cur.kind != kind:
            raise ParseError(
                f"expected {what}, found {self.cur.text or 'end of input'}",
                self.cur.offset,
                expected=(what,),
            )
        return self.advance()

    def parse(self) -> Expr:
        e = self.or_expr()
        if self.cur.kind != "eof":
            raise ParseError(
                f"unexpected trailing input {self.cur.text!r}", self.cur.offset
            )
        return e

    def or_expr(self) -> Expr:
        e = self.and_expr()
        while self.cur.kind == "ident" and self.cur.text == "Or":
            off = self.advance().offset
            e = BinOp("Or", e, self.and_expr(), offset=off)
        return e

    def and_expr(self) -> Expr:
        e = self.not_expr()
        while self.cur.kind == "ident" and self.cur.text == "And":
            off = self.advance().offset
            e = BinOp("And", e, self.not_expr(), offset=off)
        return e

    def not_expr(self) -> Expr:
        if self.cur.kind == "ident" and self.cur.text == "Not":
            off = self.advance().offset
            return Call("Not", (self.not_expr(),), offset=off)
        return self.cmp_expr()

    def cmp_expr(self) -> Expr:
        e = self.add_expr()
        if self.cur.kind == "op" and self.cur.text in ("=", "<>", "<", "<=", ">", ">="):
            tok = self.advance()
            e = BinOp(tok.text, e, self.add_expr(), offset=tok.offset)
        return e

    def add_expr(self) -> Expr:
        e = self.mul_expr()
        while self.cur.kind == "op" and self.cur.text in ("+", "-"):
            tok = self.advance()
            e = BinOp(tok.text, e, self.mul_expr(), offset=tok.offset)
        return e

    def mul_expr(self) -> Expr:
        e = self.unary()
        while self.cur.kind == "op" and self.cur.text in ("*", "/"):
            tok = self.advance()
            e = BinOp(tok.text, e, self.unary(), offset=tok.offset)
        return e

    def unary(self) -> Expr:
        if self.cur.kind == "op" and self.cur.text == "-":
            off = self.advance().offset
            return Call("Neg", (self.unary(),), offset=off)
        return self.primary()

    def primary(self) -> Expr:
        tok = self.cur
        if tok.kind == "num":
            self.advance()
            return Literal(tok.value, offset=tok.offset)
        if tok.kind == "str":
            self.advance()
            return Literal(tok.value, offset=tok.offset)
        if tok.kind == "bracket":
            return self.reference()
        if tok.kind == "lparen":
            self.advance()
            e = self.or_expr()
            self.expect("rparen", ")")
            return e
        if tok.kind == "ident":
            return self.ident_or_call()
        raise ParseError(
            f"expected an expression, found {tok.text or 'end of input'}",
            tok.offset,
            expected=("literal", "reference", "function call", "("),
        )

    def reference(self) -> Expr:
        first = self.expect("bracket", "[name]")
        names = [first.value]
        while self.cur.kind == "dot":
            self.advance()
            names.append(self.expect("bracket", "[name]").value)
        if len(names) == 1:
            return ColumnRef(names[0], offset=first.offset)
        return LinkRef(tuple(names[:-1]), names[-1], offset=first.offset)

    def ident_or_call(self) -> Expr:
        tok = self.advance()
        name = tok.text
        if name == "True":
            return Literal(True, offset=tok.offset)
        if name == "False":
            return Literal(False, offset=tok.offset)
        if name == "Null":
            return Literal(None, offset=tok.offset)
        self.expect("lparen", "(")
        args: list[Expr] = []
        if self.cur.kind != "rparen":
            args.append(self.or_expr())
            while self.cur.kind == "comma":
                self.advance()
                args.append(self.or_expr())
        self.expect("rparen", ")")
        # Literal forms that round-trip through the printer.
        if name == "Error" and not args:
            return Literal(None, type_hint=ScalarType.ERROR, offset=tok.offset)
        if name == "If":
            if len(args) not in (2, 3):
                raise ParseError("If takes 2 or 3 arguments", tok.offset)
            return If(args[0], args[1], args[2] if len(args) == 3 else None, offset=tok.offset)
        if name == "Date" and len(args) == 1 and isinstance(args[0], Literal) \
                and isinstance(args[0].value, str):
            try:
                return Literal(datetime.date.fromisoformat(args[0].value), offset=tok.offset)
            except ValueError:
                raise ParseError(f"invalid date literal {args[0].value!r}", tok.offset) from None
        return Call(name, tuple(args), offset=tok.offset)


def parse_formula(text: str) -> Expr:
    """Parse formula source text into a syntax tree."""
    return _Parser(_tokenize(text)).parse()
