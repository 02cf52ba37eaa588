"""Formula syntax trees and the pretty-printer."""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from typing import Optional, Union

from sheetc.scalars import ScalarType


@dataclass(frozen=True)
class Literal:
    value: Union[None, bool, int, float, str, datetime.date]
    # Set for typed nulls and error literals; inferred from value otherwise.
    type_hint: Optional[ScalarType] = None
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ColumnRef:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class ParameterRef:
    name: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class LinkRef:
    path: tuple[str, ...]
    attribute: str
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    function: str
    args: tuple["Expr", ...]
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # one of + - * / = <> < <= > >= And Or
    lhs: "Expr"
    rhs: "Expr"
    offset: int = field(default=0, compare=False)


@dataclass(frozen=True)
class If:
    cond: "Expr"
    then: "Expr"
    else_: Optional["Expr"]
    offset: int = field(default=0, compare=False)


Expr = Union[Literal, ColumnRef, ParameterRef, LinkRef, Call, BinOp, If]


_PRECEDENCE = {
    "Or": 1,
    "And": 2,
    "=": 3, "<>": 3, "<": 3, "<=": 3, ">": 3, ">=": 3,
    "+": 4, "-": 4,
    "*": 5, "/": 5,
}


def _bracket(name: str) -> str:
    return "[" + name + "]"


def to_text(e: Expr, parent_prec: int = 0) -> str:
    """Render an expression back to source; parse(to_text(e)) == e."""
    if isinstance(e, Literal):
        v = e.value
        if e.type_hint is ScalarType.ERROR:
            return "Error()"
        if v is None:
            return "Null"
        if isinstance(v, bool):
            return "True" if v else "False"
        if isinstance(v, datetime.date):
            return f'Date("{v.isoformat()}")'
        if isinstance(v, str):
            return '"' + v.replace('"', '""') + '"'
        return repr(v)
    if isinstance(e, ColumnRef):
        return _bracket(e.name)
    if isinstance(e, ParameterRef):
        return _bracket(e.name)
    if isinstance(e, LinkRef):
        return ".".join(_bracket(p) for p in e.path) + "." + _bracket(e.attribute)
    if isinstance(e, Call):
        if e.function == "Neg":
            inner = to_text(e.args[0], 6)
            return "-" + inner
        if e.function == "Not":
            # Not sits between And and the comparisons in the grammar.
            text = "Not " + to_text(e.args[0], 3)
            return "(" + text + ")" if parent_prec >= 3 else text
        return e.function + "(" + ", ".join(to_text(a) for a in e.args) + ")"
    if isinstance(e, BinOp):
        prec = _PRECEDENCE[e.op]
        # Comparisons are non-associative: parenthesize comparison operands
        # on both sides.
        lhs_prec = prec + 1 if prec == 3 else prec
        text = f"{to_text(e.lhs, lhs_prec)} {e.op} {to_text(e.rhs, prec + 1)}"
        return "(" + text + ")" if prec < parent_prec else text
    if isinstance(e, If):
        args = [to_text(e.cond), to_text(e.then)]
        if e.else_ is not None:
            args.append(to_text(e.else_))
        return "If(" + ", ".join(args) + ")"
    raise TypeError(f"not an Expr: {e!r}")


def walk(e: Expr):
    """Yield every node of the tree, pre-order."""
    yield e
    if isinstance(e, Call):
        for a in e.args:
            yield from walk(a)
    elif isinstance(e, BinOp):
        yield from walk(e.lhs)
        yield from walk(e.rhs)
    elif isinstance(e, If):
        yield from walk(e.cond)
        yield from walk(e.then)
        if e.else_ is not None:
            yield from walk(e.else_)


def referenced_columns(e: Expr) -> list[str]:
    seen: list[str] = []
    for node in walk(e):
        if isinstance(node, ColumnRef) and node.name not in seen:
            seen.append(node.name)
    return seen
