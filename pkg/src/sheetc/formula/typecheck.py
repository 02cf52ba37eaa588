"""Type checking with a flooding Error type.

Unresolved names and type mismatches never abort compilation: the offending
node becomes Error-typed, the error floods to every dependent node, and a
diagnostic list is attached for the client.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from sheetc.formula.ast import (
    BinOp,
    Call,
    ColumnRef,
    Expr,
    If,
    LinkRef,
    Literal,
    ParameterRef,
)
from sheetc.formula.functions import FUNCTIONS, FunctionClass, binop_types, check_arg_types
from sheetc.scalars import ScalarType


@dataclass(frozen=True)
class Diagnostic:
    offset: int
    length: int
    message: str
    severity: str = "error"

    def to_json(self) -> dict:
        return {
            "offset": self.offset,
            "length": self.length,
            "message": self.message,
            "severity": self.severity,
        }


@dataclass(frozen=True)
class EnvEntry:
    type: ScalarType
    level: Optional[int]  # resident level; None for parameters
    kind: str = "column"  # column | input | parameter


@dataclass
class TypedExpr:
    """An Expr node annotated with its scalar type.

    ``children`` mirror the node's sub-expressions in syntax order. For
    column references, ``level`` carries the resident level from the
    environment and ``ref_kind`` whether it is a column, input attribute
    or parameter.
    """

    node: Expr
    type: ScalarType
    children: tuple["TypedExpr", ...] = ()
    level: Optional[int] = None
    ref_kind: Optional[str] = None
    diagnostics: list[Diagnostic] = field(default_factory=list)

    @property
    def is_error(self) -> bool:
        return self.type is ScalarType.ERROR

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()

    @property
    def contains_aggregate(self) -> bool:
        return any(
            isinstance(t.node, Call)
            and t.node.function in FUNCTIONS
            and FUNCTIONS[t.node.function].fclass is FunctionClass.AGGREGATE
            for t in self.walk()
        )

    @property
    def contains_window(self) -> bool:
        return any(
            isinstance(t.node, Call)
            and t.node.function in FUNCTIONS
            and FUNCTIONS[t.node.function].fclass is FunctionClass.WINDOW
            for t in self.walk()
        )

    def referenced_columns(self) -> dict[str, int]:
        """Referenced column names mapped to their resident level."""
        refs: dict[str, int] = {}
        for t in self.walk():
            if isinstance(t.node, ColumnRef) and t.ref_kind in ("column", "input"):
                refs.setdefault(t.node.name, t.level)
        return refs

    def referenced_parameters(self) -> list[str]:
        names: list[str] = []
        for t in self.walk():
            if isinstance(t.node, (ColumnRef, ParameterRef)) and t.ref_kind == "parameter":
                if t.node.name not in names:
                    names.append(t.node.name)
        return names


def _error(node: Expr, msg: str, diags: list[Diagnostic],
           children: tuple[TypedExpr, ...] = ()) -> TypedExpr:
    offset = getattr(node, "offset", 0)
    diags.append(Diagnostic(offset, 1, msg))
    return TypedExpr(node, ScalarType.ERROR, children)


def typecheck(expr: Expr, env: dict[str, EnvEntry]) -> TypedExpr:
    """Type every node; mismatches become Error-typed subtrees."""
    diags: list[Diagnostic] = []
    typed = _check(expr, env, diags)
    typed.diagnostics = diags
    return typed


def _check(e: Expr, env: dict[str, EnvEntry], diags: list[Diagnostic]) -> TypedExpr:
    if isinstance(e, Literal):
        if e.type_hint is not None:
            return TypedExpr(e, e.type_hint)
        v = e.value
        if isinstance(v, bool):
            t = ScalarType.LOGICAL
        elif isinstance(v, (int, float)):
            t = ScalarType.NUMBER
        elif isinstance(v, str):
            t = ScalarType.TEXT
        elif v is None:
            t = ScalarType.NUMBER  # untyped null; see docs on Null literals
        else:
            t = ScalarType.DATE
        return TypedExpr(e, t)

    if isinstance(e, (ColumnRef, ParameterRef)):
        entry = env.get(e.name)
        if entry is None:
            return _error(e, f"unknown name [{e.name}]", diags)
        return TypedExpr(e, entry.type, level=entry.level, ref_kind=entry.kind)

    if isinstance(e, LinkRef):
        return _error(
            e, f"unresolved link reference [{'.'.join(e.path)}].[{e.attribute}]", diags
        )

    if isinstance(e, BinOp):
        lhs = _check(e.lhs, env, diags)
        rhs = _check(e.rhs, env, diags)
        children = (lhs, rhs)
        if lhs.is_error or rhs.is_error:
            return TypedExpr(e, ScalarType.ERROR, children)
        result = binop_types(e.op, lhs.type, rhs.type)
        if result is None:
            return _error(
                e,
                f"operator {e.op} cannot combine {lhs.type.value} and {rhs.type.value}",
                diags,
                children,
            )
        return TypedExpr(e, result, children)

    if isinstance(e, If):
        cond = _check(e.cond, env, diags)
        then = _check(e.then, env, diags)
        children = [cond, then]
        else_t: Optional[TypedExpr] = None
        if e.else_ is not None:
            else_t = _check(e.else_, env, diags)
            children.append(else_t)
        children = tuple(children)
        if any(c.is_error for c in children):
            return TypedExpr(e, ScalarType.ERROR, children)
        if cond.type is not ScalarType.LOGICAL:
            return _error(e, "If condition must be Logical", diags, children)
        if else_t is not None and else_t.type is not then.type:
            return _error(
                e,
                f"If branches disagree: {then.type.value} vs {else_t.type.value}",
                diags,
                children,
            )
        return TypedExpr(e, then.type, children)

    if isinstance(e, Call):
        sig = FUNCTIONS.get(e.function)
        args = tuple(_check(a, env, diags) for a in e.args)
        if sig is None:
            return _error(e, f"unknown function {e.function}", diags, args)
        if any(a.is_error for a in args):
            return TypedExpr(e, ScalarType.ERROR, args)
        if sig.fclass is FunctionClass.AGGREGATE:
            for a in args:
                if a.contains_aggregate:
                    return _error(
                        e,
                        f"aggregate {e.function} cannot take an aggregate argument",
                        diags,
                        args,
                    )
        lo, hi = sig.arity_range
        if not (lo <= len(args) <= hi):
            return _error(
                e,
                f"{e.function} expects {lo}" + (f"..{hi}" if hi != lo else "")
                + f" arguments, got {len(args)}",
                diags,
                args,
            )
        result, bad = check_arg_types(sig, [a.type for a in args])
        if result is None:
            if bad is not None and bad >= 0:
                msg = (
                    f"{e.function} argument {bad + 1} has type "
                    f"{args[bad].type.value}, expected "
                    f"{sig.params[bad] if isinstance(sig.params[bad], str) else sig.params[bad].value}"
                )
            else:
                msg = f"{e.function}: bad arguments"
            return _error(e, msg, diags, args)
        return TypedExpr(e, result, args)

    raise TypeError(f"not an Expr: {e!r}")
