"""Compile-time evaluation of literal-only subtrees.

Folding uses the same scalar evaluation table as the interpreter, so a
folded literal is exactly the value the query would have produced. No
algebraic identities are applied: ``[x] + 0`` stays as written.
"""

from __future__ import annotations

from sheetc.formula.ast import BinOp, Call, If, Literal
from sheetc.formula.functions import FUNCTIONS, FunctionClass, eval_binop
from sheetc.formula.typecheck import TypedExpr
from sheetc.scalars import ScalarType


def _literal_value(t: TypedExpr):
    return t.node.value


def _is_literal(t: TypedExpr) -> bool:
    return isinstance(t.node, Literal)


def _make_literal(value, type_: ScalarType) -> TypedExpr:
    hint = type_ if (value is None or type_ is ScalarType.ERROR) else None
    return TypedExpr(Literal(value, type_hint=hint), type_)


def fold_constants(typed: TypedExpr) -> TypedExpr:
    """Evaluate literal-only subtrees; Error literals are preserved."""
    folded = _fold(typed)
    folded.diagnostics = typed.diagnostics
    return folded


def _fold(t: TypedExpr) -> TypedExpr:
    if not t.children:
        return t
    children = tuple(_fold(c) for c in t.children)
    node = t.node

    if all(_is_literal(c) for c in children):
        if any(c.type is ScalarType.ERROR for c in children):
            return _make_literal(None, ScalarType.ERROR)
        if t.type is not ScalarType.ERROR:
            if isinstance(node, BinOp):
                value = eval_binop(node.op, *[_literal_value(c) for c in children])
                return _make_literal(value, t.type)
            if isinstance(node, If):
                cond = _literal_value(children[0])
                # a null condition takes the else branch (CASE semantics)
                if cond is True:
                    value = _literal_value(children[1])
                elif len(children) == 3:
                    value = _literal_value(children[2])
                else:
                    value = None
                return _make_literal(value, t.type)
            if isinstance(node, Call):
                sig = FUNCTIONS.get(node.function)
                if sig is not None and sig.fclass is FunctionClass.SINGLE_ROW \
                        and sig.eval_fn is not None:
                    value = sig.eval_fn(*[_literal_value(c) for c in children])
                    return _make_literal(value, t.type)

    return TypedExpr(node, t.type, children, level=t.level, ref_kind=t.ref_kind)
