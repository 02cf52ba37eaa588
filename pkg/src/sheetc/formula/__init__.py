"""Spreadsheet-like formula language: parser, typechecker, function catalog."""

from sheetc.formula.ast import (
    BinOp,
    Call,
    ColumnRef,
    Expr,
    If,
    LinkRef,
    Literal,
    ParameterRef,
    to_text,
)
from sheetc.formula.fold import fold_constants
from sheetc.formula.functions import FUNCTIONS, FunctionClass, FunctionSig
from sheetc.formula.parser import ParseError, parse_formula
from sheetc.formula.typecheck import Diagnostic, EnvEntry, TypedExpr, typecheck

__all__ = [
    "Expr",
    "Literal",
    "ColumnRef",
    "ParameterRef",
    "LinkRef",
    "Call",
    "BinOp",
    "If",
    "to_text",
    "parse_formula",
    "ParseError",
    "typecheck",
    "TypedExpr",
    "EnvEntry",
    "Diagnostic",
    "fold_constants",
    "FUNCTIONS",
    "FunctionSig",
    "FunctionClass",
]
