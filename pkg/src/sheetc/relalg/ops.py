"""Relational algebra tree.

Scalar expressions reuse the formula syntax tree; column references name
output columns of the child node, and a handful of pseudo-functions exist
only at this layer (``IsNull``, plus aggregate calls inside ``Aggregate``
expressions). Every node lists its output columns, which keeps pruning and
rendering mechanical.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

from sheetc.formula.ast import Expr
from sheetc.scalars import ScalarType


@dataclass
class Scan:
    """A named base table."""

    table: str
    columns: list  # [(name, ScalarType)]


@dataclass
class RawSQL:
    """An opaque SQL text input with a declared schema."""

    sql: str
    columns: list


@dataclass
class Project:
    """SELECT exprs — output is exactly the listed columns, in order.

    Expressions may not reference sibling outputs; the lowering inlines
    such references before building the node.
    """

    child: "RelNode"
    exprs: dict  # name -> Expr
    columns: list


@dataclass
class Filter:
    child: "RelNode"
    predicate: Expr
    columns: list


@dataclass
class Aggregate:
    """GROUP BY group_by with expression-valued aggregates.

    ``exprs`` values are scalar expressions whose aggregate-function calls
    are rendered as SQL aggregates; with an empty ``group_by`` the node
    yields exactly one row.
    """

    child: "RelNode"
    group_by: list  # column names of the child
    exprs: dict  # output name -> Expr (may contain aggregate calls)
    columns: list


@dataclass
class Join:
    """Equi-join with null-safe key comparison.

    ``annotated`` marks joins known to preserve the left side's cardinality
    (the right side is unique on the join keys), which makes them safe to
    prune when none of their columns are used.
    """

    left: "RelNode"
    right: "RelNode"
    kind: str  # inner | left
    on: list  # [(left col, right col)]; empty = cross join (ON 1=1)
    annotated: bool
    columns: list


@dataclass
class SemiJoin:
    """EXISTS (right where keys match); output is the left side."""

    left: "RelNode"
    right: "RelNode"
    on: list  # [(left col, right col)]
    columns: list


@dataclass
class WindowDef:
    function: str  # RowNumber | Rank | Lag | Sum | Avg | Max | Count
    args: tuple  # Expr arguments
    partition_by: list  # column names
    order_by: list  # [(Expr, "asc"|"desc")]
    # frame: None, or ("preceding", n) / ("unbounded",) for running frames
    frame: Optional[tuple] = None


@dataclass
class Window:
    """Pass everything through and add window-computed columns."""

    child: "RelNode"
    windows: dict  # name -> WindowDef
    columns: list


@dataclass
class Sort:
    child: "RelNode"
    keys: list  # [(Expr, "asc"|"desc")]
    limit: Optional[int] = None
    offset: int = 0
    columns: list = field(default_factory=list)


RelNode = (Scan, RawSQL, Project, Filter, Aggregate, Join, SemiJoin, Window, Sort)


def columns_of(node) -> list:
    return node.columns


def column_names(node) -> list:
    return [n for n, _t in node.columns]


def children_of(node) -> list:
    if isinstance(node, (Scan, RawSQL)):
        return []
    if isinstance(node, (Join, SemiJoin)):
        return [node.left, node.right]
    return [node.child]


def replace_children(node, new_children: list):
    if isinstance(node, (Scan, RawSQL)):
        return node
    if isinstance(node, (Join, SemiJoin)):
        node.left, node.right = new_children
    else:
        node.child = new_children[0]
    return node
