"""Rendering the relational tree as a single SQL statement.

Every node becomes one SELECT over parenthesized subqueries with aliases
``t0``, ``t1``, … assigned in traversal order. Subtrees referenced from
more than one parent are emitted once as common table expressions.
"""

from __future__ import annotations

import datetime
from typing import Callable, Optional

from sheetc.errors import UnsupportedQuery
from sheetc.formula.ast import BinOp, Call, ColumnRef, Expr, If, Literal
from sheetc.relalg.ops import (
    Aggregate,
    Filter,
    Join,
    Project,
    RawSQL,
    Scan,
    SemiJoin,
    Sort,
    Window,
    WindowDef,
    children_of,
    column_names,
)
from sheetc.scalars import ScalarType
from sheetc.sqlgen.dialect import Dialect

_AGG_SQL = {"Sum": "SUM", "Avg": "AVG", "Min": "MIN", "Max": "MAX"}
_CMP = {"=": "=", "<>": "<>", "<": "<", "<=": "<=", ">": ">", ">=": ">="}


class Renderer:
    def __init__(self, dialect: Dialect, use_ctes: bool = True):
        self.d = dialect
        self.use_ctes = use_ctes
        self._alias = 0
        self.ctes: list[tuple[str, str]] = []
        self._cte_counter = 0
        self.cte_names: dict[int, str] = {}
        self.shared: set = set()

    def alias(self) -> str:
        a = f"t{self._alias}"
        self._alias += 1
        return a

    def render(self, root) -> str:
        if self.use_ctes:
            counts: dict[int, int] = {}
            stack = [root]
            while stack:
                n = stack.pop()
                counts[id(n)] = counts.get(id(n), 0) + 1
                if counts[id(n)] == 1:
                    stack.extend(children_of(n))
            self.shared = {
                i for i, c in counts.items() if c > 1
            }
        body = self.sql(root)
        if not self.ctes:
            return body
        withs = ",\n".join(f"{name} AS (\n{sql}\n)" for name, sql in self.ctes)
        return f"WITH {withs}\n{body}"

    def from_item(self, node) -> tuple[str, str]:
        """Return (FROM clause text, alias) for a child node."""
        a = self.alias()
        if id(node) in self.cte_names:
            return f"{self.cte_names[id(node)]} AS {a}", a
        if id(node) in self.shared:
            name = f"cte{self._cte_counter}"
            self._cte_counter += 1
            self.cte_names[id(node)] = name  # before render: allow reuse
            sql = self.sql(node)
            self.ctes.append((name, sql))
            return f"{name} AS {a}", a
        if isinstance(node, Scan):
            return f"{self.d.quote(node.table)} AS {a}", a
        return f"(\n{_indent(self.sql(node))}\n) AS {a}", a

    def sql(self, node) -> str:
        q = self.d.quote

        if isinstance(node, Scan):
            a = self.alias()
            cols = ", ".join(f"{a}.{q(n)} AS {q(n)}" for n, _t in node.columns)
            return f"SELECT {cols}\nFROM {q(node.table)} AS {a}"

        if isinstance(node, RawSQL):
            a = self.alias()
            cols = ", ".join(f"{a}.{q(n)} AS {q(n)}" for n, _t in node.columns)
            return f"SELECT {cols}\nFROM (\n{_indent(node.sql)}\n) AS {a}"

        if isinstance(node, Project):
            f, a = self.from_item(node.child)
            r = self.resolver(a, node.child)
            cols = ", ".join(
                f"{self.expr(e, r)} AS {q(n)}" for n, e in node.exprs.items()
            )
            return f"SELECT {cols}\nFROM {f}"

        if isinstance(node, Filter):
            f, a = self.from_item(node.child)
            r = self.resolver(a, node.child)
            cols = ", ".join(f"{r(n)} AS {q(n)}" for n, _t in node.columns)
            return f"SELECT {cols}\nFROM {f}\nWHERE {self.expr(node.predicate, r)}"

        if isinstance(node, Aggregate):
            f, a = self.from_item(node.child)
            r = self.resolver(a, node.child)
            cols = ", ".join(
                f"{self.expr(e, r)} AS {q(n)}" for n, e in node.exprs.items()
            )
            sql = f"SELECT {cols}\nFROM {f}"
            if node.group_by:
                sql += "\nGROUP BY " + ", ".join(r(k) for k in node.group_by)
            return sql

        if isinstance(node, Join):
            fl, al = self.from_item(node.left)
            fr, ar = self.from_item(node.right)
            left_names = set(column_names(node.left))
            cols = ", ".join(
                f"{al if n in left_names else ar}.{q(n)} AS {q(n)}"
                for n, _t in node.columns
            )
            kind = "INNER" if node.kind == "inner" else "LEFT"
            cond = self.join_cond(node.on, al, ar) if node.on else "1 = 1"
            return (f"SELECT {cols}\nFROM {fl}\n{kind} JOIN {fr}"
                    f"\n  ON {cond}")

        if isinstance(node, SemiJoin):
            fl, al = self.from_item(node.left)
            cols = ", ".join(f"{al}.{q(n)} AS {q(n)}" for n, _t in node.columns)
            if self.d.supports_semijoin_exists:
                fr, ar = self.from_item(node.right)
                cond = self.join_cond(node.on, al, ar)
                return (f"SELECT {cols}\nFROM {fl}\nWHERE EXISTS ("
                        f"SELECT 1 FROM {fr} WHERE {cond})")
            fr, ar = self.from_item(node.right)
            ad = self.alias()
            keys = ", ".join(f"{ar}.{q(r_)} AS {q(r_)}" for _l, r_ in node.on)
            cond = self.join_cond(node.on, al, ad)
            return (f"SELECT {cols}\nFROM {fl}\nINNER JOIN ("
                    f"SELECT DISTINCT {keys} FROM {fr}) AS {ad}"
                    f"\n  ON {cond}")

        if isinstance(node, Window):
            f, a = self.from_item(node.child)
            r = self.resolver(a, node.child)
            parts = [f"{r(n)} AS {q(n)}" for n, _t in node.columns
                     if n not in node.windows]
            for n, w in node.windows.items():
                parts.append(f"{self.window(w, r)} AS {q(n)}")
            return f"SELECT {', '.join(parts)}\nFROM {f}"

        if isinstance(node, Sort):
            f, a = self.from_item(node.child)
            r = self.resolver(a, node.child)
            cols = ", ".join(f"{r(n)} AS {q(n)}" for n, _t in node.columns)
            sql = f"SELECT {cols}\nFROM {f}"
            if node.keys:
                sql += "\nORDER BY " + ", ".join(
                    f"{self.expr(e, r)} {d.upper()}" for e, d in node.keys
                )
            if node.limit is not None:
                sql += f"\nLIMIT {node.limit}"
                if node.offset:
                    sql += f" OFFSET {node.offset}"
            elif node.offset:
                sql += f"\nLIMIT -1 OFFSET {node.offset}"
            return sql

        raise TypeError(f"cannot render {node!r}")

    def resolver(self, alias: str, child) -> Callable[[str], str]:
        return lambda name: f"{alias}.{self.d.quote(name)}"

    def join_cond(self, on, al: str, ar: str) -> str:
        q = self.d.quote
        parts = []
        for l, r_ in on:
            a, b = f"{al}.{q(l)}", f"{ar}.{q(r_)}"
            parts.append(f"({a} = {b} OR ({a} IS NULL AND {b} IS NULL))")
        return " AND ".join(parts)

    # -- scalar expressions ----------------------------------------------

    def expr(self, e: Expr, r: Callable[[str], str]) -> str:
        d = self.d
        if isinstance(e, Literal):
            return self.literal(e)
        if isinstance(e, ColumnRef):
            return r(e.name)
        if isinstance(e, BinOp):
            a, b = self.expr(e.lhs, r), self.expr(e.rhs, r)
            if e.op == "/":
                return f"(CAST({a} AS {d.float_type}) / NULLIF({b}, 0))"
            if e.op in ("And", "Or"):
                return f"({a} {e.op.upper()} {b})"
            if e.op in _CMP:
                return f"({a} {_CMP[e.op]} {b})"
            return f"({a} {e.op} {b})"
        if isinstance(e, If):
            c = self.expr(e.cond, r)
            t = self.expr(e.then, r)
            if e.else_ is None:
                return f"CASE WHEN {c} THEN {t} END"
            return f"CASE WHEN {c} THEN {t} ELSE {self.expr(e.else_, r)} END"
        if isinstance(e, Call):
            return self.call(e, r)
        raise TypeError(f"cannot render expression {e!r}")

    def literal(self, e: Literal) -> str:
        d = self.d
        if e.type_hint is ScalarType.ERROR:
            return "NULL /* error */"
        v = e.value
        if v is None:
            return "NULL"
        if isinstance(v, bool):
            return "TRUE" if v else "FALSE"
        if isinstance(v, (int, float)):
            return repr(v)
        if isinstance(v, datetime.date):
            return d.date_literal_prefix + d.string(v.isoformat())
        return d.string(v)

    def call(self, e: Call, r) -> str:
        d = self.d
        fn = e.function
        args = [self.expr(a, r) for a in e.args]
        if fn == "Neg":
            return f"(-{args[0]})"
        if fn == "Not":
            return f"(NOT {args[0]})"
        if fn == "IsNull":
            return f"({args[0]} IS NULL)"
        if fn == "Round":
            return f"ROUND({', '.join(args)})"
        if fn == "Date":
            if d.name == "ansi":
                return f"DATE({args[0]})"
            return f"CAST({args[0]} AS DATE)"
        if fn == "Like":
            a, b = args
            if d.case_insensitive_like == "ilike":
                return f"({a} ILIKE {b})"
            if d.case_insensitive_like == "upper":
                return f"(UPPER({a}) LIKE UPPER({b}))"
            return f"({a} LIKE {b})"
        if fn == "DateTrunc":
            return self.date_trunc(e, r)
        if fn == "DateDiff":
            return self.date_diff(e, r)
        if fn in _AGG_SQL:
            return f"{_AGG_SQL[fn]}({args[0]})"
        if fn == "Count":
            return f"COUNT({args[0]})" if args else "COUNT(*)"
        if fn == "CountDistinct":
            return f"COUNT(DISTINCT {args[0]})"
        if fn == "CountIf":
            return f"COUNT(CASE WHEN {args[0]} THEN 1 END)"
        raise UnsupportedQuery(f"no SQL rendering for {fn}")

    def _unit(self, e: Call) -> str:
        arg = e.args[0]
        if not isinstance(arg, Literal) or not isinstance(arg.value, str):
            raise UnsupportedQuery(f"{e.function} needs a literal unit")
        unit = arg.value.lower().rstrip("s")
        if unit not in ("year", "quarter", "month", "week", "day"):
            raise UnsupportedQuery(f"unknown date unit {arg.value!r}")
        return unit

    def date_trunc(self, e: Call, r) -> str:
        unit = self._unit(e)
        x = self.expr(e.args[1], r)
        d = self.d
        if d.name == "ansi":
            if unit == "year":
                return f"DATE({x}, 'start of year')"
            if unit == "month":
                return f"DATE({x}, 'start of month')"
            if unit == "day":
                return f"DATE({x})"
            if unit == "week":
                return f"DATE({x}, '-6 days', 'weekday 1')"
            return (f"DATE({x}, 'start of month', '-' || "
                    f"((CAST(STRFTIME('%m', {x}) AS INTEGER) - 1) % 3)"
                    f" || ' months')")
        if d.name == "bigquery":
            part = "WEEK(MONDAY)" if unit == "week" else unit.upper()
            return f"DATE_TRUNC({x}, {part})"
        if d.name == "postgres":
            return f"CAST(DATE_TRUNC('{unit}', {x}) AS DATE)"
        return f"DATE_TRUNC('{unit}', {x})"

    def date_diff(self, e: Call, r) -> str:
        unit = self._unit(e)
        a = self.expr(e.args[1], r)
        b = self.expr(e.args[2], r)
        d = self.d
        if d.native_datediff:
            return f"DATEDIFF('{unit}', {a}, {b})"
        if d.name == "bigquery":
            part = "WEEK(MONDAY)" if unit == "week" else unit.upper()
            return f"DATE_DIFF({b}, {a}, {part})"
        if d.name == "postgres":
            return _pg_date_diff(unit, a, b)
        return _ansi_date_diff(unit, a, b)

    # -- window functions -------------------------------------------------

    def window(self, w: WindowDef, r) -> str:
        if w.function == "RowNumber":
            head = "ROW_NUMBER()"
        elif w.function == "Rank":
            head = "RANK()"
        elif w.function == "Lag":
            head = f"LAG({self.expr(w.args[0], r)})"
        elif w.function in _AGG_SQL:
            head = f"{_AGG_SQL[w.function]}({self.expr(w.args[0], r)})"
        elif w.function == "Count":
            head = f"COUNT({self.expr(w.args[0], r)})" if w.args else "COUNT(*)"
        else:
            raise UnsupportedQuery(f"no SQL rendering for window {w.function}")
        over = []
        if w.partition_by:
            over.append("PARTITION BY " + ", ".join(r(c) for c in w.partition_by))
        if w.order_by:
            over.append("ORDER BY " + ", ".join(
                f"{self.expr(e, r)} {d.upper()}" for e, d in w.order_by
            ))
        if w.frame is not None:
            if w.frame[0] == "unbounded":
                over.append("ROWS BETWEEN UNBOUNDED PRECEDING AND CURRENT ROW")
            else:
                over.append(
                    f"ROWS BETWEEN {w.frame[1]} PRECEDING AND CURRENT ROW"
                )
        return f"{head} OVER ({' '.join(over)})"


def _year(x: str) -> str:
    return f"CAST(STRFTIME('%Y', {x}) AS INTEGER)"


def _month(x: str) -> str:
    return f"CAST(STRFTIME('%m', {x}) AS INTEGER)"


def _ansi_date_diff(unit: str, a: str, b: str) -> str:
    if unit == "day":
        return f"CAST(JULIANDAY({b}) - JULIANDAY({a}) AS INTEGER)"
    if unit == "week":
        return (f"CAST((JULIANDAY(DATE({b}, '-6 days', 'weekday 1')) - "
                f"JULIANDAY(DATE({a}, '-6 days', 'weekday 1'))) / 7 AS INTEGER)")
    if unit == "month":
        return (f"(({_year(b)} - {_year(a)}) * 12 + "
                f"({_month(b)} - {_month(a)}))")
    if unit == "quarter":
        return (f"(({_year(b)} - {_year(a)}) * 4 + "
                f"(({_month(b)} - 1) / 3 - ({_month(a)} - 1) / 3))")
    return f"({_year(b)} - {_year(a)})"


def _pg_date_diff(unit: str, a: str, b: str) -> str:
    y = "EXTRACT(YEAR FROM {x})::int"
    m = "EXTRACT(MONTH FROM {x})::int"
    if unit == "day":
        return f"({b} - {a})"
    if unit == "week":
        return (f"((CAST(DATE_TRUNC('week', {b}) AS DATE) - "
                f"CAST(DATE_TRUNC('week', {a}) AS DATE)) / 7)")
    if unit == "month":
        return (f"(({y.format(x=b)} - {y.format(x=a)}) * 12 + "
                f"({m.format(x=b)} - {m.format(x=a)}))")
    if unit == "quarter":
        return (f"(({y.format(x=b)} - {y.format(x=a)}) * 4 + "
                f"(({m.format(x=b)} - 1) / 3 - ({m.format(x=a)} - 1) / 3))")
    return f"({y.format(x=b)} - {y.format(x=a)})"


def _indent(text: str, by: str = "  ") -> str:
    return "\n".join(by + line for line in text.splitlines())


def render_sql(root, dialect: Dialect, use_ctes: bool = True) -> str:
    return Renderer(dialect, use_ctes).render(root)
