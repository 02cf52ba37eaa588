"""Reference interpreter: executes the operator plan over nested rows.

This is a second, independent implementation of worksheet semantics. It
shares nothing with the relational lowering: levels are materialized as
plain row lists linked by parent pointers, aggregation walks those
pointers, and row tests delete rows directly. Differential tests compare
its output against the SQL the compiler emits.
"""

from __future__ import annotations

import datetime
from typing import Optional, Union

from sheetc.calc_graph import build_graph, eliminate_dead_code
from sheetc.engine import Table
from sheetc.errors import UnsupportedQuery
from sheetc.formula.ast import BinOp, Call, ColumnRef, Expr, If, Literal
from sheetc.formula.functions import FUNCTIONS, eval_binop
from sheetc.options import Page
from sheetc.oracle.nested import (
    Row,
    ancestor,
    group_rows,
    order_values_equal,
    sort_rows,
    _hashable,
)
from sheetc.scalars import ScalarType, coerce_value, parse_date
from sheetc.spec_model import (
    Catalog,
    ResolvedSpec,
    ValidationError,
    WorksheetSpec,
    parse_spec,
    resolve_inputs,
    validate_spec,
)
from sheetc.walg import (
    AUTO_AGG,
    IS_MULTI,
    JoinOp,
    ProjectOp,
    SelectOp,
    WalgPlan,
    WindowOp,
    build_plan,
)

ROW_COL = "$row"


def _null_safe_eq(a, b) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return _hashable(a) == _hashable(b)


class _Interpreter:
    def __init__(self, plan: WalgPlan, catalog: Catalog,
                 page: Optional[Page] = None):
        self.plan = plan
        self.graph = plan.graph
        self.resolved: ResolvedSpec = plan.graph.resolved
        self.validated = self.resolved.validated
        self.spec = self.resolved.spec
        self.catalog = catalog
        self.page = page
        self.n = len(self.spec.levels)
        self.levels: dict[int, list] = {}

    # -- level materialization --------------------------------------------

    def level(self, i: int) -> list:
        if i not in self.levels:
            if i == 0:
                self.levels[0] = self.build_base()
            elif i == self.n - 1:
                rows = self.level(i - 1)
                total = Row({"$total": len(rows)}, level=i)
                for r in rows:
                    r.parent = total
                self.levels[i] = [total]
            else:
                keys = list(self.validated.group_keys[i])
                self.levels[i] = group_rows(self.level(i - 1), keys, i)
        return self.levels[i]

    def build_base(self) -> list:
        rows = self.input_rows(self.resolved.primary)
        for jspec, rin in self.resolved.joins:
            if jspec.join_type not in ("inner", "left"):
                raise UnsupportedQuery(
                    f"{jspec.join_type} joins cannot be expressed as part of "
                    f"a single flat query"
                )
            right = self.input_rows(rin)
            new_cols = [n for n, _t in rin.schema if n not in rows[0].cells] \
                if rows else [n for n, _t in rin.schema]
            joined: list = []
            for lrow in rows:
                matches = [
                    rrow for rrow in right
                    if all(_null_safe_eq(lrow.cells[l], rrow.cells[r])
                           for l, r in jspec.on)
                ]
                if matches:
                    for rrow in matches:
                        cells = dict(lrow.cells)
                        for c in new_cols:
                            cells[c] = rrow.cells[c]
                        joined.append(Row(cells))
                elif jspec.join_type == "left":
                    cells = dict(lrow.cells)
                    for c in new_cols:
                        cells[c] = None
                    joined.append(Row(cells))
            rows = joined
        for link in self.resolved.links:
            right = self.input_rows(link.target)
            remote_keys = [r for _l, r in link.on]
            for lrow in rows:
                match = None
                for rrow in right:
                    if all(_null_safe_eq(lrow.cells[l], rrow.cells[r])
                           for l, r in link.on):
                        match = rrow
                        break
                for k in remote_keys:
                    if k not in lrow.cells:
                        lrow.cells[k] = match.cells[k] if match else None
                for attr in link.attributes:
                    lrow.cells[f"{link.name}.{attr}"] = \
                        match.cells[attr] if match else None
        # deterministic row number: rank in the all-columns ascending order
        if rows:
            names = list(rows[0].cells)
            ordered = sort_rows(
                rows, [((lambda r, n=c: r.cells[n]), "asc") for c in names]
            )
            for i, r in enumerate(ordered, start=1):
                r.cells[ROW_COL] = i
        return rows

    def input_rows(self, rin) -> list:
        if rin.kind == "table":
            table = self.catalog.tables.get(rin.table_name)
            if table is None or table.rows is None:
                raise ValidationError(
                    f"no rows available for input {rin.table_name!r}"
                )
            return [
                Row({
                    n: coerce_value(v, t)
                    for (n, t), v in zip(table.schema, raw)
                })
                for raw in table.rows
            ]
        if rin.kind == "sql":
            # raw SQL inputs need a database; run them on the local engine
            from sheetc.engine import Engine

            eng = Engine()
            try:
                eng.load_catalog(self.catalog)
                result = eng.run(rin.sql_text, list(rin.schema))
            finally:
                eng.close()
            names = [n for n, _t in rin.schema]
            return [Row(dict(zip(names, r))) for r in result.rows]
        # worksheet input: run the inner sheet through this interpreter
        inner = evaluate_resolved(rin.inner, self.catalog)
        names = inner.column_names
        return [Row(dict(zip(names, r))) for r in inner.rows]

    # -- expressions -------------------------------------------------------

    def eval(self, e: Expr, cells: dict):
        if isinstance(e, Literal):
            return None if e.type_hint is ScalarType.ERROR else e.value
        if isinstance(e, ColumnRef):
            entry = self.graph.env.get(e.name)
            if entry is not None and entry.kind == "parameter":
                return self.parameter_value(e.name)
            return cells[e.name]
        if isinstance(e, Call):
            sig = FUNCTIONS[e.function]
            args = [self.eval(a, cells) for a in e.args]
            return sig.eval_fn(*args)
        if isinstance(e, BinOp):
            return eval_binop(e.op, self.eval(e.lhs, cells),
                              self.eval(e.rhs, cells))
        if isinstance(e, If):
            cond = self.eval(e.cond, cells)
            if cond is True:
                return self.eval(e.then, cells)
            if e.else_ is not None:
                return self.eval(e.else_, cells)
            return None
        raise TypeError(f"cannot evaluate {e!r}")

    def parameter_value(self, name: str):
        p = self.spec.parameters[name]
        v = self.resolved.bindings[name]
        if p.type is ScalarType.DATE and not isinstance(v, datetime.date):
            try:
                v = parse_date(str(v))
            except ValueError:
                raise ValidationError(
                    f"parameter {name!r}: {v!r} is not a date"
                ) from None
        return v

    # -- slot replay -------------------------------------------------------

    def run(self) -> Table:
        for op in self.plan.ops:
            if isinstance(op, ProjectOp):
                self.apply_project(op)
            elif isinstance(op, WindowOp):
                self.apply_window(op)
            elif isinstance(op, JoinOp):
                self.apply_join(op)
            elif isinstance(op, SelectOp):
                self.apply_select(op)
        return self.assemble_output()

    def apply_project(self, op: ProjectOp) -> None:
        rows = self.level(op.level)
        for name, expr in op.exprs.items():
            for r in rows:
                r.cells[name] = self.eval(expr, r.cells)

    def apply_join(self, op: JoinOp) -> None:
        if op.is_aggregate:
            self.apply_aggregate_join(op)
        else:
            self.apply_repeat_join(op)

    def apply_aggregate_join(self, op: JoinOp) -> None:
        targets = self.level(op.target)
        source_rows = self.level(op.source)
        members: dict[int, list] = {id(g): [] for g in targets}
        for r in source_rows:
            members[id(ancestor(r, op.target))].append(r)
        # the grand-total group has no grouping keys, so like a SQL global
        # aggregate it always yields a row even over zero input (Count 0,
        # Sum null); any keyed group that lost all members reads null for
        # everything, matching an outer join against a missing group
        grand_total = op.target == self.n - 1
        for g in targets:
            rows = members[id(g)]
            for name, e in op.exprs.items():
                if not rows and not grand_total:
                    g.cells[name] = None
                    continue
                g.cells[name] = self.aggregate(e, rows)

    def aggregate(self, e: Expr, rows: list):
        if isinstance(e, Call) and e.function in (AUTO_AGG, IS_MULTI):
            arg = e.args[0]
            distinct = {
                _hashable(v)
                for v in (self.eval(arg, r.cells) for r in rows)
                if v is not None
            }
            if e.function == IS_MULTI:
                return len(distinct) > 1
            if len(distinct) == 1:
                return next(iter(distinct))
            return None
        sig = FUNCTIONS[e.function]
        if e.args:
            values = [self.eval(e.args[0], r.cells) for r in rows]
        else:
            values = [True] * len(rows)
        return sig.agg_fn(values)

    def apply_repeat_join(self, op: JoinOp) -> None:
        self.level(op.source)
        for r in self.level(op.target):
            upper = ancestor(r, op.source)
            for name, e in op.exprs.items():
                r.cells[name] = self.eval(e, upper.cells)

    def apply_window(self, op: WindowOp) -> None:
        level = op.level
        rows = self.level(level)
        part_keys = list(self.validated.group_keys[level + 1]) \
            if level + 1 < self.n else []
        for name, wc in op.exprs.items():
            if wc.order_by is not None:
                order = [(self._key_fn(wc.order_by),
                          "desc" if wc.descending else "asc")]
                order += self._tiebreak(level)
                partitions = [rows]  # ranking for row tests is global
            else:
                order = self._level_order(level)
                partitions = self._partition(rows, part_keys)
            for part in partitions:
                self._window_values(name, wc, sort_rows(part, order), order)

    def _partition(self, rows: list, keys: list) -> list:
        parts: dict[tuple, list] = {}
        for r in rows:
            k = tuple(_hashable(r.cells[key]) for key in keys)
            parts.setdefault(k, []).append(r)
        return list(parts.values())

    def _key_fn(self, e: Expr):
        return lambda r: self.eval(e, r.cells)

    def _level_order(self, level: int) -> list:
        order = [
            (self._key_fn(ColumnRef(c)), d)
            for c, d in self.spec.levels[level].ordering
        ]
        return order + self._tiebreak(level)

    def _tiebreak(self, level: int) -> list:
        keys = [
            (self._key_fn(ColumnRef(k)), "asc")
            for k in self.validated.group_keys[level]
        ]
        if level == 0:
            keys.append(((lambda r: r.cells[ROW_COL]), "asc"))
        return keys

    def _window_values(self, name: str, wc, ordered: list, order: list) -> None:
        fn = wc.function
        arg = wc.args[0] if wc.args else None
        if fn == "Lag":
            for i, r in enumerate(ordered):
                r.cells[name] = (
                    self.eval(arg, ordered[i - 1].cells) if i > 0 else None
                )
        elif fn == "Rank":
            rank = 0
            for i, r in enumerate(ordered):
                if i == 0 or not order_values_equal(r, ordered[i - 1], order):
                    rank = i + 1
                r.cells[name] = rank
        elif fn == "CumulativeSum":
            running = None
            for r in ordered:
                v = self.eval(arg, r.cells)
                if v is not None:
                    running = v if running is None else running + v
                r.cells[name] = running
        elif fn == "MovingAverage":
            values = [self.eval(arg, r.cells) for r in ordered]
            for i, r in enumerate(ordered):
                size = self.eval(wc.args[1], r.cells)
                if not isinstance(size, int):
                    raise UnsupportedQuery(
                        "MovingAverage needs a literal window size"
                    )
                window = [v for v in values[max(0, i - size):i + 1]
                          if v is not None]
                r.cells[name] = sum(window) / len(window) if window else None
        elif fn == "FillDown":
            last = None
            for r in ordered:
                v = self.eval(arg, r.cells)
                if v is not None:
                    last = v
                r.cells[name] = last
        else:
            raise UnsupportedQuery(f"window function {fn}")

    def apply_select(self, op: SelectOp) -> None:
        level = op.level
        rows = self.level(level)
        survivors = [r for r in rows
                     if self.eval(op.predicate, r.cells) is True]
        self.levels[level] = survivors
        for m in list(self.levels):
            if m == level or m == self.n - 1:
                continue
            if m > level:
                live = {id(ancestor(r, m)) for r in survivors}
                self.levels[m] = [g for g in self.levels[m] if id(g) in live]
            else:
                live = {id(r) for r in survivors}
                self.levels[m] = [
                    r for r in self.levels[m]
                    if id(ancestor(r, level)) in live
                ]

    # -- output ------------------------------------------------------------

    def assemble_output(self) -> Table:
        g = self.validated.output_grain
        rows = self.level(g)

        visible: list = []  # (name, level)
        grain_keys = set(self.validated.group_keys[g])
        for name, col in self.spec.columns.items():
            if name not in self.graph.columns or col.hidden:
                continue
            if col.resident_level >= g:
                visible.append((name, col.resident_level))
                flag = self.plan.multi_flags.get(name)
                if flag is not None:
                    visible.append((flag, col.resident_level))
            elif name in grain_keys:
                # grouping keys label the collapsed rows even though the
                # column itself lives below the output grain
                visible.append((name, g))
        for _name, lv in visible:
            if lv > g:
                self.level(lv)

        def cell(row: Row, name: str, lv: int):
            src = row if lv == g else ancestor(row, lv)
            return src.cells[name]

        order: list = []
        for m in range(self.n - 2, g - 1, -1):
            self.level(m)
            for c, d in self.spec.levels[m].ordering:
                order.append(((lambda r, n=c, lv=m: cell(r, n, lv)), d))
        for k in self.validated.group_keys[g]:
            order.append(((lambda r, n=k: r.cells[n]), "asc"))
        if g == 0:
            order.append(((lambda r: r.cells[ROW_COL]), "asc"))
        ordered = sort_rows(rows, order)

        limit = offset = None
        if self.page is not None:
            limit, offset = self.page.limit, self.page.offset
        elif self.spec.page is not None:
            limit, offset = self.spec.page.limit, self.spec.page.offset
        if offset:
            ordered = ordered[offset:]
        if limit is not None:
            ordered = ordered[:limit]

        columns = [(n, self.plan.schema[n][1]) for n, _lv in visible]
        out_rows = [
            tuple(
                coerce_value(cell(r, n, lv), self.plan.schema[n][1])
                for n, lv in visible
            )
            for r in ordered
        ]
        return Table(columns, out_rows)


def evaluate_plan(plan: WalgPlan, catalog: Catalog,
                  page: Optional[Page] = None) -> Table:
    return _Interpreter(plan, catalog, page).run()


def evaluate_resolved(resolved: ResolvedSpec, catalog: Catalog,
                      page: Optional[Page] = None) -> Table:
    graph = eliminate_dead_code(build_graph(resolved))
    plan = build_plan(graph)  # deliberately without any rewriting
    return evaluate_plan(plan, catalog, page)


def evaluate_spec(spec: Union[str, WorksheetSpec], catalog: Catalog,
                  bindings: Optional[dict] = None,
                  page: Optional[Page] = None) -> Table:
    if isinstance(spec, str):
        spec = parse_spec(spec)
    validated = validate_spec(spec, catalog)
    resolved = resolve_inputs(validated, catalog, bindings)
    return evaluate_resolved(resolved, catalog, page)
