"""Lowering the ordered operator plan onto relational algebra.

One relational subtree is maintained per level (``cur[i]``). Levels
materialize lazily: level ``i`` is the grouping of level ``i-1``'s rows by
the keys of the cumulative keyset that are resident below ``i``; the
totals level is a single unconditional row. Slots are replayed in schedule
order, so a value computed before a row test keeps its pre-filter reading
while later slots see filtered data — exactly what the interpreter does.

Row tests propagate across levels with semijoins on grouping keys; a
group survives iff any of its rows do, and rows survive iff their group
does. When the scheduler placed an aggregation directly after the row
test feeding it, the semijoin on the aggregation's target is skipped and
the aggregation joins inner instead.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Optional

from sheetc.calc_graph import build_graph, eliminate_dead_code
from sheetc.errors import UnsupportedQuery
from sheetc.formula.ast import BinOp, Call, ColumnRef, Expr, If, Literal
from sheetc.formula.functions import FUNCTIONS, FunctionClass
from sheetc.options import CompilerOptions, Page
from sheetc.relalg.ops import (
    Aggregate,
    Filter,
    Join,
    Project,
    RawSQL,
    RelNode,
    Scan,
    SemiJoin,
    Sort,
    Window,
    WindowDef,
    column_names,
)
from sheetc.scalars import ScalarType
from sheetc.spec_model import ResolvedSpec, ValidationError
from sheetc.walg import (
    AUTO_AGG,
    IS_MULTI,
    JoinOp,
    ProjectOp,
    SelectOp,
    WalgPlan,
    WindowOp,
    build_plan,
    optimize_walg,
)

ROW_COL = "$row"  # synthetic base-level row number, the determinism anchor

_AGG_NAMES = {
    name for name, sig in FUNCTIONS.items()
    if sig.fclass is FunctionClass.AGGREGATE
}


def _passthrough(node) -> dict:
    return {n: ColumnRef(n) for n, _t in node.columns}


class Lowering:
    def __init__(self, plan: WalgPlan, options: CompilerOptions,
                 page: Optional[Page] = None):
        self.plan = plan
        self.graph = plan.graph
        self.resolved: ResolvedSpec = plan.graph.resolved
        self.validated = self.resolved.validated
        self.spec = self.resolved.spec
        self.options = options
        self.page = page
        self.n = len(self.spec.levels)
        self.cur: dict[int, RelNode] = {}
        self.types: dict[str, ScalarType] = {ROW_COL: ScalarType.NUMBER}
        for name, (_lv, t) in plan.schema.items():
            self.types[name] = t
        self._tmp = 0

    def fresh(self, hint: str) -> str:
        self._tmp += 1
        return f"${hint}#{self._tmp}"

    # -- level tables -----------------------------------------------------

    def level(self, i: int) -> RelNode:
        if i not in self.cur:
            if i == 0:
                self.cur[0] = self.build_base()
            else:
                self.cur[i] = self.materialize(i)
        return self.cur[i]

    def build_base(self) -> RelNode:
        node = self.input_node(self.resolved.primary)
        for jspec, rin in self.resolved.joins:
            if jspec.join_type not in ("inner", "left"):
                raise UnsupportedQuery(
                    f"{jspec.join_type} joins cannot be expressed as part of "
                    f"a single flat query"
                )
            right = self.input_node(rin)
            node = Join(node, right, jspec.join_type, list(jspec.on),
                        annotated=False,
                        columns=node.columns + [
                            c for c in right.columns
                            if c[0] not in column_names(node)
                        ])
        for link in self.resolved.links:
            right_src = self.input_node(link.target)
            remote_keys = [r for _l, r in link.on]
            exprs = {k: ColumnRef(k) for k in remote_keys}
            cols = [(k, dict(right_src.columns)[k]) for k in remote_keys]
            for attr in link.attributes:
                out = f"{link.name}.{attr}"
                exprs[out] = ColumnRef(attr)
                cols.append((out, dict(right_src.columns)[attr]))
            right = Project(right_src, exprs, cols)
            node = Join(node, right, "left",
                        [(l, r) for l, r in link.on], annotated=True,
                        columns=node.columns + [
                            c for c in cols if c[0] not in column_names(node)
                        ])
        # a deterministic row number anchors ordering and window tiebreaks
        order = [(ColumnRef(n), "asc") for n, _t in node.columns]
        node = Window(
            node,
            {ROW_COL: WindowDef("RowNumber", (), [], order)},
            node.columns + [(ROW_COL, ScalarType.NUMBER)],
        )
        return node

    def input_node(self, rin) -> RelNode:
        if rin.kind == "table":
            return Scan(rin.table_name, list(rin.schema))
        if rin.kind == "sql":
            return RawSQL(rin.sql_text, list(rin.schema))
        # a worksheet input: compile the inner sheet in place
        return lower_resolved(rin.inner, self.options).root

    def materialize(self, i: int) -> RelNode:
        child = self.level(i - 1)
        keys = list(self.validated.group_keys[i])
        child = self.with_keys(child, i - 1, keys)
        if i == self.n - 1:
            # the totals grain: always exactly one row
            exprs = {"$total": Call("Count", ())}
            cols = [("$total", ScalarType.NUMBER)]
            self.types["$total"] = ScalarType.NUMBER
            return Aggregate(child, [], exprs, cols)
        exprs = {k: ColumnRef(k) for k in keys}
        cols = [(k, self.types[k]) for k in keys]
        return Aggregate(child, keys, exprs, cols)

    def with_keys(self, node: RelNode, level: int, keys: list) -> RelNode:
        """Attach missing grouping keys by chain-joining up the hierarchy."""
        have = set(column_names(node))
        missing = [k for k in keys if k not in have]
        j = level
        while missing:
            j += 1
            if j >= self.n - 1:
                raise UnsupportedQuery(
                    f"grouping keys {missing} cannot be reached from level {level}"
                )
            upper = self.level(j)
            link_keys = [k for k in self.validated.group_keys[j]
                         if k in have]
            if set(link_keys) != set(self.validated.group_keys[j]):
                raise UnsupportedQuery(
                    f"grouping keys {missing} cannot be reached from level {level}"
                )
            found = [k for k in missing if k in column_names(upper)]
            if not found:
                continue
            exprs = {k: ColumnRef(k) for k in link_keys + found}
            cols = [(k, self.types[k]) for k in link_keys + found]
            right = Project(upper, exprs, cols)
            node = Join(node, right, "left", [(k, k) for k in link_keys],
                        annotated=True,
                        columns=node.columns + [(k, self.types[k]) for k in found])
            have |= set(found)
            missing = [k for k in missing if k not in have]
        return node

    # -- expression translation -------------------------------------------

    def translate(self, e: Expr) -> Expr:
        if isinstance(e, ColumnRef):
            entry = self.graph.env.get(e.name)
            if entry is not None and entry.kind == "parameter":
                return self.parameter_literal(e.name)
            return e
        if isinstance(e, Call):
            return replace(e, args=tuple(self.translate(a) for a in e.args))
        if isinstance(e, BinOp):
            return replace(e, lhs=self.translate(e.lhs), rhs=self.translate(e.rhs))
        if isinstance(e, If):
            return replace(
                e, cond=self.translate(e.cond), then=self.translate(e.then),
                else_=self.translate(e.else_) if e.else_ is not None else None,
            )
        return e

    def parameter_literal(self, name: str) -> Literal:
        import datetime

        p = self.spec.parameters[name]
        v = self.resolved.bindings[name]
        if p.type is ScalarType.DATE and not isinstance(v, datetime.date):
            try:
                v = datetime.date.fromisoformat(str(v))
            except ValueError:
                raise ValidationError(
                    f"parameter {name!r}: {v!r} is not a date"
                ) from None
        return Literal(v)

    # -- slot replay ------------------------------------------------------

    def run(self) -> "LoweredPlan":
        elided: dict[int, set] = {}  # select op position -> elided targets
        ops = self.plan.ops
        if self.options.elide_semijoins:
            for i, op in enumerate(ops):
                if isinstance(op, SelectOp):
                    targets = set()
                    for later in ops[i + 1:]:
                        if isinstance(later, SelectOp):
                            break
                        if isinstance(later, JoinOp) and later.inline_filter \
                                and later.source == op.level:
                            targets.add(later.target)
                    elided[i] = targets

        for i, op in enumerate(ops):
            if isinstance(op, ProjectOp):
                self.apply_project(op)
            elif isinstance(op, WindowOp):
                self.apply_window(op)
            elif isinstance(op, JoinOp):
                self.apply_join(op)
            else:
                self.apply_select(op, elided.get(i, set()))

        root = self.assemble_output()
        return LoweredPlan(root, self.output_columns, self.plan)

    def apply_project(self, op: ProjectOp) -> None:
        node = self.level(op.level)
        exprs = _passthrough(node)
        cols = list(node.columns)
        defined: dict[str, Expr] = {}
        for name, expr in op.exprs.items():
            translated = self.translate(expr)
            translated = _inline(translated, defined)
            defined[name] = translated
            exprs[name] = translated
            cols.append((name, self.types[name]))
        self.cur[op.level] = Project(node, exprs, cols)

    def apply_window(self, op: WindowOp) -> None:
        level = op.level
        node = self.level(level)
        partition = list(self.validated.group_keys[level + 1]) \
            if level + 1 < self.n else []
        order = self.level_order(level)
        for name, wc in op.exprs.items():
            args = tuple(self.translate(a) for a in wc.args)
            if wc.order_by is not None:
                worder = [(self.translate(wc.order_by),
                           "desc" if wc.descending else "asc")]
                worder += self.tiebreak_order(level)
                wpartition: list = []  # ranking for row tests is global
            else:
                worder = order
                wpartition = partition
            node = self.window_node(node, name, wc.function, args,
                                    wpartition, worder)
        self.cur[level] = node

    def window_node(self, node, name, function, args, partition, order):
        t = self.types[name]
        if function == "Lag":
            wd = WindowDef("Lag", args, partition, order)
        elif function == "Rank":
            wd = WindowDef("Rank", args[:0], partition, order)
        elif function == "CumulativeSum":
            wd = WindowDef("Sum", args, partition, order, frame=("unbounded",))
        elif function == "MovingAverage":
            frame_arg = args[1]
            if not isinstance(frame_arg, Literal) \
                    or not isinstance(frame_arg.value, int):
                raise UnsupportedQuery(
                    "MovingAverage needs a literal window size"
                )
            wd = WindowDef("Avg", args[:1], partition, order,
                           frame=("preceding", frame_arg.value))
        elif function == "FillDown":
            # stage 1: count non-nulls so far — constant within each run of
            # nulls; stage 2: the run's single non-null value
            grp = self.fresh("fill")
            self.types[grp] = ScalarType.NUMBER
            node = Window(
                node,
                {grp: WindowDef("Count", args, partition, order,
                                frame=("unbounded",))},
                node.columns + [(grp, ScalarType.NUMBER)],
            )
            wd = WindowDef("Max", args, partition + [grp], [])
        else:
            raise UnsupportedQuery(f"window function {function}")
        return Window(node, {name: wd}, node.columns + [(name, t)])

    def level_order(self, level: int) -> list:
        order = [(ColumnRef(c), d) for c, d in self.spec.levels[level].ordering]
        order += self.tiebreak_order(level)
        return order

    def tiebreak_order(self, level: int) -> list:
        keys = [(ColumnRef(k), "asc") for k in self.validated.group_keys[level]]
        if level == 0:
            keys.append((ColumnRef(ROW_COL), "asc"))
        return keys

    def apply_join(self, op: JoinOp) -> None:
        if op.is_aggregate:
            self.apply_aggregate_join(op)
        else:
            self.apply_repeat_join(op)

    def apply_aggregate_join(self, op: JoinOp) -> None:
        target = self.level(op.target)
        keys = list(self.validated.group_keys[op.target])
        child = self.with_keys(self.level(op.source), op.source, keys)
        exprs: dict[str, Expr] = {k: ColumnRef(k) for k in keys}
        cols = [(k, self.types[k]) for k in keys]
        for name, e in op.exprs.items():
            exprs[name] = self.agg_expr(e)
            cols.append((name, self.types[name]))
        sub = Aggregate(child, keys, exprs, cols)
        kind = "inner" if (op.inline_filter and self.options.elide_semijoins) \
            else "left"
        target = self.with_keys(target, op.target, keys)
        self.cur[op.target] = Join(
            target, sub, kind, [(k, k) for k in keys],
            annotated=(kind == "left"),
            columns=target.columns + [
                (n, t) for n, t in cols if n not in keys
            ],
        )

    def agg_expr(self, e: Expr) -> Expr:
        """Translate a slot aggregate expression, expanding the automatic
        aggregation pseudo-calls into min/max comparisons."""
        if isinstance(e, Call) and e.function == AUTO_AGG:
            arg = self.translate(e.args[0])
            mn, mx = Call("Min", (arg,)), Call("Max", (arg,))
            return If(BinOp("=", mn, mx), mn, Literal(None))
        if isinstance(e, Call) and e.function == IS_MULTI:
            arg = self.translate(e.args[0])
            mn, mx = Call("Min", (arg,)), Call("Max", (arg,))
            both_null = BinOp("And", Call("IsNull", (mn,)), Call("IsNull", (mx,)))
            return If(BinOp("Or", BinOp("=", mn, mx), both_null),
                      Literal(False), Literal(True))
        if isinstance(e, Call) and e.function in _AGG_NAMES:
            return replace(e, args=tuple(self.translate(a) for a in e.args))
        raise TypeError(f"not an aggregate slot expression: {e!r}")

    def apply_repeat_join(self, op: JoinOp) -> None:
        keys = list(self.validated.group_keys[op.source])
        upper = self.level(op.source)
        exprs = {k: ColumnRef(k) for k in keys}
        cols = [(k, self.types[k]) for k in keys]
        for name, e in op.exprs.items():
            exprs[name] = self.translate(e)
            cols.append((name, self.types[name]))
        right = Project(upper, exprs, cols)
        target = self.with_keys(self.level(op.target), op.target, keys)
        self.cur[op.target] = Join(
            target, right, "left", [(k, k) for k in keys], annotated=True,
            columns=target.columns + [(n, t) for n, t in cols if n not in keys],
        )

    def apply_select(self, op: SelectOp, elided_targets: set) -> None:
        level = op.level
        node = self.level(level)
        pred = self.translate(op.predicate)
        filtered = Filter(node, pred, node.columns)
        self.cur[level] = filtered
        for m in list(self.cur):
            if m == level or m == self.n - 1 or m in elided_targets:
                continue
            if m > level:
                keys = list(self.validated.group_keys[m])
                right = self.with_keys(filtered, level, keys)
            else:
                keys = list(self.validated.group_keys[level])
                right = filtered
                self.cur[m] = self._semijoin_down(m, level, keys)
                continue
            rkeys = Project(right, {k: ColumnRef(k) for k in keys},
                            [(k, self.types[k]) for k in keys])
            self.cur[m] = SemiJoin(self.cur[m], rkeys, [(k, k) for k in keys],
                                   self.cur[m].columns)

    def _semijoin_down(self, m: int, level: int, keys: list):
        left = self.with_keys(self.cur[m], m, keys)
        right = Project(self.cur[level], {k: ColumnRef(k) for k in keys},
                        [(k, self.types[k]) for k in keys])
        return SemiJoin(left, right, [(k, k) for k in keys],
                        self.cur[m].columns)

    # -- output -----------------------------------------------------------

    def assemble_output(self) -> RelNode:
        g = self.validated.output_grain
        node = self.level(g)

        visible: list[tuple] = []  # (name, level)
        grain_keys = set(self.validated.group_keys[g])
        for name, col in self.spec.columns.items():
            cn = self.graph.columns.get(name)
            if cn is None or col.hidden:
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

        for m in range(g + 1, self.n):
            wanted = [n for n, lv in visible if lv == m]
            wanted += [c for c, _d in self.spec.levels[m].ordering
                       if c not in wanted and self._level_of(c) == m]
            if not wanted:
                continue
            keys = list(self.validated.group_keys[m])
            upper = self.level(m)
            exprs = {k: ColumnRef(k) for k in keys}
            cols = [(k, self.types[k]) for k in keys]
            for n_ in wanted:
                exprs[n_] = ColumnRef(n_)
                cols.append((n_, self.types[n_]))
            right = Project(upper, exprs, cols)
            node = self.with_keys(node, g, keys) if keys else node
            node = Join(node, right, "left", [(k, k) for k in keys],
                        annotated=True,
                        columns=node.columns + [
                            (n_, self.types[n_]) for n_ in wanted
                            if n_ not in column_names(node)
                        ])

        keys_order: list = []
        for m in range(self.n - 2, g - 1, -1):
            for c, d in self.spec.levels[m].ordering:
                if c in column_names(node):
                    keys_order.append((ColumnRef(c), d))
        for k in self.validated.group_keys[g]:
            keys_order.append((ColumnRef(k), "asc"))
        if g == 0:
            keys_order.append((ColumnRef(ROW_COL), "asc"))

        out_cols = [(n_, self.types[n_]) for n_, _lv in visible]
        limit = offset = None
        if self.page is not None:
            limit, offset = self.page.limit, self.page.offset
        elif self.spec.page is not None:
            limit, offset = self.spec.page.limit, self.spec.page.offset
        self.output_columns = out_cols
        return Sort(node, keys_order, limit, offset or 0, out_cols)

    def _level_of(self, name: str) -> int:
        if name in self.plan.schema:
            return self.plan.schema[name][0]
        return 0


class LoweredPlan:
    def __init__(self, root: RelNode, columns: list, walg_plan: WalgPlan):
        self.root = root
        self.columns = columns
        self.walg_plan = walg_plan


def _inline(e: Expr, defined: dict) -> Expr:
    if isinstance(e, ColumnRef):
        return defined.get(e.name, e)
    if isinstance(e, Call):
        return replace(e, args=tuple(_inline(a, defined) for a in e.args))
    if isinstance(e, BinOp):
        return replace(e, lhs=_inline(e.lhs, defined), rhs=_inline(e.rhs, defined))
    if isinstance(e, If):
        return replace(
            e, cond=_inline(e.cond, defined), then=_inline(e.then, defined),
            else_=_inline(e.else_, defined) if e.else_ is not None else None,
        )
    return e


def lower_plan(plan: WalgPlan, options: CompilerOptions,
               page: Optional[Page] = None) -> LoweredPlan:
    return Lowering(plan, options, page).run()


def lower_resolved(resolved: ResolvedSpec, options: CompilerOptions,
                   page: Optional[Page] = None) -> LoweredPlan:
    graph = build_graph(resolved)
    if options.eliminate_dead_columns:
        graph = eliminate_dead_code(graph)
    plan = build_plan(graph, merge_joins=options.merge_joins)
    if options.elide_semijoins:
        plan = optimize_walg(plan)
    return lower_plan(plan, options, page)
