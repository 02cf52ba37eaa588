"""Worksheet algebra: a small operator language over the level hierarchy.

Each column formula is decomposed into slots of three unary operator kinds
plus window computation:

* ``ProjectOp``    — single-row expressions evaluated at one level.
* ``JoinOp``       — moves values between levels. Aggregation when the
  source is below the target, repetition when the source is above.
* ``SelectOp``     — a row test at one level whose effect propagates to
  every other level (a group survives iff any of its rows survive; rows
  survive iff their group does). The totals row always survives.
* ``WindowOp``     — ordered computations over the rows of one level,
  partitioned by the parent level's identity.

References that cross levels are rewritten to helper columns: a reference
to a strictly lower level becomes an automatic aggregation (the value if
all nested rows agree, null plus a raised indicator otherwise); a
reference to a strictly higher level repeats the enclosing group's value
onto every row.

Operator ordering interleaves filters greedily — a row test runs as soon
as the columns it reads exist, so computations emitted after it see
filtered data while earlier ones keep their pre-filter values. Compatible
neighbouring slots are then fused.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from sheetc.calc_graph import CalcGraph
from sheetc.formula.ast import BinOp, Call, ColumnRef, Expr, If, Literal, walk
from sheetc.formula.functions import FUNCTIONS, FunctionClass
from sheetc.formula.typecheck import TypedExpr
from sheetc.scalars import ScalarType

AUTO_AGG = "AutoAgg"  # pseudo-aggregate: the common value, else null
IS_MULTI = "IsMulti"  # pseudo-aggregate: true iff several distinct values


def multi_flag_name(column: str) -> str:
    return f"{column} (multiple values)"


@dataclass
class WindowCall:
    function: str
    args: tuple  # Expr per argument (frame sizes stay literal args)
    # override for ranking helpers: order by this expression only
    order_by: Optional[Expr] = None
    descending: bool = False


@dataclass
class ProjectOp:
    level: int
    exprs: dict  # name -> Expr


@dataclass
class JoinOp:
    source: int
    target: int
    exprs: dict  # name -> Expr (aggregate calls when source < target)
    # set by optimize_walg: a Select at the source level directly precedes
    # this aggregation, so the lowering may filter inline instead of
    # semijoining
    inline_filter: bool = False

    @property
    def is_aggregate(self) -> bool:
        return self.source < self.target


@dataclass
class SelectOp:
    level: int
    predicate: Expr
    filter_index: int


@dataclass
class WindowOp:
    level: int
    exprs: dict  # name -> WindowCall


WalgOp = Union[ProjectOp, JoinOp, SelectOp, WindowOp]


@dataclass
class WalgPlan:
    graph: CalcGraph
    ops: list  # [WalgOp], execution order
    # every column (spec + helper) -> (level, ScalarType)
    schema: dict
    # visible column -> its raised-indicator column, for columns that are
    # bare references to a lower level
    multi_flags: dict

    @property
    def n_levels(self) -> int:
        return len(self.graph.resolved.spec.levels)


def op_level(op: WalgOp) -> int:
    return op.target if isinstance(op, JoinOp) else op.level


def op_reads(op: WalgOp) -> set:
    refs: set = set()
    if isinstance(op, SelectOp):
        exprs = [op.predicate]
    elif isinstance(op, WindowOp):
        exprs = []
        for w in op.exprs.values():
            exprs.extend(w.args)
            if w.order_by is not None:
                exprs.append(w.order_by)
    else:
        exprs = list(op.exprs.values())
    for e in exprs:
        for node in walk(e):
            if isinstance(node, ColumnRef):
                refs.add(node.name)
    return refs


def op_writes(op: WalgOp) -> set:
    if isinstance(op, SelectOp):
        return set()
    return set(op.exprs)


# --------------------------------------------------------------------------
# Decomposition


class _Decomposer:
    def __init__(self, graph: CalcGraph, merge_joins: bool = True):
        self.graph = graph
        self.merge_joins = merge_joins
        self.ops: list[WalgOp] = []
        self.schema: dict[str, tuple] = {}  # name -> (level, type)
        self.multi_flags: dict[str, str] = {}
        self._counter = 0
        for attr, t in graph.resolved.input_attrs.items():
            self.schema[attr] = (0, t)

    def fresh(self, hint: str) -> str:
        while True:
            name = f"${hint}{self._counter}"
            self._counter += 1
            if name not in self.schema and name not in self.graph.env:
                return name

    def run(self) -> WalgPlan:
        graph = self.graph
        emitted_filters: set = set()
        # Columns in dependency order; each filter is emitted right after
        # the last column it reads (ordering then moves it earlier if its
        # inputs are ready sooner).
        done_columns: set = set()
        for name in graph.order:
            node = graph.columns[name]
            self.decompose_column(name, node.typed, node.level,
                                  synthesized=node.synthesized)
            done_columns.add(name)
            for f in graph.filters:
                if f.index in emitted_filters:
                    continue
                if all(d in done_columns for d in f.depends):
                    self.emit_filter(f)
                    emitted_filters.add(f.index)
        for f in graph.filters:
            if f.index not in emitted_filters:
                self.emit_filter(f)

        ops = order_operations(self.ops, list(self.schema), self.merge_joins)
        return WalgPlan(graph, ops, dict(self.schema), dict(self.multi_flags))

    # -- columns ----------------------------------------------------------

    def decompose_column(self, name: str, typed: TypedExpr, level: int,
                         synthesized: bool = False) -> None:
        if typed.type is ScalarType.ERROR:
            expr: Expr = Literal(None, type_hint=ScalarType.ERROR)
            self.emit_project(level, name, expr, ScalarType.ERROR)
            return
        if synthesized and isinstance(typed.node, Call) \
                and typed.node.function == "Rank":
            # ranking helper for a top-n filter: global rank over the level
            col = self.graph.columns[name]
            target = col.depends[0] if col.depends else None
            order = ColumnRef(target) if target else None
            wc = WindowCall("Rank", (), order_by=order,
                            descending=not getattr(col, "rank_ascending", False))
            self.emit_window(level, name, wc, ScalarType.NUMBER)
            return
        expr = self.lower(typed, level)
        self.emit_named(level, name, expr, typed.type)
        if isinstance(typed.node, ColumnRef) and typed.ref_kind in ("column", "input") \
                and typed.level is not None and typed.level < level:
            flag = multi_flag_name(name)
            if flag in self.schema:
                self.multi_flags[name] = flag

    def emit_named(self, level: int, name: str, expr: Expr, t: ScalarType) -> None:
        """Bind ``name`` to ``expr`` at ``level``, renaming in place when the
        expression is just a reference to a helper this column created."""
        if isinstance(expr, ColumnRef) and expr.name.startswith("$"):
            h = expr.name
            hlevel, htype = self.schema[h]
            if hlevel == level:
                for op in reversed(self.ops):
                    writes = op_writes(op)
                    if h in writes:
                        op.exprs[name] = op.exprs.pop(h)
                        if isinstance(op, JoinOp):
                            mf = multi_flag_name(h)
                            if mf in op.exprs:
                                op.exprs[multi_flag_name(name)] = op.exprs.pop(mf)
                                del self.schema[mf]
                                self.schema[multi_flag_name(name)] = (level, ScalarType.LOGICAL)
                        del self.schema[h]
                        self.schema[name] = (level, t)
                        self._rename_refs(h, name)
                        return
        self.emit_project(level, name, expr, t)

    def _rename_refs(self, old: str, new: str) -> None:
        for op in self.ops:
            if isinstance(op, SelectOp):
                op.predicate = _substitute(op.predicate, old, ColumnRef(new))
            elif isinstance(op, WindowOp):
                for w in op.exprs.values():
                    w.args = tuple(_substitute(a, old, ColumnRef(new)) for a in w.args)
                    if w.order_by is not None:
                        w.order_by = _substitute(w.order_by, old, ColumnRef(new))
            else:
                for k in list(op.exprs):
                    op.exprs[k] = _substitute(op.exprs[k], old, ColumnRef(new))

    def emit_project(self, level: int, name: str, expr: Expr, t: ScalarType) -> None:
        self.ops.append(ProjectOp(level, {name: expr}))
        self.schema[name] = (level, t)

    def emit_window(self, level: int, name: str, wc: WindowCall, t: ScalarType) -> None:
        self.ops.append(WindowOp(level, {name: wc}))
        self.schema[name] = (level, t)

    def emit_filter(self, f) -> None:
        if f.predicate.type is ScalarType.ERROR:
            # an erroring predicate rejects every (non-totals) row
            pred: Expr = Literal(None, type_hint=ScalarType.ERROR)
        else:
            pred = self.lower(f.predicate, f.level)
        self.ops.append(SelectOp(f.level, pred, f.index))

    # -- expressions ------------------------------------------------------

    def lower(self, t: TypedExpr, level: int) -> Expr:
        """Rewrite a typed tree into an expression over names available at
        ``level``, emitting helper slots for anything that crosses levels."""
        node = t.node

        if isinstance(node, Literal):
            return node

        if isinstance(node, ColumnRef):
            if t.ref_kind == "parameter":
                return node
            ref_level = t.level if t.level is not None else 0
            if ref_level == level:
                return node
            if ref_level > level:
                return ColumnRef(self.repeat_down(node.name, ref_level, level))
            return ColumnRef(self.auto_aggregate(node.name, ref_level, level))

        if isinstance(node, Call):
            sig = FUNCTIONS.get(node.function)
            if sig is not None and sig.fclass is FunctionClass.AGGREGATE:
                return self.lower_aggregate(t, level)
            if sig is not None and sig.fclass is FunctionClass.WINDOW:
                return self.lower_window(t, level)
            return Call(node.function,
                        tuple(self.lower(c, level) for c in t.children))

        if isinstance(node, BinOp):
            return BinOp(node.op, self.lower(t.children[0], level),
                         self.lower(t.children[1], level))

        if isinstance(node, If):
            kids = [self.lower(c, level) for c in t.children]
            return If(kids[0], kids[1], kids[2] if len(kids) == 3 else None)

        raise TypeError(f"cannot lower {node!r}")

    def lower_aggregate(self, t: TypedExpr, level: int) -> Expr:
        node = t.node
        sig = FUNCTIONS[node.function]
        lower_refs = [
            lv for _n, lv in self._refs_with_levels(t).items() if lv < level
        ]
        if not lower_refs and level == 0:
            return self.single_row_aggregate(t, level)
        source = min(lower_refs) if lower_refs else level - 1
        args = tuple(self.lower(c, source) for c in t.children)
        h = self.fresh("agg")
        self.ops.append(JoinOp(source, level, {h: Call(node.function, args)}))
        self.schema[h] = (level, t.type)
        return ColumnRef(h)

    def single_row_aggregate(self, t: TypedExpr, level: int) -> Expr:
        """An aggregate with no rows below it collapses onto its own row."""
        fn = t.node.function
        args = tuple(self.lower(c, level) for c in t.children)
        if fn in ("Sum", "Avg", "Min", "Max"):
            return args[0]
        if fn == "Count":
            if not args:
                return Literal(1)
            x = args[0]
            return If(BinOp("=", x, x), Literal(1), Literal(0))
        if fn == "CountDistinct":
            x = args[0]
            return If(BinOp("=", x, x), Literal(1), Literal(0))
        if fn == "CountIf":
            return If(args[0], Literal(1), Literal(0))
        raise TypeError(f"no single-row form for {fn}")

    def lower_window(self, t: TypedExpr, level: int) -> Expr:
        node = t.node
        args = tuple(self.lower(c, level) for c in t.children)
        h = self.fresh("win")
        self.emit_window(level, h, WindowCall(node.function, args), t.type)
        return ColumnRef(h)

    def repeat_down(self, name: str, source: int, target: int) -> str:
        h = self.fresh("rep")
        self.ops.append(JoinOp(source, target, {h: ColumnRef(name)}))
        _lv, t = self.schema.get(name, (source, self._env_type(name)))
        self.schema[h] = (target, t)
        return h

    def auto_aggregate(self, name: str, source: int, target: int) -> str:
        h = self.fresh("auto")
        flag = multi_flag_name(h)
        self.ops.append(JoinOp(source, target, {
            h: Call(AUTO_AGG, (ColumnRef(name),)),
            flag: Call(IS_MULTI, (ColumnRef(name),)),
        }))
        self.schema[h] = (target, self._env_type(name))
        self.schema[flag] = (target, ScalarType.LOGICAL)
        return h

    def _env_type(self, name: str) -> ScalarType:
        if name in self.schema:
            return self.schema[name][1]
        return self.graph.env[name].type

    def _refs_with_levels(self, t: TypedExpr) -> dict:
        refs: dict[str, int] = {}
        for sub in t.walk():
            if isinstance(sub.node, ColumnRef) and sub.ref_kind in ("column", "input"):
                refs.setdefault(sub.node.name, sub.level if sub.level is not None else 0)
        return refs


def _substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    if isinstance(e, ColumnRef):
        return replacement if e.name == name else e
    if isinstance(e, Call):
        return replace(e, args=tuple(_substitute(a, name, replacement) for a in e.args))
    if isinstance(e, BinOp):
        return replace(e, lhs=_substitute(e.lhs, name, replacement),
                       rhs=_substitute(e.rhs, name, replacement))
    if isinstance(e, If):
        return replace(
            e, cond=_substitute(e.cond, name, replacement),
            then=_substitute(e.then, name, replacement),
            else_=_substitute(e.else_, name, replacement) if e.else_ is not None else None,
        )
    return e


# --------------------------------------------------------------------------
# Ordering and fusion


def order_operations(ops: list, known: list,
                     merge_joins: bool = True) -> list:
    """Schedule slots: row tests as early as their inputs allow, everything
    else lowest level first, declaration order breaking ties."""
    produced_by: dict[str, int] = {}
    for i, op in enumerate(ops):
        for w in op_writes(op):
            produced_by[w] = i

    deps: list[set] = []
    for i, op in enumerate(ops):
        d = {produced_by[r] for r in op_reads(op) if r in produced_by}
        d.discard(i)
        deps.append(d)
    # a slot emitted after a row test must stay after it so it sees
    # filtered data (and vice versa: the test must not drift past slots
    # that were meant to see pre-filter data — greedy selection below
    # handles the forward direction, this handles the backward one)
    last_select: Optional[int] = None
    for i, op in enumerate(ops):
        if last_select is not None:
            deps[i].add(last_select)
        if isinstance(op, SelectOp):
            last_select = i

    done: list[int] = []
    remaining = set(range(len(ops)))
    scheduled: set = set()
    while remaining:
        ready = [i for i in remaining if deps[i] <= scheduled]
        selects = [i for i in ready if isinstance(ops[i], SelectOp)]
        if selects:
            pick = min(selects)
        else:
            pick = min(ready, key=lambda i: (op_level(ops[i]), i))
        done.append(pick)
        remaining.discard(pick)
        scheduled.add(pick)

    return fuse([ops[i] for i in done], merge_joins)


def fuse(ops: list, merge_joins: bool = True) -> list:
    """Merge consecutive compatible slots."""
    out: list[WalgOp] = []
    for op in ops:
        prev = out[-1] if out else None
        if isinstance(op, ProjectOp) and isinstance(prev, ProjectOp) \
                and prev.level == op.level:
            prev.exprs.update(op.exprs)
        elif isinstance(op, WindowOp) and isinstance(prev, WindowOp) \
                and prev.level == op.level:
            prev.exprs.update(op.exprs)
        elif merge_joins and isinstance(op, JoinOp) \
                and isinstance(prev, JoinOp) \
                and (prev.source, prev.target) == (op.source, op.target):
            prev.exprs.update(op.exprs)
        elif isinstance(op, SelectOp) and isinstance(prev, SelectOp) \
                and prev.level == op.level:
            prev.predicate = BinOp("And", prev.predicate, op.predicate)
        else:
            out.append(op)
    return out


def build_plan(graph: CalcGraph, merge_joins: bool = True) -> WalgPlan:
    return _Decomposer(graph, merge_joins).run()


def optimize_walg(plan: WalgPlan) -> WalgPlan:
    """Mark aggregations that immediately follow a row test at their source
    level: the lowering can apply the test inline instead of semijoining."""
    ops = list(plan.ops)
    for i, op in enumerate(ops):
        if isinstance(op, SelectOp):
            for later in ops[i + 1:]:
                if isinstance(later, SelectOp):
                    break
                if isinstance(later, JoinOp) and later.is_aggregate \
                        and later.source == op.level:
                    later.inline_filter = True
    return WalgPlan(plan.graph, ops, plan.schema, plan.multi_flags)
