"""Column dependency graph: cycle breaking, ordered typechecking, filters,
dead-code elimination.

Columns reference each other freely, so compilation starts by building the
reference graph, replacing every column on a reference cycle with an Error
literal (each such column gets a diagnostic), and typechecking the rest in
dependency order. Filters are turned into predicate nodes here; top-n
filters additionally synthesize a hidden ranking helper column.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field, replace
from typing import Optional

from sheetc.formula import fold_constants, parse_formula, typecheck
from sheetc.formula.ast import BinOp, Call, ColumnRef, Expr, Literal, walk
from sheetc.formula.typecheck import Diagnostic, EnvEntry, TypedExpr
from sheetc.scalars import ScalarType
from sheetc.spec_model import FilterSpec, ResolvedSpec, ValidationError


@dataclass
class ColumnNode:
    name: str
    level: int
    typed: TypedExpr
    hidden: bool
    # direct dependencies on other worksheet columns (not input attributes)
    depends: tuple = ()
    synthesized: bool = False
    # for ranking helpers synthesized from top-n filters
    rank_ascending: bool = False

    @property
    def type(self) -> ScalarType:
        return self.typed.type


@dataclass
class FilterNode:
    index: int
    spec: FilterSpec
    predicate: TypedExpr
    # the level the row test applies at: the lowest level any referenced
    # column is resident at (so an aggregate-threshold test runs against
    # group rows, not detail rows)
    level: int
    depends: tuple = ()


@dataclass
class CalcGraph:
    resolved: ResolvedSpec
    columns: dict  # name -> ColumnNode, spec order then synthesized
    filters: list  # [FilterNode]
    order: list  # column names, dependency order
    cycles: list  # [[column name, ...]] reference cycles that were broken
    env: dict  # name -> EnvEntry for every column/attr/parameter

    @property
    def diagnostics(self) -> dict:
        out = {}
        for name, node in self.columns.items():
            if node.typed.diagnostics:
                out[name] = list(node.typed.diagnostics)
        return out


def _column_deps(expr: Expr, column_names: set) -> list:
    deps: list[str] = []
    for node in walk(expr):
        if isinstance(node, ColumnRef) and node.name in column_names \
                and node.name not in deps:
            deps.append(node.name)
    return deps


def _sccs(names: list, edges: dict) -> list:
    """Tarjan's strongly connected components, in dependency order."""
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set = set()
    stack: list[str] = []
    out: list[list[str]] = []
    counter = [0]

    def visit(v: str) -> None:
        index[v] = low[v] = counter[0]
        counter[0] += 1
        stack.append(v)
        on_stack.add(v)
        for w in edges.get(v, ()):
            if w not in index:
                visit(w)
                low[v] = min(low[v], low[w])
            elif w in on_stack:
                low[v] = min(low[v], index[w])
        if low[v] == index[v]:
            comp = []
            while True:
                w = stack.pop()
                on_stack.discard(w)
                comp.append(w)
                if w == v:
                    break
            out.append(comp)

    # iterative wrapper to dodge recursion limits on deep chains
    import sys
    old = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old, 10 * len(names) + 100))
    try:
        for v in names:
            if v not in index:
                visit(v)
    finally:
        sys.setrecursionlimit(old)
    return out


def _typed_literal(value, target: ScalarType, where: str):
    if value is None:
        return Literal(None, type_hint=target)
    try:
        if target is ScalarType.DATE:
            v = value if isinstance(value, datetime.date) \
                else datetime.date.fromisoformat(str(value))
        elif target is ScalarType.NUMBER:
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ValueError(value)
            v = value
        elif target is ScalarType.LOGICAL:
            if not isinstance(value, bool):
                raise ValueError(value)
            v = value
        elif target is ScalarType.TEXT:
            if not isinstance(value, str):
                raise ValueError(value)
            v = value
        else:
            raise ValueError(value)
    except ValueError:
        raise ValidationError(
            f"{where}: value {value!r} does not match column type {target.value}"
        ) from None
    return Literal(v)


def _filter_predicate(f: FilterSpec, index: int, target_type: ScalarType) -> Expr:
    where = f"filter {index}"
    t = ColumnRef(f.target)
    if f.kind in ("include_list", "exclude_list"):
        if not f.values:
            pred: Expr = Literal(f.kind == "exclude_list")
        else:
            pred = BinOp("=", t, _typed_literal(f.values[0], target_type, where))
            for v in f.values[1:]:
                pred = BinOp("Or", pred,
                             BinOp("=", t, _typed_literal(v, target_type, where)))
            if f.kind == "exclude_list":
                pred = Call("Not", (pred,))
        return pred
    if f.kind == "range":
        parts = []
        if f.low is not None:
            parts.append(BinOp(">=", t, _typed_literal(f.low, target_type, where)))
        if f.high is not None:
            parts.append(BinOp("<=", t, _typed_literal(f.high, target_type, where)))
        if not parts:
            return Literal(True)
        pred = parts[0]
        for p in parts[1:]:
            pred = BinOp("And", pred, p)
        return pred
    if f.kind == "text_match":
        if target_type is not ScalarType.TEXT:
            raise ValidationError(f"{where}: text_match needs a Text column")
        return Call("Like", (t, Literal(f.pattern or "")))
    raise AssertionError(f.kind)


def build_graph(resolved: ResolvedSpec) -> CalcGraph:
    """Typecheck every column in dependency order, breaking cycles."""
    spec = resolved.spec
    column_names = set(spec.columns)

    # a column may share its name with an input attribute; a reference to
    # that name inside its own formula means the attribute, not the column
    deps = {
        name: [d for d in _column_deps(expr, column_names)
               if not (d == name and name in resolved.input_attrs)]
        for name, expr in resolved.formulas.items()
    }

    components = _sccs(list(spec.columns), deps)
    cyclic: set = set()
    cycles: list[list[str]] = []
    for comp in components:
        if len(comp) > 1 or comp[0] in deps.get(comp[0], ()):
            cycles.append(sorted(comp))
            cyclic.update(comp)

    env: dict[str, EnvEntry] = {}
    for attr, t in resolved.input_attrs.items():
        env[attr] = EnvEntry(t, 0, "input")
    for pname, p in spec.parameters.items():
        env[pname] = EnvEntry(p.type, None, "parameter")

    columns: dict[str, ColumnNode] = {}
    order: list[str] = []
    for comp in components:  # Tarjan emits dependencies first
        for name in comp:
            col = spec.columns[name]
            if name in cyclic:
                typed = TypedExpr(
                    Literal(None, type_hint=ScalarType.ERROR), ScalarType.ERROR
                )
                typed.diagnostics = [Diagnostic(
                    0, len(col.formula),
                    f"[{name}] is part of a reference cycle",
                )]
            else:
                typed = fold_constants(typecheck(resolved.formulas[name], env))
            env[name] = EnvEntry(typed.type, col.resident_level, "column")
            columns[name] = ColumnNode(
                name=name,
                level=col.resident_level,
                typed=typed,
                hidden=col.hidden,
                depends=tuple(deps[name]),
            )
            order.append(name)

    # rebuild in spec order for stable output
    columns = {name: columns[name] for name in spec.columns}

    filters = _build_filters(resolved, columns, env)
    order.extend(n for n in columns if n not in order)  # synthesized helpers

    return CalcGraph(resolved, columns, filters, order, cycles, env)


def _build_filters(resolved: ResolvedSpec, columns: dict, env: dict) -> list:
    spec = resolved.spec
    filters: list[FilterNode] = []
    n = len(spec.levels)
    for i, f in enumerate(spec.filters):
        if f.kind == "custom_predicate":
            expr = resolved.filter_predicates[i]
            typed = fold_constants(typecheck(expr, env))
            if typed.type not in (ScalarType.LOGICAL, ScalarType.ERROR):
                raise ValidationError(
                    f"filter {i}: predicate has type {typed.type.value}, "
                    f"expected Logical"
                )
        elif f.kind == "top_n":
            entry = env.get(f.target)
            helper = _synthesize_rank(resolved, columns, env, f, i)
            expr = BinOp("<=", ColumnRef(helper), Literal(int(f.limit or 0)))
            typed = fold_constants(typecheck(expr, env))
        else:
            entry = env.get(f.target)
            if entry is None:
                raise ValidationError(f"filter {i} targets unknown column")
            expr = _filter_predicate(f, i, entry.type)
            typed = fold_constants(typecheck(expr, env))
        level = 0
        refs = typed.referenced_columns()
        if refs:
            level = min(refs.values())
        level = min(level, n - 2)  # the totals row is never filtered
        depends = tuple(r for r in refs if r in columns)
        filters.append(FilterNode(i, f, typed, level, depends))
    return filters


def _synthesize_rank(resolved: ResolvedSpec, columns: dict, env: dict,
                     f: FilterSpec, index: int) -> str:
    """Add a hidden Rank column ordered by the filter target."""
    entry = env.get(f.target)
    if entry is None:
        raise ValidationError(f"filter {index} targets unknown column")
    if entry.type is not ScalarType.NUMBER and entry.type is not ScalarType.DATE:
        raise ValidationError(
            f"filter {index}: top_n needs a Number or Date column"
        )
    name = f"rank of {f.target} ({index})"
    while name in env:
        name += "_"
    level = entry.level if entry.level is not None else 0
    expr = Call("Rank", ())
    typed = fold_constants(typecheck(expr, env))
    env[name] = EnvEntry(ScalarType.NUMBER, level, "column")
    columns[name] = ColumnNode(
        name=name, level=level, typed=typed, hidden=True,
        depends=(f.target,),
        synthesized=True,
        rank_ascending=not f.descending,
    )
    return name


def eliminate_dead_code(graph: CalcGraph) -> CalcGraph:
    """Drop hidden columns nothing reachable uses.

    Roots: every visible column, every level key and ordering column, and
    every filter predicate. Filters themselves always stay — they change
    which rows survive even if their target column is hidden.
    """
    spec = graph.resolved.spec
    roots: list[str] = [n for n, c in graph.columns.items() if not c.hidden]
    for level in spec.levels:
        roots.extend(k for k in level.keys if k in graph.columns)
        roots.extend(c for c, _d in level.ordering if c in graph.columns)
    for f in graph.filters:
        roots.extend(f.depends)

    live: set = set()
    frontier = [r for r in roots if r in graph.columns]
    while frontier:
        name = frontier.pop()
        if name in live:
            continue
        live.add(name)
        frontier.extend(d for d in graph.columns[name].depends
                        if d not in live and d in graph.columns)

    columns = {n: c for n, c in graph.columns.items() if n in live}
    order = [n for n in graph.order if n in live]
    return CalcGraph(graph.resolved, columns, graph.filters, order,
                     graph.cycles, graph.env)
