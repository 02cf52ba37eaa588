"""Human-readable dumps of each compilation stage."""

from __future__ import annotations

from sheetc.compiler import CompiledQuery
from sheetc.formula.ast import to_text
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
    children_of,
)
from sheetc.walg import JoinOp, ProjectOp, SelectOp, WindowOp

STAGES = ("graph", "walg", "rel", "sql")


def explain(compiled: CompiledQuery, stage: str) -> str:
    if stage == "graph":
        return _graph_text(compiled)
    if stage == "walg":
        return _walg_text(compiled)
    if stage == "rel":
        return _rel_text(compiled)
    if stage == "sql":
        ops = _operator_count(compiled.rel_root)
        return f"-- operators: {ops}\n{compiled.sql}"
    raise ValueError(f"unknown stage {stage!r}; expected one of {STAGES}")


def _graph_text(compiled: CompiledQuery) -> str:
    graph = compiled.graph
    lines = []
    for name, node in graph.columns.items():
        deps = f"  <- {', '.join(node.depends)}" if node.depends else ""
        hidden = " (hidden)" if node.hidden else ""
        lines.append(
            f"[{name}] @L{node.level}: {node.type.value}{hidden}{deps}"
        )
    for f in graph.filters:
        lines.append(
            f"filter {f.index} @L{f.level}: {to_text(f.predicate.node)}"
        )
    for cycle in graph.cycles:
        lines.append("cycle: " + " -> ".join(cycle))
    return "\n".join(lines)


def _walg_text(compiled: CompiledQuery) -> str:
    lines = []
    for i, op in enumerate(compiled.walg_plan.ops):
        lines.append(f"{i}: {_walg_op(op)}")
    return "\n".join(lines)


def _walg_op(op) -> str:
    if isinstance(op, ProjectOp):
        body = ", ".join(f"{n} := {to_text(e)}" for n, e in op.exprs.items())
        return f"Project@L{op.level} {{{body}}}"
    if isinstance(op, SelectOp):
        return f"Select@L{op.level} {to_text(op.predicate)}"
    if isinstance(op, WindowOp):
        body = ", ".join(
            f"{n} := {w.function}({', '.join(to_text(a) for a in w.args)})"
            for n, w in op.exprs.items()
        )
        return f"Window@L{op.level} {{{body}}}"
    if isinstance(op, JoinOp):
        kind = "aggregate" if op.is_aggregate else "repeat"
        inline = " inline-filter" if op.inline_filter else ""
        body = ", ".join(f"{n} := {to_text(e)}" for n, e in op.exprs.items())
        return (f"Join L{op.source}->L{op.target} {kind}{inline} {{{body}}}")
    return repr(op)


def _operator_count(root) -> int:
    seen, stack = set(), [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.extend(children_of(node))
    return len(seen)


def _rel_text(compiled: CompiledQuery) -> str:
    lines = [f"-- operators: {_operator_count(compiled.rel_root)}"]
    shared: dict[int, str] = {}

    def describe(node) -> str:
        if isinstance(node, Scan):
            return f"Scan {node.table}"
        if isinstance(node, RawSQL):
            return "RawSQL"
        if isinstance(node, Project):
            return f"Project [{', '.join(node.exprs)}]"
        if isinstance(node, Filter):
            return f"Filter {to_text(node.predicate)}"
        if isinstance(node, Aggregate):
            by = ", ".join(node.group_by) or "()"
            return f"Aggregate by {by} [{', '.join(node.exprs)}]"
        if isinstance(node, Join):
            on = ", ".join(f"{l}={r}" for l, r in node.on) or "true"
            note = " annotated" if node.annotated else ""
            return f"Join {node.kind}{note} on {on}"
        if isinstance(node, SemiJoin):
            on = ", ".join(f"{l}={r}" for l, r in node.on)
            return f"SemiJoin on {on}"
        if isinstance(node, Window):
            return f"Window [{', '.join(node.windows)}]"
        if isinstance(node, Sort):
            limit = f" limit {node.limit}" if node.limit is not None else ""
            offset = f" offset {node.offset}" if node.offset else ""
            return f"Sort{limit}{offset}"
        return type(node).__name__

    def emit(node, depth: int) -> None:
        pad = "  " * depth
        if id(node) in shared:
            lines.append(f"{pad}(see {shared[id(node)]})")
            return
        label = describe(node)
        shared[id(node)] = label
        lines.append(pad + label)
        for child in children_of(node):
            emit(child, depth + 1)

    emit(compiled.rel_root, 0)
    return "\n".join(lines)
