"""Relational rewrites. Each pass is individually toggleable so results
can be compared with and without it.

Passes: identity-node removal, stacked Project/Filter merging, attribute
pruning, cardinality-preserving join pruning, and pushing a sort+limit
below a left-preserving join.
"""

from __future__ import annotations

from dataclasses import replace as dc_replace

from sheetc.formula.ast import BinOp, Call, ColumnRef, Expr, If, Literal, walk
from sheetc.options import CompilerOptions
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
    column_names,
)


def _refs(e: Expr) -> set:
    return {n.name for n in walk(e) if isinstance(n, ColumnRef)}


def _subst(e: Expr, mapping: dict) -> Expr:
    if isinstance(e, ColumnRef):
        return mapping.get(e.name, e)
    if isinstance(e, Call):
        return dc_replace(e, args=tuple(_subst(a, mapping) for a in e.args))
    if isinstance(e, BinOp):
        return dc_replace(e, lhs=_subst(e.lhs, mapping), rhs=_subst(e.rhs, mapping))
    if isinstance(e, If):
        return dc_replace(
            e, cond=_subst(e.cond, mapping), then=_subst(e.then, mapping),
            else_=_subst(e.else_, mapping) if e.else_ is not None else None,
        )
    return e


def _contains_agg_or_window(e: Expr) -> bool:
    from sheetc.formula.functions import FUNCTIONS, FunctionClass

    for n in walk(e):
        if isinstance(n, Call) and n.function in FUNCTIONS \
                and FUNCTIONS[n.function].fclass is not FunctionClass.SINGLE_ROW:
            return True
    return False


def _count_shared(root) -> dict:
    from sheetc.relalg.ops import children_of

    counts: dict[int, int] = {}
    stack = [root]
    while stack:
        n = stack.pop()
        counts[id(n)] = counts.get(id(n), 0) + 1
        if counts[id(n)] == 1:
            stack.extend(children_of(n))
    return counts


def rewrite(root, options: CompilerOptions):
    node = _walk_rewrite(root, options, {})
    if options.prune_attributes:
        ctx = _PruneCtx(options, _count_shared(node))
        required = set(column_names(node)) if not isinstance(node, Sort) else None
        node = ctx.prune(node, required)
        node = _walk_rewrite(node, options, {})  # pruning can expose identities
    if options.pushdown_sort_limit:
        node = _pushdown(node)
    return node


def _walk_rewrite(node, options: CompilerOptions, memo: dict):
    # subtrees are shared between levels; rewrite each object once
    if id(node) in memo:
        return memo[id(node)]
    memo[id(node)] = node  # provisional, replaced below
    result = _walk_rewrite_inner(node, options, memo)
    memo[id(node)] = result
    return result


def _walk_rewrite_inner(node, options: CompilerOptions, memo: dict):
    if isinstance(node, (Scan, RawSQL)):
        return node
    if isinstance(node, (Join, SemiJoin)):
        node.left = _walk_rewrite(node.left, options, memo)
        node.right = _walk_rewrite(node.right, options, memo)
        return node
    node.child = _walk_rewrite(node.child, options, memo)

    if isinstance(node, Project):
        if options.merge_projects and isinstance(node.child, Project):
            inner = node.child
            node = Project(
                inner.child,
                {n: _subst(e, inner.exprs) for n, e in node.exprs.items()},
                node.columns,
            )
        if options.remove_noops and _is_identity(node):
            return node.child
        return node

    if isinstance(node, Filter):
        if options.remove_noops and isinstance(node.predicate, Literal) \
                and node.predicate.value is True:
            return node.child
        if options.merge_filters and isinstance(node.child, Filter):
            inner = node.child
            return Filter(inner.child,
                          BinOp("And", inner.predicate, node.predicate),
                          node.columns)
        # a filter over a pure projection can run below it
        if options.merge_projects and isinstance(node.child, Project):
            inner = node.child
            pred = _subst(node.predicate, inner.exprs)
            if not _contains_agg_or_window(pred):
                return Project(Filter(inner.child, pred, inner.child.columns),
                               inner.exprs, inner.columns)
        return node

    return node


def _is_identity(node: Project) -> bool:
    child_cols = column_names(node.child)
    if [n for n, _t in node.columns] != child_cols:
        return False
    return all(
        isinstance(e, ColumnRef) and e.name == n for n, e in node.exprs.items()
    )


# -- attribute pruning -----------------------------------------------------


class _PruneCtx:
    def __init__(self, options: CompilerOptions, counts: dict):
        self.options = options
        self.counts = counts
        self.memo: dict[int, object] = {}

    def prune(self, node, required):
        # a subtree referenced from several parents keeps all its columns:
        # each parent may need a different subset
        if self.counts.get(id(node), 0) > 1:
            if id(node) in self.memo:
                return self.memo[id(node)]
            result = self._prune(node, None)
            self.memo[id(node)] = result
            return result
        return self._prune(node, required)

    def _prune(self, node, required):
        return _prune_node(self, node, required, self.options)


def _prune_node(ctx: _PruneCtx, node, required, options: CompilerOptions):
    """Rebuild the tree keeping only columns in ``required`` (None = all)."""
    if isinstance(node, Sort):
        need = {n for n, _t in node.columns}
        for e, _d in node.keys:
            need |= _refs(e)
        node.child = ctx.prune(node.child, need)
        return node

    if required is None:
        required = set(column_names(node))

    if isinstance(node, Scan):
        kept = [c for c in node.columns if c[0] in required] or node.columns[:1]
        return Scan(node.table, kept)

    if isinstance(node, RawSQL):
        return node

    if isinstance(node, Project):
        exprs = {n: e for n, e in node.exprs.items() if n in required}
        if not exprs:  # keep something to select
            n0, e0 = next(iter(node.exprs.items()))
            exprs = {n0: e0}
        need = set()
        for e in exprs.values():
            need |= _refs(e)
        child = ctx.prune(node.child, need)
        return Project(child, exprs,
                       [c for c in node.columns if c[0] in exprs])

    if isinstance(node, Filter):
        need = required | _refs(node.predicate)
        node.child = ctx.prune(node.child, need)
        node.columns = [c for c in node.columns if c[0] in required]
        return node

    if isinstance(node, Aggregate):
        exprs = {n: e for n, e in node.exprs.items()
                 if n in required or n in node.group_by}
        if not exprs:
            n0, e0 = next(iter(node.exprs.items()))
            exprs = {n0: e0}
        need = set(node.group_by)
        for e in exprs.values():
            need |= _refs(e)
        child = ctx.prune(node.child, need)
        return Aggregate(child, node.group_by, exprs,
                         [c for c in node.columns if c[0] in exprs])

    if isinstance(node, Window):
        windows = {n: w for n, w in node.windows.items() if n in required}
        need = {n for n in required if n not in node.windows}
        for w in windows.values():
            for a in w.args:
                need |= _refs(a)
            for e, _d in w.order_by:
                need |= _refs(e)
            need |= set(w.partition_by)
        if not windows:
            return ctx.prune(node.child, required)
        child = ctx.prune(node.child, need)
        keep = set(column_names(child)) | set(windows)
        return Window(child, windows,
                      [c for c in node.columns if c[0] in keep])

    if isinstance(node, Join):
        left_names = set(column_names(node.left))
        right_only = [n for n, _t in node.columns if n not in left_names]
        need_right_out = [n for n in right_only if n in required]
        if options.prune_annotated_joins and node.annotated \
                and not need_right_out:
            return ctx.prune(node.left, required)
        left_need = {n for n in required if n in left_names}
        left_need |= {l for l, _r in node.on}
        right_need = set(need_right_out) | {r for _l, r in node.on}
        node.left = ctx.prune(node.left, left_need)
        node.right = ctx.prune(node.right, right_need)
        node.columns = [c for c in node.columns
                        if c[0] in required or c[0] in {l for l, _r in node.on}]
        return node

    if isinstance(node, SemiJoin):
        left_need = required | {l for l, _r in node.on}
        node.left = ctx.prune(node.left, left_need)
        node.right = ctx.prune(node.right, {r for _l, r in node.on})
        node.columns = [c for c in node.columns if c[0] in left_need]
        return node

    return node


# -- sort-limit pushdown ---------------------------------------------------


def _pushdown(node):
    """LIMIT above a left-preserving join also limits the left leg, as long
    as every sort key comes from the left side."""
    if not isinstance(node, Sort) or node.limit is None:
        return node
    child = node.child
    if not isinstance(child, Join) or not child.annotated:
        return node
    left_names = set(column_names(child.left))
    key_refs: set = set()
    for e, _d in node.keys:
        key_refs |= _refs(e)
    if not key_refs <= left_names:
        return node
    inner_keys = list(node.keys)
    child.left = Sort(child.left, inner_keys, node.limit + node.offset, 0,
                      list(child.left.columns))
    return node
