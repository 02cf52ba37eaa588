"""Result cache keyed by a structural worksheet digest.

Renaming a column or reordering the columns dictionary changes neither
the compiled query's data nor its groups, so the cache key is computed
after renaming every column to a positional placeholder chosen from a
structure-only canonical order. Cached tables are stored under the
placeholder names; a hit maps the stored columns back to the caller's
own names and order.
"""

from __future__ import annotations

import datetime
import hashlib
import json
from collections import OrderedDict
from typing import Optional

from sheetc.engine import Table
from sheetc.formula import parse_formula
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
from sheetc.options import Page
from sheetc.spec_model import WorksheetSpec
from sheetc.walg import multi_flag_name

_ERASED = "\x00"


def _digest(payload) -> str:
    text = json.dumps(payload, sort_keys=True, default=str)
    return hashlib.sha256(text.encode()).hexdigest()


def _shape(e: Expr, own: str, digests: dict):
    """Structural serialization with column names replaced by their
    current refinement digest (or erased entirely on the first round)."""
    if isinstance(e, ColumnRef):
        if e.name == own:
            # a self-reference names the input attribute shadowed by this
            # column, which is external identity — keep it literal
            return ["attr", e.name]
        if e.name in digests:
            return ["col", digests[e.name]]
        return ["ref", e.name]
    if isinstance(e, ParameterRef):
        return ["param", e.name]
    if isinstance(e, LinkRef):
        return ["link", list(e.path), e.attribute]
    if isinstance(e, Literal):
        hint = e.type_hint.value if e.type_hint is not None else ""
        return ["lit", repr(e.value), hint]
    if isinstance(e, Call):
        return ["call", e.function,
                [_shape(a, own, digests) for a in e.args]]
    if isinstance(e, BinOp):
        return ["bin", e.op, _shape(e.lhs, own, digests),
                _shape(e.rhs, own, digests)]
    if isinstance(e, If):
        out = ["if", _shape(e.cond, own, digests), _shape(e.then, own, digests)]
        if e.else_ is not None:
            out.append(_shape(e.else_, own, digests))
        return out
    raise TypeError(f"not an expression: {e!r}")


def _roles(spec: WorksheetSpec) -> dict:
    """Name-independent structural roles each column plays outside its
    own formula: grouping key, ordering entry, filter target."""
    roles: dict[str, list] = {name: [] for name in spec.columns}
    for i, level in enumerate(spec.levels):
        for k in level.keys:
            if k in roles:
                roles[k].append(["key", i])
        for pos, (c, d) in enumerate(level.ordering):
            if c in roles:
                roles[c].append(["ord", i, pos, d])
    for f in spec.filters:
        if f.target in roles:
            doc = f.to_json()
            doc.pop("target", None)
            roles[f.target].append(["filter", doc])
    return roles


def _column_order(spec: WorksheetSpec) -> list:
    """Canonical column order by iterated structural refinement."""
    asts = {n: parse_formula(c.formula) for n, c in spec.columns.items()}
    roles = _roles(spec)
    digests = {n: _ERASED for n in spec.columns}
    for _round in range(max(1, len(spec.columns))):
        nxt = {}
        for n, col in spec.columns.items():
            nxt[n] = _digest([
                col.resident_level, col.hidden, roles[n],
                _shape(asts[n], n, digests),
            ])
        if nxt == digests:
            break
        digests = nxt
    indexed = list(spec.columns)
    return sorted(indexed, key=lambda n: (digests[n], indexed.index(n)))


def _rename_expr(e: Expr, own: str, mapping: dict) -> Expr:
    from dataclasses import replace

    if isinstance(e, ColumnRef):
        if e.name != own and e.name in mapping:
            return ColumnRef(mapping[e.name])
        return e
    if isinstance(e, Call):
        return replace(e, args=tuple(_rename_expr(a, own, mapping)
                                     for a in e.args))
    if isinstance(e, BinOp):
        return replace(e, lhs=_rename_expr(e.lhs, own, mapping),
                       rhs=_rename_expr(e.rhs, own, mapping))
    if isinstance(e, If):
        return replace(
            e, cond=_rename_expr(e.cond, own, mapping),
            then=_rename_expr(e.then, own, mapping),
            else_=(_rename_expr(e.else_, own, mapping)
                   if e.else_ is not None else None),
        )
    return e


def normalize_spec(spec: WorksheetSpec) -> tuple:
    """Return (canonical document, column name -> placeholder name)."""
    order = _column_order(spec)
    placeholder = {n: f"c{i}" for i, n in enumerate(order)}

    columns = []
    for n in order:
        col = spec.columns[n]
        renamed = _rename_expr(parse_formula(col.formula), n, placeholder)
        columns.append([placeholder[n], {
            "formula": to_text(renamed),
            "resident_level": col.resident_level,
            "hidden": col.hidden,
        }])

    levels = []
    for level in spec.levels:
        levels.append({
            "keys": sorted(placeholder.get(k, k) for k in level.keys),
            "ordering": [[placeholder.get(c, c), d]
                         for c, d in level.ordering],
            "collapsed": level.collapsed,
        })

    filters = []
    for f in spec.filters:
        doc = f.to_json()
        if f.target is not None:
            doc["target"] = placeholder.get(f.target, f.target)
        if f.predicate is not None:
            renamed = _rename_expr(parse_formula(f.predicate), _ERASED,
                                   placeholder)
            doc["predicate"] = to_text(renamed)
        filters.append(doc)
    filters.sort(key=lambda d: json.dumps(d, sort_keys=True, default=str))

    doc = {
        "inputs": [i.to_json() for i in spec.inputs],
        "joins": [j.to_json() for j in spec.joins],
        "levels": levels,
        "columns": columns,
        "filters": filters,
        "parameters": {n: p.to_json() for n, p in spec.parameters.items()},
        "page": spec.page.to_json() if spec.page else None,
    }
    return doc, placeholder


def _jsonable(v):
    if isinstance(v, datetime.date):
        return v.isoformat()
    return v


def cache_key(spec: WorksheetSpec, bindings: Optional[dict] = None,
              dialect: str = "ansi",
              page: Optional[Page] = None) -> tuple:
    """Return (digest, column name -> placeholder name)."""
    doc, placeholder = normalize_spec(spec)
    payload = {
        "spec": doc,
        "bindings": {k: _jsonable(v) for k, v in (bindings or {}).items()},
        "dialect": dialect,
        "page": [page.limit, page.offset] if page is not None else None,
    }
    return _digest(payload), placeholder


def _canonical_name(name: str, placeholder: dict) -> str:
    if name in placeholder:
        return placeholder[name]
    for col, slot in placeholder.items():
        if name == multi_flag_name(col):
            return multi_flag_name(slot)
    return name


def store_form(table: Table, placeholder: dict) -> Table:
    """Rename columns to placeholders and sort them for storage."""
    named = [(_canonical_name(n, placeholder), t, i)
             for i, (n, t) in enumerate(table.columns)]
    named.sort()
    columns = [(n, t) for n, t, _i in named]
    picks = [i for _n, _t, i in named]
    rows = [tuple(row[i] for i in picks) for row in table.rows]
    return Table(columns, rows)


def restore(stored: Table, columns: list, placeholder: dict) -> Table:
    """Rebuild a table with the caller's column names and order."""
    index = {n: i for i, (n, _t) in enumerate(stored.columns)}
    picks = [index[_canonical_name(n, placeholder)] for n, _t in columns]
    rows = [tuple(row[i] for i in picks) for row in stored.rows]
    return Table(list(columns), rows)


class ResultCache:
    """Bounded LRU of canonical result tables."""

    def __init__(self, capacity: int = 256):
        self.capacity = capacity
        self._entries: OrderedDict[str, Table] = OrderedDict()

    def __len__(self) -> int:
        return len(self._entries)

    def get(self, key: str) -> Optional[Table]:
        table = self._entries.get(key)
        if table is not None:
            self._entries.move_to_end(key)
        return table

    def put(self, key: str, table: Table) -> None:
        self._entries[key] = table
        self._entries.move_to_end(key)
        while len(self._entries) > self.capacity:
            self._entries.popitem(last=False)
