"""Nested-relation data model for the reference interpreter.

Rows carry a parent pointer to their enclosing group one level up, so
grouping for any higher level is just following the chain — no key
plumbing, which keeps this implementation independent of the SQL
lowering's join machinery.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Optional

from sheetc.scalars import _cmp_key


@dataclass
class Row:
    cells: dict
    parent: Optional["Row"] = None
    level: int = 0


def ancestor(row: Row, target_level: int) -> Row:
    r = row
    while r.level < target_level:
        if r.parent is None:
            raise LookupError(f"no ancestor at level {target_level}")
        r = r.parent
    return r


def group_rows(rows: list, keys: list, level: int) -> list:
    """Partition rows by key cells; one group row per distinct key tuple,
    in first-appearance order. Nulls group together."""
    groups: dict[tuple, Row] = {}
    for row in rows:
        k = tuple(_hashable(row.cells[key]) for key in keys)
        g = groups.get(k)
        if g is None:
            g = Row({key: row.cells[key] for key in keys}, level=level)
            groups[k] = g
        row.parent = g
    return list(groups.values())


def _hashable(v):
    if isinstance(v, bool):
        return ("b", int(v))
    return v


def sort_rows(rows: list, key_fns: list) -> list:
    """Stable sort by (value function, direction) pairs with the engine's
    null placement: nulls first ascending, last descending."""

    def cmp(a: Row, b: Row) -> int:
        for fn, direction in key_fns:
            va, vb = fn(a), fn(b)
            if va is None and vb is None:
                continue
            lt = -1 if direction == "asc" else 1
            if va is None:
                return lt
            if vb is None:
                return -lt
            ka, kb = _cmp_key(va), _cmp_key(vb)
            if ka < kb:
                return lt
            if ka > kb:
                return -lt
        return 0

    return sorted(rows, key=functools.cmp_to_key(cmp))


def order_values_equal(a: Row, b: Row, key_fns: list) -> bool:
    for fn, _d in key_fns:
        va, vb = fn(a), fn(b)
        if va is None and vb is None:
            continue
        if va is None or vb is None:
            return False
        if _cmp_key(va) != _cmp_key(vb):
            return False
    return True
