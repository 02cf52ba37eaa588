"""Result comparison: compiled-query output against the interpreter's.

Rows are compared after a canonical sort so that only content matters;
numbers match within a relative tolerance, everything else exactly.
"""

from __future__ import annotations

from sheetc.engine import Table
from sheetc.scalars import ScalarType, _cmp_key, numbers_close


def _row_key(row: tuple) -> tuple:
    return tuple(
        (v is not None, _cmp_key(v) if v is not None else 0) for v in row
    )


def _cells_match(a, b, t: ScalarType, rel_tol: float) -> bool:
    if a is None or b is None:
        return a is None and b is None
    if t is ScalarType.NUMBER:
        return numbers_close(a, b, rel_tol)
    return _cmp_key(a) == _cmp_key(b)


def compare_tables(actual: Table, expected: Table,
                   rel_tol: float = 1e-9) -> tuple:
    """Return (ok, message). ``expected`` supplies the column types."""
    if actual.column_names != expected.column_names:
        return False, (
            f"column mismatch: {actual.column_names} != "
            f"{expected.column_names}"
        )
    if len(actual.rows) != len(expected.rows):
        return False, (
            f"row count mismatch: {len(actual.rows)} != {len(expected.rows)}"
        )
    got = sorted(actual.rows, key=_row_key)
    want = sorted(expected.rows, key=_row_key)
    types = [t for _n, t in expected.columns]
    for i, (ra, rb) in enumerate(zip(got, want)):
        for (name, _t), t, va, vb in zip(expected.columns, types, ra, rb):
            if not _cells_match(va, vb, t, rel_tol):
                return False, (
                    f"row {i}, column {name!r}: {va!r} != {vb!r}"
                )
    return True, "ok"
