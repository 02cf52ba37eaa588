"""Scalar type system and runtime value semantics.

The semantics here are SQL's, not spreadsheet semantics: NULL propagates
through operators (three-valued logic for comparisons and booleans), dates
are naive calendar dates, and text compares byte-wise. The same table of
operations backs compile-time constant folding and the nested-relation
interpreter, so both agree with the SQL the compiler emits.
"""

from __future__ import annotations

import datetime
import enum
import math
import re
from decimal import ROUND_HALF_UP, Decimal


class ScalarType(enum.Enum):
    LOGICAL = "Logical"
    NUMBER = "Number"
    TEXT = "Text"
    DATE = "Date"
    # Error absorbs: any operation with an Error operand yields Error.
    ERROR = "Error"

    def __repr__(self) -> str:  # keep dumps compact
        return self.value


_TYPE_BY_NAME = {t.value: t for t in ScalarType}


def type_from_name(name: str) -> ScalarType:
    try:
        return _TYPE_BY_NAME[name]
    except KeyError:
        raise ValueError(f"unknown scalar type {name!r}") from None


# Runtime values: None (null), bool, int/float, str, datetime.date.


def is_null(v) -> bool:
    return v is None


def parse_date(text: str) -> datetime.date:
    return datetime.date.fromisoformat(text)


def coerce_value(v, t: ScalarType):
    """Coerce a raw (wire/engine) value into the canonical runtime value."""
    if v is None:
        return None
    if t is ScalarType.LOGICAL:
        return bool(v)
    if t is ScalarType.NUMBER:
        return v if isinstance(v, (int, float)) else float(v)
    if t is ScalarType.TEXT:
        return str(v)
    if t is ScalarType.DATE:
        if isinstance(v, datetime.date):
            return v
        return parse_date(str(v))
    return None  # Error-typed values carry no data


def to_wire(v):
    """JSON/engine-facing representation (dates as ISO strings)."""
    if isinstance(v, datetime.date):
        return v.isoformat()
    return v


def num_add(a, b):
    if a is None or b is None:
        return None
    return a + b


def num_sub(a, b):
    if a is None or b is None:
        return None
    return a - b


def num_mul(a, b):
    if a is None or b is None:
        return None
    return a * b


def num_div(a, b):
    # True division; divide-by-zero yields NULL (matching the local engine).
    if a is None or b is None or b == 0:
        return None
    return a / b


def num_neg(a):
    return None if a is None else -a


def _cmp_key(v):
    if isinstance(v, bool):
        return int(v)
    return v


def compare(a, b) -> int | None:
    """Three-valued comparison: None when either side is null."""
    if a is None or b is None:
        return None
    a, b = _cmp_key(a), _cmp_key(b)
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


def cmp_eq(a, b):
    c = compare(a, b)
    return None if c is None else c == 0


def cmp_ne(a, b):
    c = compare(a, b)
    return None if c is None else c != 0


def cmp_lt(a, b):
    c = compare(a, b)
    return None if c is None else c < 0


def cmp_le(a, b):
    c = compare(a, b)
    return None if c is None else c <= 0


def cmp_gt(a, b):
    c = compare(a, b)
    return None if c is None else c > 0


def cmp_ge(a, b):
    c = compare(a, b)
    return None if c is None else c >= 0


def logical_and(a, b):
    if a is False or b is False:
        return False
    if a is None or b is None:
        return None
    return True


def logical_or(a, b):
    if a is True or b is True:
        return True
    if a is None or b is None:
        return None
    return False


def logical_not(a):
    return None if a is None else not a


def round_half_away(x, digits=0):
    """Round half away from zero, matching the engine's ROUND()."""
    if x is None:
        return None
    if digits is None:
        digits = 0
    q = Decimal(1).scaleb(-int(digits))
    d = Decimal(repr(float(x))).quantize(q, rounding=ROUND_HALF_UP)
    return float(d)


def date_trunc(unit, d):
    if unit is None or d is None:
        return None
    unit = unit.lower()
    if unit == "year":
        return datetime.date(d.year, 1, 1)
    if unit == "quarter":
        return datetime.date(d.year, d.month - (d.month - 1) % 3, 1)
    if unit == "month":
        return datetime.date(d.year, d.month, 1)
    if unit == "week":
        # Weeks start on Monday.
        return d - datetime.timedelta(days=d.weekday())
    if unit == "day":
        return d
    return None


def date_diff(unit, start, end):
    """Count unit boundaries crossed between start and end."""
    if unit is None or start is None or end is None:
        return None
    unit = unit.lower()
    if unit in ("month", "months"):
        return (end.year - start.year) * 12 + (end.month - start.month)
    if unit in ("year", "years"):
        return end.year - start.year
    if unit in ("quarter", "quarters"):
        qs = (start.month - 1) // 3
        qe = (end.month - 1) // 3
        return (end.year - start.year) * 4 + (qe - qs)
    if unit in ("day", "days"):
        return (end - start).days
    if unit in ("week", "weeks"):
        return (date_trunc("week", end) - date_trunc("week", start)).days // 7
    return None


def like_match(value, pattern):
    """SQL LIKE with % and _, ASCII case-insensitive (engine-compatible)."""
    if value is None or pattern is None:
        return None
    rx = ""
    for ch in pattern:
        if ch == "%":
            rx += ".*"
        elif ch == "_":
            rx += "."
        else:
            rx += re.escape(ch)
    return re.fullmatch(rx, value, re.IGNORECASE | re.DOTALL) is not None


def numbers_close(a, b, rel_tol=1e-9) -> bool:
    if a is None or b is None:
        return a is None and b is None
    return math.isclose(float(a), float(b), rel_tol=rel_tol, abs_tol=1e-12)
