"""Data-driven function catalog shared by the typechecker, the constant
folder, the interpreter and SQL generation.

Adding a function means adding one FunctionSig here plus a rendering entry
in the dialect tables.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

from sheetc import scalars
from sheetc.scalars import ScalarType

N = ScalarType.NUMBER
T = ScalarType.TEXT
L = ScalarType.LOGICAL
D = ScalarType.DATE

ANY = "any"  # any non-error type; result "same" refers to it


class FunctionClass(enum.Enum):
    SINGLE_ROW = "single_row"
    AGGREGATE = "aggregate"
    WINDOW = "window"


@dataclass(frozen=True)
class FunctionSig:
    name: str
    fclass: FunctionClass
    # One entry per parameter; a trailing entry may be marked optional via
    # min_arity. Entries are a ScalarType or ANY.
    params: tuple
    result: object  # ScalarType, or "same" (type of the first ANY argument)
    min_arity: Optional[int] = None
    # single-row evaluation (constant folding / interpreter)
    eval_fn: Optional[Callable] = None
    # aggregate evaluation over a list of rows' argument values
    agg_fn: Optional[Callable[[list], object]] = None
    # aggregate collapsed onto a single input row (aggregate used where no
    # lower-level rows exist: treated as an aggregation with one input row)
    single_row_agg: Optional[Callable] = None

    @property
    def arity_range(self) -> tuple[int, int]:
        lo = self.min_arity if self.min_arity is not None else len(self.params)
        return lo, len(self.params)


def _agg_sum(values):
    vs = [v for v in values if v is not None]
    return sum(vs) if vs else None


def _agg_avg(values):
    vs = [v for v in values if v is not None]
    return sum(vs) / len(vs) if vs else None


def _agg_min(values):
    vs = [scalars._cmp_key(v) for v in values if v is not None]
    return min(vs) if vs else None


def _agg_max(values):
    vs = [scalars._cmp_key(v) for v in values if v is not None]
    return max(vs) if vs else None


def _agg_count(values):
    return sum(1 for v in values if v is not None)


def _agg_count_if(values):
    return sum(1 for v in values if v is True)


def _agg_count_distinct(values):
    return len({v for v in values if v is not None})


_SIGS = [
    # single row
    FunctionSig("Neg", FunctionClass.SINGLE_ROW, (N,), N, eval_fn=scalars.num_neg),
    FunctionSig("Not", FunctionClass.SINGLE_ROW, (L,), L, eval_fn=scalars.logical_not),
    FunctionSig("Round", FunctionClass.SINGLE_ROW, (N, N), N, min_arity=1,
                eval_fn=scalars.round_half_away),
    FunctionSig("Date", FunctionClass.SINGLE_ROW, (T,), D,
                eval_fn=lambda s: None if s is None else scalars.parse_date(s)),
    FunctionSig("DateTrunc", FunctionClass.SINGLE_ROW, (T, D), D,
                eval_fn=scalars.date_trunc),
    FunctionSig("DateDiff", FunctionClass.SINGLE_ROW, (T, D, D), N,
                eval_fn=scalars.date_diff),
    FunctionSig("Like", FunctionClass.SINGLE_ROW, (T, T), L,
                eval_fn=scalars.like_match),
    # aggregates
    FunctionSig("Sum", FunctionClass.AGGREGATE, (N,), N,
                agg_fn=_agg_sum, single_row_agg=lambda x: x),
    FunctionSig("Avg", FunctionClass.AGGREGATE, (N,), N,
                agg_fn=_agg_avg, single_row_agg=lambda x: x),
    FunctionSig("Min", FunctionClass.AGGREGATE, (ANY,), "same",
                agg_fn=_agg_min, single_row_agg=lambda x: x),
    FunctionSig("Max", FunctionClass.AGGREGATE, (ANY,), "same",
                agg_fn=_agg_max, single_row_agg=lambda x: x),
    FunctionSig("Count", FunctionClass.AGGREGATE, (ANY,), N, min_arity=0,
                agg_fn=_agg_count,
                single_row_agg=lambda x=True: 0 if x is None else 1),
    FunctionSig("CountIf", FunctionClass.AGGREGATE, (L,), N,
                agg_fn=_agg_count_if,
                single_row_agg=lambda x: 1 if x is True else 0),
    FunctionSig("CountDistinct", FunctionClass.AGGREGATE, (ANY,), N,
                agg_fn=_agg_count_distinct,
                single_row_agg=lambda x: 0 if x is None else 1),
    # windows (partition/order come from the level hierarchy)
    FunctionSig("Lag", FunctionClass.WINDOW, (ANY,), "same"),
    FunctionSig("FillDown", FunctionClass.WINDOW, (ANY,), "same"),
    FunctionSig("CumulativeSum", FunctionClass.WINDOW, (N,), N),
    FunctionSig("MovingAverage", FunctionClass.WINDOW, (N, N), N),
    FunctionSig("Rank", FunctionClass.WINDOW, (), N),
]

FUNCTIONS: dict[str, FunctionSig] = {sig.name: sig for sig in _SIGS}


_BINOP_EVAL = {
    "+": scalars.num_add,
    "-": scalars.num_sub,
    "*": scalars.num_mul,
    "/": scalars.num_div,
    "=": scalars.cmp_eq,
    "<>": scalars.cmp_ne,
    "<": scalars.cmp_lt,
    "<=": scalars.cmp_le,
    ">": scalars.cmp_gt,
    ">=": scalars.cmp_ge,
    "And": scalars.logical_and,
    "Or": scalars.logical_or,
}


def eval_binop(op: str, a, b):
    return _BINOP_EVAL[op](a, b)


def binop_types(op: str, lt: ScalarType, rt: ScalarType) -> Optional[ScalarType]:
    """Result type for a binary operator, or None on a type mismatch."""
    if op in ("+", "-", "*", "/"):
        return N if (lt is N and rt is N) else None
    if op in ("And", "Or"):
        return L if (lt is L and rt is L) else None
    # comparisons: both sides same comparable type
    return L if lt is rt else None


def check_arg_types(sig: FunctionSig, arg_types: Sequence[ScalarType]):
    """Return (result_type, mismatch_index) — mismatch_index None if ok."""
    lo, hi = sig.arity_range
    if not (lo <= len(arg_types) <= hi):
        return None, -1
    same: Optional[ScalarType] = None
    for i, (p, t) in enumerate(zip(sig.params, arg_types)):
        if p == ANY:
            if same is None:
                same = t
            elif same is not t:
                return None, i
        elif t is not p:
            return None, i
    if sig.result == "same":
        return same if same is not None else ScalarType.ERROR, None
    return sig.result, None
