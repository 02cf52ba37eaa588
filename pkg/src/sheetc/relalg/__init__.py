"""Relational algebra: tree nodes, lowering, and rewrites."""

from sheetc.relalg.lower import LoweredPlan, lower_plan, lower_resolved
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
    WindowDef,
)
from sheetc.relalg.rewrite import rewrite

__all__ = [
    "Scan", "RawSQL", "Project", "Filter", "Aggregate", "Join", "SemiJoin",
    "Window", "WindowDef", "Sort",
    "lower_plan", "lower_resolved", "LoweredPlan", "rewrite",
]
