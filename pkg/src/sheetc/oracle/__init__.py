"""Reference interpreter over nested relations, and result comparison."""

from sheetc.oracle.evaluate import evaluate_plan, evaluate_spec
from sheetc.oracle.compare import compare_tables

__all__ = ["evaluate_plan", "evaluate_spec", "compare_tables"]
