"""Worksheet-to-SQL compiler and interactive analysis engine.

A worksheet is a declarative document of grouping levels, spreadsheet-like
column formulas, filters and composable inputs. The compiler turns it into
a single SQL statement via a calculation graph, a nested-relation worksheet
algebra, and a relational operator tree. An independent nested-relation
interpreter acts as the ground truth for differential testing.
"""

from sheetc.scalars import ScalarType

__all__ = ["ScalarType"]
__version__ = "0.1.0"
