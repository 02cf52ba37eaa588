"""Compilation errors surfaced to callers."""

from __future__ import annotations


class UnsupportedQuery(Exception):
    """The worksheet is valid but asks for a shape the compiler cannot
    express as a single flat query (exit code 2 on the command line)."""
