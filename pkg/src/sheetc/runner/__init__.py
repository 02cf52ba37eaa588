"""Operational shell: result caching, command line, HTTP service, and
random worksheet generation for differential testing."""

from __future__ import annotations

from sheetc.runner.cache import ResultCache, cache_key
from sheetc.runner.explain import explain

__all__ = ["ResultCache", "cache_key", "explain"]
