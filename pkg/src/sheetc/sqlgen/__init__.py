"""SQL text generation for the supported dialects."""

from sheetc.sqlgen.dialect import DIALECTS, Dialect, get_dialect
from sheetc.sqlgen.render import Renderer, render_sql

__all__ = ["Dialect", "DIALECTS", "get_dialect", "Renderer", "render_sql"]
