"""End-to-end compilation facade.

``compile_spec`` takes a worksheet document through parsing, validation,
resolution, the dependency graph, operator decomposition, relational
lowering, rewriting, and SQL rendering, returning the artifacts of every
stage for inspection.
"""

from __future__ import annotations

import datetime
from dataclasses import dataclass, field
from typing import Optional, Union

from sheetc.calc_graph import CalcGraph, build_graph, eliminate_dead_code
from sheetc.options import CompilerOptions, Page
from sheetc.relalg.lower import lower_plan
from sheetc.relalg.rewrite import rewrite
from sheetc.scalars import ScalarType
from sheetc.spec_model import (
    Catalog,
    ResolvedSpec,
    WorksheetSpec,
    parse_spec,
    resolve_inputs,
    validate_spec,
)
from sheetc.sqlgen.dialect import get_dialect
from sheetc.sqlgen.render import render_sql
from sheetc.walg import WalgPlan, build_plan, optimize_walg


@dataclass
class CompiledQuery:
    sql: str
    columns: list  # [(name, ScalarType)] of the flat output
    dialect: str
    graph: CalcGraph
    walg_plan: WalgPlan
    rel_root: object
    multi_flags: dict = field(default_factory=dict)

    @property
    def diagnostics(self) -> dict:
        return self.graph.diagnostics


def compile_spec(spec: Union[str, WorksheetSpec], catalog: Catalog,
                 bindings: Optional[dict] = None,
                 dialect: str = "ansi",
                 options: Optional[CompilerOptions] = None,
                 page: Optional[Page] = None) -> CompiledQuery:
    if isinstance(spec, str):
        spec = parse_spec(spec)
    options = options or CompilerOptions()
    validated = validate_spec(spec, catalog)
    resolved = resolve_inputs(validated, catalog, bindings)
    return compile_resolved(resolved, dialect, options, page)


def compile_resolved(resolved: ResolvedSpec, dialect: str = "ansi",
                     options: Optional[CompilerOptions] = None,
                     page: Optional[Page] = None) -> CompiledQuery:
    options = options or CompilerOptions()
    graph = build_graph(resolved)
    if options.eliminate_dead_columns:
        graph = eliminate_dead_code(graph)
    plan = build_plan(graph, merge_joins=options.merge_joins)
    if options.elide_semijoins:
        plan = optimize_walg(plan)
    lowered = lower_plan(plan, options, page)
    root = rewrite(lowered.root, options)
    d = get_dialect(dialect)
    sql = render_sql(root, d, use_ctes=options.use_ctes)
    return CompiledQuery(
        sql=sql,
        columns=lowered.columns,
        dialect=dialect,
        graph=graph,
        walg_plan=plan,
        rel_root=root,
        multi_flags=dict(plan.multi_flags),
    )


def _dummy_binding(t: ScalarType):
    if t is ScalarType.NUMBER:
        return 0
    if t is ScalarType.TEXT:
        return ""
    if t is ScalarType.LOGICAL:
        return False
    return datetime.date(1970, 1, 1)


def output_schema_of(spec: WorksheetSpec, catalog: Catalog,
                     _stack: tuple = ()) -> list:
    """Flat output schema of a worksheet, for composition."""
    validated = validate_spec(spec, catalog)
    bindings = {
        name: _dummy_binding(p.type)
        for name, p in spec.parameters.items()
        if p.default is None
    }
    resolved = resolve_inputs(validated, catalog, bindings, _stack)
    graph = eliminate_dead_code(build_graph(resolved))
    plan = build_plan(graph)
    lowered = lower_plan(plan, CompilerOptions())
    return lowered.columns
