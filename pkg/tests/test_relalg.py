"""Relational lowering and rewrites: each optimization toggled off
individually must leave results unchanged, and the structural guarantees
of the merged plans hold."""

from __future__ import annotations

import dataclasses

import pytest

from sheetc.compiler import compile_spec
from sheetc.engine import run_compiled
from sheetc.options import CompilerOptions
from sheetc.oracle import compare_tables, evaluate_spec
from sheetc.relalg.ops import Aggregate, Join, children_of

from fixture_corpus import load_catalog, spec_name, spec_paths

SPECS = spec_paths()

REWRITE_FLAGS = [
    "remove_noops",
    "merge_projects",
    "merge_filters",
    "prune_attributes",
    "prune_annotated_joins",
    "pushdown_sort_limit",
    "merge_joins",
    "elide_semijoins",
    "eliminate_dead_columns",
]


@pytest.fixture(scope="module")
def catalog():
    return load_catalog()


@pytest.mark.parametrize("flag", REWRITE_FLAGS)
@pytest.mark.parametrize("path", SPECS, ids=[spec_name(p) for p in SPECS])
def test_each_rewrite_is_sound(path, flag, catalog):
    text = path.read_text()
    options = dataclasses.replace(CompilerOptions(), **{flag: False})
    compiled = compile_spec(text, catalog, options=options)
    actual = run_compiled(compiled, catalog)
    expected = evaluate_spec(text, catalog)
    ok, message = compare_tables(actual, expected)
    assert ok, f"{spec_name(path)} without {flag}: {message}"


def aggregate_joins(root) -> list:
    """Joins whose right side computes grouped aggregates."""
    found, seen, stack = [], set(), [root]
    while stack:
        node = stack.pop()
        if id(node) in seen:
            continue
        seen.add(id(node))
        if isinstance(node, Join) and isinstance(node.right, Aggregate):
            found.append(node)
        stack.extend(children_of(node))
    return found


def test_min_and_max_share_one_aggregation(catalog):
    # two aggregates over the same rows at the same level collapse into a
    # single grouped subquery joined once
    text = (SPECS[0].parent / "places_minmax.wks.json").read_text()
    compiled = compile_spec(text, catalog)
    joins = aggregate_joins(compiled.rel_root)
    assert len(joins) == 1
    agg = joins[0].right
    assert {"Smallest", "Largest"} <= set(agg.exprs)


def test_unmerged_plan_keeps_separate_aggregations(catalog):
    text = (SPECS[0].parent / "places_minmax.wks.json").read_text()
    options = dataclasses.replace(CompilerOptions(), merge_joins=False)
    compiled = compile_spec(text, catalog, options=options)
    assert len(aggregate_joins(compiled.rel_root)) == 2


def test_rendering_is_deterministic(catalog):
    text = (SPECS[0].parent / "tpch_q11.wks.json").read_text()
    first = compile_spec(text, catalog).sql
    second = compile_spec(text, catalog).sql
    assert first == second
