"""Dependency graph construction, cycle breaking, filters, dead code."""

from __future__ import annotations

import json

import pytest

from sheetc.calc_graph import build_graph, eliminate_dead_code
from sheetc.scalars import ScalarType
from sheetc.spec_model import (
    Catalog,
    TableDef,
    ValidationError,
    parse_spec,
    resolve_inputs,
    validate_spec,
)

N = ScalarType.NUMBER
T = ScalarType.TEXT
D = ScalarType.DATE
L = ScalarType.LOGICAL
E = ScalarType.ERROR


def catalog() -> Catalog:
    cat = Catalog()
    cat.add_table(TableDef(
        "sales",
        schema=[("Region", T), ("Amount", N), ("Day", D)],
    ))
    return cat


def base_doc(columns, **extra) -> dict:
    return {
        "inputs": [{"table": "sales"}],
        "levels": [{"keys": []}, {"keys": ["R"]}, {"keys": []}],
        "columns": {
            "R": {"formula": "[Region]", "resident_level": 0},
            **columns,
        },
        **extra,
    }


def graph_for(doc, bindings=None):
    cat = catalog()
    v = validate_spec(parse_spec(json.dumps(doc)), cat)
    return build_graph(resolve_inputs(v, cat, bindings))


class TestBuild:
    def test_dependency_order(self):
        g = graph_for(base_doc({
            "C": {"formula": "[B] + 1", "resident_level": 0},
            "B": {"formula": "[A] + 1", "resident_level": 0},
            "A": {"formula": "[Amount]", "resident_level": 0},
        }))
        order = g.order
        assert order.index("A") < order.index("B") < order.index("C")
        assert g.columns["C"].type is N
        assert not g.cycles

    def test_cycle_broken_to_error(self):
        g = graph_for(base_doc({
            "A": {"formula": "[B] + 1", "resident_level": 0},
            "B": {"formula": "[A] + 1", "resident_level": 0},
            "C": {"formula": "[A] * 2", "resident_level": 0},
        }))
        assert g.cycles == [["A", "B"]]
        assert g.columns["A"].type is E
        assert g.columns["B"].type is E
        # error floods into dependents
        assert g.columns["C"].type is E
        assert "cycle" in g.diagnostics["A"][0].message

    def test_self_reference_is_a_cycle(self):
        g = graph_for(base_doc({
            "A": {"formula": "[A] + 1", "resident_level": 0},
        }))
        assert g.cycles == [["A"]]
        assert g.columns["A"].type is E

    def test_break_is_minimal(self):
        """Columns merely depending on a cycle keep their own formula."""
        g = graph_for(base_doc({
            "A": {"formula": "[B]", "resident_level": 0},
            "B": {"formula": "[A]", "resident_level": 0},
            "Ok": {"formula": "[Amount] * 2", "resident_level": 0},
        }))
        assert g.columns["Ok"].type is N

    def test_idempotent_on_acyclic(self):
        doc = base_doc({
            "A": {"formula": "Sum([Amount])", "resident_level": 1},
        })
        g1, g2 = graph_for(doc), graph_for(doc)
        assert g1.cycles == g2.cycles == []
        assert [c.type for c in g1.columns.values()] == \
               [c.type for c in g2.columns.values()]

    def test_parameter_typed(self):
        g = graph_for(
            base_doc(
                {"Big": {"formula": "[Amount] > [cutoff]", "resident_level": 0}},
                parameters={"cutoff": {"type": "Number", "default": 10}},
            )
        )
        assert g.columns["Big"].type is L


class TestFilters:
    def test_include_list_level(self):
        g = graph_for(base_doc(
            {"Total": {"formula": "Sum([Amount])", "resident_level": 1}},
            filters=[{"kind": "include_list", "target": "R", "values": ["west"]}],
        ))
        [f] = g.filters
        assert f.level == 0
        assert f.predicate.type is L

    def test_aggregate_threshold_filter_runs_at_group_level(self):
        g = graph_for(base_doc(
            {"Total": {"formula": "Sum([Amount])", "resident_level": 1}},
            filters=[{"kind": "range", "target": "Total", "low": 100, "high": None}],
        ))
        [f] = g.filters
        assert f.level == 1

    def test_mixed_level_predicate_uses_lowest(self):
        g = graph_for(base_doc(
            {
                "Total": {"formula": "Sum([Amount])", "resident_level": 1},
                "Grand": {"formula": "Sum([Amount])", "resident_level": 2},
            },
            filters=[{"kind": "custom_predicate",
                      "predicate": "[Total] > [Grand] / 10"}],
        ))
        [f] = g.filters
        assert f.level == 1

    def test_totals_reference_clamped_below_totals(self):
        g = graph_for(base_doc(
            {"Grand": {"formula": "Sum([Amount])", "resident_level": 2}},
            filters=[{"kind": "range", "target": "Grand", "low": 0, "high": None}],
        ))
        [f] = g.filters
        assert f.level == 1  # the totals row itself is never filtered

    def test_payload_type_mismatch(self):
        with pytest.raises(ValidationError):
            graph_for(base_doc(
                {},
                filters=[{"kind": "include_list", "target": "Amount",
                          "values": ["not a number"]}],
            ))

    def test_date_payload_parsed(self):
        g = graph_for(base_doc(
            {},
            filters=[{"kind": "range", "target": "Day",
                      "low": "2024-01-01", "high": "2024-12-31"}],
        ))
        assert g.filters[0].predicate.type is L

    def test_top_n_synthesizes_rank(self):
        g = graph_for(base_doc(
            {"Total": {"formula": "Sum([Amount])", "resident_level": 1}},
            filters=[{"kind": "top_n", "target": "Total", "limit": 3}],
        ))
        [f] = g.filters
        assert f.level == 1
        helpers = [c for c in g.columns.values() if c.synthesized]
        assert len(helpers) == 1 and helpers[0].hidden
        assert helpers[0].level == 1

    def test_custom_predicate_must_be_logical(self):
        with pytest.raises(ValidationError):
            graph_for(base_doc(
                {},
                filters=[{"kind": "custom_predicate", "predicate": "[Amount] + 1"}],
            ))


class TestDeadCode:
    def test_unused_hidden_column_dropped(self):
        g = graph_for(base_doc({
            "Unused": {"formula": "[Amount] * 2", "resident_level": 0,
                       "hidden": True},
            "Kept": {"formula": "[Amount]", "resident_level": 0},
        }))
        g2 = eliminate_dead_code(g)
        assert "Unused" not in g2.columns
        assert "Kept" in g2.columns

    def test_hidden_dependency_of_visible_kept(self):
        g = graph_for(base_doc({
            "Helper": {"formula": "[Amount] * 2", "resident_level": 0,
                       "hidden": True},
            "Shown": {"formula": "[Helper] + 1", "resident_level": 0},
        }))
        g2 = eliminate_dead_code(g)
        assert "Helper" in g2.columns

    def test_key_and_ordering_columns_are_roots(self):
        doc = base_doc({
            "Ord": {"formula": "[Amount]", "resident_level": 0, "hidden": True},
        })
        doc["columns"]["R"]["hidden"] = True  # still a level key
        doc["levels"][0]["ordering"] = [["Ord", "desc"]]
        g2 = eliminate_dead_code(graph_for(doc))
        assert "R" in g2.columns and "Ord" in g2.columns

    def test_filter_target_kept_even_if_hidden(self):
        g = graph_for(base_doc(
            {"H": {"formula": "[Amount]", "resident_level": 0, "hidden": True}},
            filters=[{"kind": "range", "target": "H", "low": 0, "high": None}],
        ))
        g2 = eliminate_dead_code(g)
        assert "H" in g2.columns

    def test_idempotent(self):
        g = graph_for(base_doc({
            "Unused": {"formula": "1", "resident_level": 0, "hidden": True},
        }))
        g2 = eliminate_dead_code(g)
        g3 = eliminate_dead_code(g2)
        assert list(g2.columns) == list(g3.columns)
