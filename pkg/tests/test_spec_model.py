"""Worksheet document parsing, validation, and resolution."""

from __future__ import annotations

import json

import pytest

from sheetc.scalars import ScalarType
from sheetc.spec_model import (
    Catalog,
    MissingBinding,
    SchemaError,
    SpecSyntaxError,
    TableDef,
    UnknownReference,
    ValidationError,
    parse_spec,
    resolve_inputs,
    serialize,
    validate_spec,
)

N = ScalarType.NUMBER
T = ScalarType.TEXT
D = ScalarType.DATE
L = ScalarType.LOGICAL


def make_catalog() -> Catalog:
    cat = Catalog()
    cat.add_table(TableDef(
        "places",
        schema=[("State", T), ("County", T), ("City", T), ("Population", N)],
    ))
    cat.add_table(TableDef(
        "planes",
        schema=[("TailNum", T), ("Model", T), ("Year", N)],
        unique_keys=[["TailNum"]],
    ))
    cat.add_table(TableDef(
        "flights",
        schema=[("FlightId", N), ("Tail", T), ("Dep", D), ("Delay", N)],
        unique_keys=[["FlightId"]],
    ))
    return cat


def places_doc() -> dict:
    return {
        "inputs": [{"table": "places"}],
        "joins": [],
        "levels": [
            {"keys": []},
            {"keys": ["City Name"]},
            {"keys": ["County Name"]},
            {"keys": ["State Name"]},
            {"keys": []},
        ],
        "columns": {
            "State Name": {"formula": "[State]", "resident_level": 0},
            "County Name": {"formula": "[County]", "resident_level": 0},
            "City Name": {"formula": "[City]", "resident_level": 0},
            "Pop": {"formula": "Sum([Population])", "resident_level": 1},
        },
    }


class TestParse:
    def test_bad_json(self):
        with pytest.raises(SpecSyntaxError):
            parse_spec("{nope")

    def test_unknown_field_named(self):
        doc = places_doc()
        doc["extra"] = 1
        with pytest.raises(SchemaError) as exc:
            parse_spec(json.dumps(doc))
        assert "extra" in str(exc.value)

    def test_unknown_column_field_named(self):
        doc = places_doc()
        doc["columns"]["Pop"]["colour"] = "red"
        with pytest.raises(SchemaError) as exc:
            parse_spec(json.dumps(doc))
        assert "colour" in str(exc.value)

    def test_missing_inputs(self):
        with pytest.raises(SchemaError) as exc:
            parse_spec(json.dumps({"levels": [], "columns": {}}))
        assert "inputs" in str(exc.value)

    def test_roundtrip(self):
        spec = parse_spec(json.dumps(places_doc()))
        assert parse_spec(serialize(spec)) == spec

    def test_roundtrip_rich(self):
        doc = places_doc()
        doc["filters"] = [
            {"kind": "include_list", "target": "State Name", "values": ["CA"]},
            {"kind": "range", "target": "Pop", "low": 0, "high": 100},
            {"kind": "text_match", "target": "City Name", "pattern": "San%"},
            {"kind": "top_n", "target": "Pop", "limit": 5},
            {"kind": "custom_predicate", "predicate": "[Pop] > 10"},
        ]
        doc["parameters"] = {"cutoff": {"type": "Number", "default": 3}}
        doc["page"] = {"limit": 100, "offset": 10}
        spec = parse_spec(json.dumps(doc))
        assert parse_spec(serialize(spec)) == spec


class TestValidate:
    def _validate(self, doc):
        return validate_spec(parse_spec(json.dumps(doc)), make_catalog())

    def test_ok(self):
        v = self._validate(places_doc())
        assert v.n_levels == 5

    def test_cumulative_keys_are_monotone(self):
        v = self._validate(places_doc())
        assert v.cumulative_keys[0] == ()
        assert set(v.cumulative_keys[3]) == {"State Name"}
        assert set(v.cumulative_keys[2]) == {"State Name", "County Name"}
        assert set(v.cumulative_keys[1]) == {"State Name", "County Name", "City Name"}
        assert v.cumulative_keys[4] == ()
        for i in range(v.n_levels - 1):
            assert set(v.cumulative_keys[i + 1]) <= set(v.cumulative_keys[i]) \
                or i == 0

    def test_group_keys(self):
        v = self._validate(places_doc())
        # all keys are resident at the base, so every level groups by its
        # full cumulative keyset
        assert set(v.group_keys[1]) == {"State Name", "County Name", "City Name"}
        assert v.group_keys[4] == ()

    def test_base_with_keys_rejected(self):
        doc = places_doc()
        doc["levels"][0]["keys"] = ["State Name"]
        with pytest.raises(ValidationError):
            self._validate(doc)

    def test_totals_with_keys_rejected(self):
        doc = places_doc()
        doc["levels"][-1]["keys"] = ["State Name"]
        with pytest.raises(ValidationError):
            self._validate(doc)

    def test_middle_level_needs_keys(self):
        doc = places_doc()
        doc["levels"][2]["keys"] = []
        with pytest.raises(ValidationError):
            self._validate(doc)

    def test_key_must_come_from_lower_level(self):
        doc = places_doc()
        # Pop is resident at level 1; it cannot key level 1
        doc["levels"][1]["keys"] = ["Pop"]
        with pytest.raises(ValidationError):
            self._validate(doc)

    def test_key_from_lower_computed_level_ok(self):
        doc = places_doc()
        doc["columns"]["Band"] = {"formula": 'If([Pop] > 100, "big", "small")',
                                  "resident_level": 1}
        doc["levels"][2]["keys"] = ["Band"]
        v = self._validate(doc)
        assert "Band" in v.group_keys[2]
        # Band is resident at level 1, so it is NOT available when grouping
        # level 1 itself
        assert "Band" not in v.group_keys[1]

    def test_dangling_key(self):
        doc = places_doc()
        doc["levels"][1]["keys"] = ["Nope"]
        with pytest.raises(ValidationError):
            self._validate(doc)

    def test_bad_formula_reported_with_column(self):
        doc = places_doc()
        doc["columns"]["Pop"]["formula"] = "Sum("
        with pytest.raises(ValidationError) as exc:
            self._validate(doc)
        assert "Pop" in str(exc.value)

    def test_filter_unknown_target(self):
        doc = places_doc()
        doc["filters"] = [{"kind": "range", "target": "Nope", "low": 0, "high": 1}]
        with pytest.raises(ValidationError):
            self._validate(doc)

    def test_ordering_must_be_local(self):
        doc = places_doc()
        # Pop is resident at level 1, cannot order level 2
        doc["levels"][2]["ordering"] = [["Pop", "desc"]]
        with pytest.raises(ValidationError):
            self._validate(doc)

    def test_ordering_by_key_ok(self):
        doc = places_doc()
        doc["levels"][2]["ordering"] = [["County Name", "asc"]]
        self._validate(doc)

    def test_input_attributes_can_order_base(self):
        doc = places_doc()
        doc["levels"][0]["ordering"] = [["Population", "desc"]]
        self._validate(doc)

    def test_output_grain_with_collapse(self):
        doc = places_doc()
        doc["levels"][0]["collapsed"] = True
        doc["levels"][1]["collapsed"] = True
        v = self._validate(doc)
        assert v.output_grain == 2

    def test_output_grain_default(self):
        v = self._validate(places_doc())
        assert v.output_grain == 0


class TestResolve:
    def _resolve(self, doc, bindings=None, cat=None):
        cat = cat or make_catalog()
        v = validate_spec(parse_spec(json.dumps(doc)), cat)
        return resolve_inputs(v, cat, bindings)

    def test_table_input(self):
        r = self._resolve(places_doc())
        assert r.primary.kind == "table"
        assert r.primary.table_name == "places"
        assert r.input_attrs["Population"] is N

    def test_unknown_table(self):
        doc = places_doc()
        doc["inputs"] = [{"table": "nope"}]
        with pytest.raises(UnknownReference):
            self._resolve(doc)

    def test_parameter_binding_default(self):
        doc = places_doc()
        doc["parameters"] = {"cutoff": {"type": "Number", "default": 3}}
        r = self._resolve(doc)
        assert r.bindings == {"cutoff": 3}
        r = self._resolve(doc, {"cutoff": 7})
        assert r.bindings == {"cutoff": 7}

    def test_missing_binding(self):
        doc = places_doc()
        doc["parameters"] = {"cutoff": {"type": "Number"}}
        with pytest.raises(MissingBinding):
            self._resolve(doc)

    def test_link_expansion(self):
        doc = {
            "inputs": [{"table": "flights"}],
            "joins": [{
                "kind": "link", "name": "Plane",
                "target": {"table": "planes"},
                "on": [["Tail", "TailNum"]],
            }],
            "levels": [{"keys": []}, {"keys": []}],
            "columns": {
                "Model": {"formula": "[Plane].[Model]", "resident_level": 0},
            },
        }
        r = self._resolve(doc)
        assert len(r.links) == 1
        link = r.links[0]
        assert link.name == "Plane" and link.attributes == ["Model"]
        assert r.input_attrs["Plane.Model"] is T
        # the formula now references the synthesized joined attribute
        from sheetc.formula.ast import ColumnRef
        assert r.formulas["Model"] == ColumnRef("Plane.Model")

    def test_unused_link_not_resolved(self):
        doc = {
            "inputs": [{"table": "flights"}],
            "joins": [{
                "kind": "link", "name": "Plane",
                "target": {"table": "nope_missing"},
                "on": [["Tail", "TailNum"]],
            }],
            "levels": [{"keys": []}, {"keys": []}],
            "columns": {"Id": {"formula": "[FlightId]", "resident_level": 0}},
        }
        r = self._resolve(doc)  # target never touched
        assert r.links == []

    def test_link_requires_unique_remote_keys(self):
        doc = {
            "inputs": [{"table": "flights"}],
            "joins": [{
                "kind": "link", "name": "Place",
                "target": {"table": "places"},  # no unique keys declared
                "on": [["Tail", "City"]],
            }],
            "levels": [{"keys": []}, {"keys": []}],
            "columns": {
                "S": {"formula": "[Place].[State]", "resident_level": 0},
            },
        }
        with pytest.raises(ValidationError):
            self._resolve(doc)

    def test_regular_join_attrs_visible(self):
        doc = {
            "inputs": [{"table": "flights"}],
            "joins": [{
                "kind": "join", "type": "left",
                "input": {"table": "planes"},
                "on": [["Tail", "TailNum"]],
            }],
            "levels": [{"keys": []}, {"keys": []}],
            "columns": {"M": {"formula": "[Model]", "resident_level": 0}},
        }
        r = self._resolve(doc)
        assert r.input_attrs["Model"] is T
        assert len(r.joins) == 1
