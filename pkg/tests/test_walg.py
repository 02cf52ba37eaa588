"""Operator decomposition, scheduling, and fusion."""

from __future__ import annotations

import json

from sheetc.calc_graph import build_graph
from sheetc.formula.ast import BinOp, Call, ColumnRef, Literal
from sheetc.scalars import ScalarType
from sheetc.spec_model import (
    Catalog,
    TableDef,
    parse_spec,
    resolve_inputs,
    validate_spec,
)
from sheetc.walg import (
    AUTO_AGG,
    IS_MULTI,
    JoinOp,
    ProjectOp,
    SelectOp,
    WindowOp,
    build_plan,
    multi_flag_name,
    optimize_walg,
)

N = ScalarType.NUMBER
T = ScalarType.TEXT


def catalog() -> Catalog:
    cat = Catalog()
    cat.add_table(TableDef(
        "sales",
        schema=[("Region", T), ("Amount", N), ("Day", ScalarType.DATE)],
    ))
    return cat


def plan_for(doc):
    cat = catalog()
    v = validate_spec(parse_spec(json.dumps(doc)), cat)
    return build_plan(build_graph(resolve_inputs(v, cat)))


def doc(columns, levels=None, **extra):
    return {
        "inputs": [{"table": "sales"}],
        "levels": levels or [{"keys": []}, {"keys": ["R"]}, {"keys": []}],
        "columns": {"R": {"formula": "[Region]", "resident_level": 0}, **columns},
        **extra,
    }


def ops_of(plan, kind):
    return [o for o in plan.ops if isinstance(o, kind)]


class TestDecomposition:
    def test_aggregate_becomes_join(self):
        p = plan_for(doc({"Total": {"formula": "Sum([Amount])", "resident_level": 1}}))
        joins = ops_of(p, JoinOp)
        assert len(joins) == 1
        j = joins[0]
        assert (j.source, j.target) == (0, 1)
        # the aggregate writes the column directly, no helper indirection
        assert list(j.exprs) == ["Total"]
        assert j.exprs["Total"] == Call("Sum", (ColumnRef("Amount"),))

    def test_min_max_fuse_into_one_join(self):
        p = plan_for(doc({
            "Lo": {"formula": "Min([Amount])", "resident_level": 1},
            "Hi": {"formula": "Max([Amount])", "resident_level": 1},
        }))
        joins = ops_of(p, JoinOp)
        assert len(joins) == 1
        assert set(joins[0].exprs) == {"Lo", "Hi"}

    def test_same_level_projects_fuse(self):
        p = plan_for(doc({
            "A": {"formula": "[Amount] * 2", "resident_level": 0},
            "B": {"formula": "[Amount] + 1", "resident_level": 0},
        }))
        projects = [o for o in ops_of(p, ProjectOp) if o.level == 0]
        assert len(projects) == 1
        assert {"R", "A", "B"} <= set(projects[0].exprs)

    def test_auto_aggregation_emits_value_and_flag(self):
        p = plan_for(doc({
            "Amt": {"formula": "[Amount]", "resident_level": 1},
        }))
        joins = ops_of(p, JoinOp)
        assert len(joins) == 1
        j = joins[0]
        assert j.exprs["Amt"] == Call(AUTO_AGG, (ColumnRef("Amount"),))
        flag = multi_flag_name("Amt")
        assert j.exprs[flag] == Call(IS_MULTI, (ColumnRef("Amount"),))
        assert p.multi_flags == {"Amt": flag}
        assert p.schema[flag] == (1, ScalarType.LOGICAL)

    def test_auto_agg_inside_expression_has_no_visible_flag(self):
        p = plan_for(doc({
            "X": {"formula": "[Amount] * 2", "resident_level": 1},
        }))
        assert p.multi_flags == {}
        joins = ops_of(p, JoinOp)
        assert len(joins) == 1
        assert any(
            isinstance(e, Call) and e.function == AUTO_AGG
            for e in joins[0].exprs.values()
        )

    def test_repeat_down_from_totals(self):
        p = plan_for(doc({
            "Total": {"formula": "Sum([Amount])", "resident_level": 1},
            "Grand": {"formula": "Sum([Amount])", "resident_level": 2},
            "Share": {"formula": "[Total] / [Grand]", "resident_level": 1},
        }))
        rep = [j for j in ops_of(p, JoinOp) if j.source > j.target]
        assert len(rep) == 1
        assert (rep[0].source, rep[0].target) == (2, 1)
        assert list(rep[0].exprs.values()) == [ColumnRef("Grand")]

    def test_count_zero_args_sources_level_below(self):
        p = plan_for(doc({"N": {"formula": "Count()", "resident_level": 1}}))
        [j] = ops_of(p, JoinOp)
        assert (j.source, j.target) == (0, 1)
        assert j.exprs["N"] == Call("Count", ())

    def test_aggregate_source_is_lowest_referenced_level(self):
        p = plan_for(
            doc(
                {
                    "C": {"formula": "[City]", "resident_level": 0},
                    "CityPop": {"formula": "Sum([Amount])", "resident_level": 1},
                    "CountyCities": {"formula": "Count([CityPop])", "resident_level": 2},
                },
                levels=[{"keys": []}, {"keys": ["R"]}, {"keys": ["C2"]}, {"keys": []}],
            )
            | {
                "columns": {
                    "R": {"formula": "[Region]", "resident_level": 0},
                    "C2": {"formula": "[Region]", "resident_level": 0},
                    "CityPop": {"formula": "Sum([Amount])", "resident_level": 1},
                    "CountyCities": {"formula": "Count([CityPop])", "resident_level": 2},
                }
            }
        )
        counts = [j for j in ops_of(p, JoinOp) if (j.source, j.target) == (1, 2)]
        assert len(counts) == 1

    def test_single_row_aggregate_at_base(self):
        p = plan_for(doc({"S": {"formula": "Sum([Amount])", "resident_level": 0}}))
        assert ops_of(p, JoinOp) == []
        project = [o for o in ops_of(p, ProjectOp) if "S" in o.exprs][0]
        assert project.exprs["S"] == ColumnRef("Amount")

    def test_window_of_aggregate(self):
        p = plan_for(doc({
            "Total": {"formula": "Sum([Amount])", "resident_level": 1},
            "Prev": {"formula": "Lag([Total])", "resident_level": 1},
        }))
        [w] = ops_of(p, WindowOp)
        assert w.level == 1
        [wc] = w.exprs.values()
        assert wc.function == "Lag"
        joins = ops_of(p, JoinOp)
        assert p.ops.index(joins[0]) < p.ops.index(w)

    def test_error_column_becomes_error_literal(self):
        p = plan_for(doc({"Bad": {"formula": "[Nope] + 1", "resident_level": 0}}))
        project = [o for o in ops_of(p, ProjectOp) if "Bad" in o.exprs][0]
        e = project.exprs["Bad"]
        assert isinstance(e, Literal) and e.type_hint is ScalarType.ERROR


class TestScheduling:
    def test_filter_runs_before_independent_aggregate(self):
        p = plan_for(doc(
            {"Total": {"formula": "Sum([Amount])", "resident_level": 1}},
            filters=[{"kind": "include_list", "target": "R", "values": ["west"]}],
        ))
        [sel] = ops_of(p, SelectOp)
        [join] = ops_of(p, JoinOp)
        assert p.ops.index(sel) < p.ops.index(join)

    def test_filter_on_aggregate_runs_after_it(self):
        p = plan_for(doc(
            {"Total": {"formula": "Sum([Amount])", "resident_level": 1}},
            filters=[{"kind": "range", "target": "Total", "low": 10, "high": None}],
        ))
        [sel] = ops_of(p, SelectOp)
        [join] = ops_of(p, JoinOp)
        assert p.ops.index(join) < p.ops.index(sel)
        assert sel.level == 1

    def test_aggregate_declared_after_filter_stays_after(self):
        # Pre declared before the filter keeps pre-filter data; Post after.
        p = plan_for(doc(
            {
                "Pre": {"formula": "Sum([Amount])", "resident_level": 1},
                "Post": {"formula": "Count([Amount])", "resident_level": 1},
            },
            filters=[{"kind": "custom_predicate", "predicate": "[Pre] > 10"}],
        ))
        [sel] = ops_of(p, SelectOp)
        joins = ops_of(p, JoinOp)
        pre = [j for j in joins if "Pre" in j.exprs][0]
        post = [j for j in joins if "Post" in j.exprs][0]
        assert p.ops.index(pre) < p.ops.index(sel) < p.ops.index(post)

    def test_lower_levels_first(self):
        p = plan_for(doc({
            "Grand": {"formula": "Sum([Amount])", "resident_level": 2},
            "Total": {"formula": "Sum([Amount])", "resident_level": 1},
        }))
        joins = ops_of(p, JoinOp)
        assert (joins[0].source, joins[0].target) == (0, 1)
        assert (joins[1].source, joins[1].target) == (0, 2)

    def test_top_n_filter_schedules_rank_window(self):
        p = plan_for(doc(
            {"Total": {"formula": "Sum([Amount])", "resident_level": 1}},
            filters=[{"kind": "top_n", "target": "Total", "limit": 2}],
        ))
        [w] = ops_of(p, WindowOp)
        [wc] = w.exprs.values()
        assert wc.function == "Rank" and wc.descending
        assert wc.order_by == ColumnRef("Total")
        [sel] = ops_of(p, SelectOp)
        assert p.ops.index(w) < p.ops.index(sel)


class TestOptimize:
    def test_inline_filter_marked(self):
        p = plan_for(doc(
            {"Total": {"formula": "Sum([Amount])", "resident_level": 1}},
            filters=[{"kind": "include_list", "target": "R", "values": ["west"]}],
        ))
        p = optimize_walg(p)
        [join] = ops_of(p, JoinOp)
        assert join.inline_filter

    def test_inline_filter_not_marked_across_levels(self):
        p = plan_for(doc(
            {
                "Total": {"formula": "Sum([Amount])", "resident_level": 1},
                "Lagged": {"formula": "Lag([Total])", "resident_level": 1},
            },
            filters=[{"kind": "range", "target": "Total", "low": 0, "high": None}],
        ))
        p = optimize_walg(p)
        for j in ops_of(p, JoinOp):
            assert not (j.inline_filter and j.source != 1)
