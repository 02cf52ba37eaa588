"""Formula language: parsing, printing, typechecking, constant folding."""

from __future__ import annotations

import datetime

import pytest
from hypothesis import given, strategies as st

from sheetc.formula import (
    BinOp,
    Call,
    ColumnRef,
    EnvEntry,
    If,
    LinkRef,
    Literal,
    ParseError,
    fold_constants,
    parse_formula,
    to_text,
    typecheck,
)
from sheetc.scalars import ScalarType

N = ScalarType.NUMBER
T = ScalarType.TEXT
L = ScalarType.LOGICAL
D = ScalarType.DATE
E = ScalarType.ERROR


ENV = {
    "sales": EnvEntry(N, 0, "input"),
    "Sales": EnvEntry(N, 0, "column"),
    "Sales - Sum": EnvEntry(N, 1, "column"),
    "Region": EnvEntry(T, 0, "input"),
    "Cohort": EnvEntry(D, 1, "column"),
    "Quarter": EnvEntry(D, 0, "column"),
    "Cancelled": EnvEntry(L, 0, "column"),
    "threshold": EnvEntry(N, None, "parameter"),
}


class TestParser:
    def test_aggregate_call(self):
        assert parse_formula("Sum([sales])") == Call("Sum", (ColumnRef("sales"),))

    def test_three_arg_call(self):
        e = parse_formula('DateDiff("month", [Cohort], [Quarter])')
        assert e == Call(
            "DateDiff", (Literal("month"), ColumnRef("Cohort"), ColumnRef("Quarter"))
        )

    def test_nested_calls(self):
        e = parse_formula('Round(Sum([Sales]) / Count([Region]), 2)')
        assert isinstance(e, Call) and e.function == "Round"
        div = e.args[0]
        assert isinstance(div, BinOp) and div.op == "/"

    def test_precedence(self):
        e = parse_formula("1 + 2 * 3")
        assert e == BinOp("+", Literal(1), BinOp("*", Literal(2), Literal(3)))

    def test_parens(self):
        e = parse_formula("(1 + 2) * 3")
        assert e == BinOp("*", BinOp("+", Literal(1), Literal(2)), Literal(3))

    def test_comparison_and_logic(self):
        e = parse_formula("[Sales] > 10 And Not [Cancelled]")
        assert isinstance(e, BinOp) and e.op == "And"
        assert isinstance(e.rhs, Call) and e.rhs.function == "Not"

    def test_link_reference(self):
        e = parse_formula("[Plane].[Model]")
        assert e == LinkRef(("Plane",), "Model")

    def test_if_two_args(self):
        e = parse_formula("If([Cancelled], 1)")
        assert e == If(ColumnRef("Cancelled"), Literal(1), None)

    def test_date_literal(self):
        e = parse_formula('Date("2024-03-01")')
        assert e == Literal(datetime.date(2024, 3, 1))

    def test_string_escape(self):
        assert parse_formula('"a""b"') == Literal('a"b')

    def test_not_equal_spellings(self):
        assert parse_formula("1 <> 2") == parse_formula("1 != 2")

    def test_error_literal(self):
        e = parse_formula("Error()")
        assert isinstance(e, Literal) and e.type_hint is E

    @pytest.mark.parametrize("bad", ["", "1 +", "Sum(", "[x", "If(1)", "@", '"abc'])
    def test_rejects(self, bad):
        with pytest.raises(ParseError):
            parse_formula(bad)

    def test_offset_reported(self):
        with pytest.raises(ParseError) as exc:
            parse_formula("1 + $")
        assert exc.value.offset == 4


# Strategy for well-formed expression trees (no offsets compared).
_names = st.sampled_from(["sales", "Region", "Cohort", "a b", "x_1"])
_literals = st.one_of(
    st.integers(min_value=0, max_value=10**6),
    st.floats(min_value=0.0, max_value=1e6, allow_nan=False).map(lambda f: round(f, 4)),
    st.booleans(),
    st.just(None),
    st.text(alphabet=st.characters(blacklist_categories=("Cs",), blacklist_characters="\x00"), max_size=8),
    st.dates(min_value=datetime.date(1900, 1, 1), max_value=datetime.date(2100, 1, 1)),
).map(Literal)


def _exprs():
    base = st.one_of(_literals, _names.map(ColumnRef))
    return st.recursive(
        base,
        lambda inner: st.one_of(
            st.tuples(st.sampled_from(list("+-*/") + ["=", "<>", "<=", ">=", "<", ">", "And", "Or"]), inner, inner)
            .map(lambda t: BinOp(t[0], t[1], t[2])),
            st.tuples(st.sampled_from(["Sum", "Count", "Round"]), st.lists(inner, min_size=1, max_size=2))
            .map(lambda t: Call(t[0], tuple(t[1]))),
            st.tuples(st.sampled_from(["Not", "Neg"]), inner)
            .map(lambda t: Call(t[0], (t[1],))),
            st.tuples(inner, inner, inner).map(lambda t: If(t[0], t[1], t[2])),
        ),
        max_leaves=12,
    )


@given(_exprs())
def test_print_parse_roundtrip(e):
    assert parse_formula(to_text(e)) == e


class TestTypecheck:
    def test_number_mix_is_error_with_one_diagnostic(self):
        t = typecheck(parse_formula('1 + "a"'), ENV)
        assert t.type is E
        assert len(t.diagnostics) == 1

    def test_cross_level_arithmetic(self):
        t = typecheck(parse_formula("[Sales] / [Sales - Sum]"), ENV)
        assert t.type is N
        assert not t.diagnostics

    def test_if_without_else(self):
        t = typecheck(parse_formula("If([Cancelled], [Cohort])"), ENV)
        assert t.type is D

    def test_if_branch_mismatch(self):
        t = typecheck(parse_formula('If([Cancelled], 1, "x")'), ENV)
        assert t.type is E

    def test_unknown_name(self):
        t = typecheck(parse_formula("[nope] + 1"), ENV)
        assert t.type is E
        assert "nope" in t.diagnostics[0].message

    def test_aggregate_of_aggregate_rejected(self):
        t = typecheck(parse_formula("Sum(Max([Sales]))"), ENV)
        assert t.type is E

    def test_window_of_aggregate_allowed(self):
        t = typecheck(parse_formula("Lag(Sum([Sales]))"), ENV)
        assert t.type is N

    def test_min_same_type(self):
        assert typecheck(parse_formula("Min([Region])"), ENV).type is T
        assert typecheck(parse_formula("Max([Cohort])"), ENV).type is D

    def test_count_zero_args(self):
        assert typecheck(parse_formula("Count()"), ENV).type is N

    def test_parameter_reference(self):
        t = typecheck(parse_formula("[Sales] > [threshold]"), ENV)
        assert t.type is L
        assert t.referenced_parameters() == ["threshold"]

    def test_referenced_columns_with_levels(self):
        t = typecheck(parse_formula("[Sales] / [Sales - Sum]"), ENV)
        assert t.referenced_columns() == {"Sales": 0, "Sales - Sum": 1}


@given(_exprs())
def test_error_floods_upward(e):
    """If any referenced name is unknown, the whole tree is Error-typed."""
    t = typecheck(e, {})
    names = [n for n in (getattr(x, "name", None) for x in _walk_nodes(e)) if n]
    if names:
        assert t.type is E


def _walk_nodes(e):
    from sheetc.formula.ast import walk

    return list(walk(e))


class TestFold:
    def _fold(self, text, env=ENV):
        return fold_constants(typecheck(parse_formula(text), env))

    def test_arithmetic(self):
        t = self._fold("1 + 2 * 3")
        assert t.node == Literal(7)

    def test_round_division(self):
        t = self._fold("Round(1000 / 1000, 1)")
        assert t.node == Literal(1.0)

    def test_division_by_zero_is_null(self):
        t = self._fold("1 / 0")
        assert isinstance(t.node, Literal) and t.node.value is None

    def test_identity_not_applied(self):
        t = self._fold("[Sales] + 0")
        assert isinstance(t.node, BinOp)

    def test_error_literal_propagates(self):
        t = self._fold("Error() + 1")
        assert t.type is E
        assert isinstance(t.node, Literal)

    def test_if_folding(self):
        assert self._fold("If(True, 1, 2)").node == Literal(1)
        assert self._fold("If(False, 1, 2)").node == Literal(2)

    def test_partial_fold(self):
        t = self._fold("[Sales] * (2 + 3)")
        assert isinstance(t.node, BinOp)
        assert t.children[1].node == Literal(5)

    def test_date_functions_fold(self):
        t = self._fold('DateDiff("month", Date("2024-01-15"), Date("2024-03-01"))')
        assert t.node == Literal(2)
        t = self._fold('DateTrunc("quarter", Date("2024-05-20"))')
        assert t.node == Literal(datetime.date(2024, 4, 1))
