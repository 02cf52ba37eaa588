"""Worksheet specification document: JSON encoding, validation, resolution.

The JSON vocabulary is defined here. A worksheet document is an object with
``inputs``, ``joins``, ``levels``, ``columns``, ``filters``, ``parameters``
and ``page`` keys (snake_case throughout). Level indices are 0-based with
the base at index 0 and the totals last.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import Optional

from sheetc.formula import parse_formula, ParseError
from sheetc.formula.ast import Expr, LinkRef, walk
from sheetc.scalars import ScalarType, type_from_name


class SpecError(Exception):
    pass


class SpecSyntaxError(SpecError):
    """The document is not well-formed JSON."""


class SchemaError(SpecError):
    """The document does not match the worksheet schema."""


class ValidationError(SpecError):
    """A structural invariant is violated."""


class UnknownReference(SpecError):
    pass


class CyclicComposition(SpecError):
    def __init__(self, cycle: list[str]):
        super().__init__("cyclic worksheet composition: " + " -> ".join(cycle))
        self.cycle = cycle


class MissingBinding(SpecError):
    pass


# --------------------------------------------------------------------------
# Domain types


@dataclass(frozen=True)
class InputSource:
    kind: str  # table | sql | worksheet | csv
    table: Optional[str] = None
    sql: Optional[str] = None
    worksheet: Optional[str] = None
    bindings: dict = field(default_factory=dict)
    csv: Optional[str] = None
    name: Optional[str] = None
    # declared schema for sql inputs: [(attribute, ScalarType)]
    schema: tuple = ()

    def to_json(self) -> dict:
        d: dict = {}
        if self.kind == "table":
            d["table"] = self.table
        elif self.kind == "sql":
            d["sql"] = self.sql
            d["schema"] = [[n, t.value] for n, t in self.schema]
        elif self.kind == "worksheet":
            d["worksheet"] = self.worksheet
            if self.bindings:
                d["bindings"] = self.bindings
        else:
            d["csv"] = self.csv
        if self.name:
            d["name"] = self.name
        return d


@dataclass(frozen=True)
class JoinSpec:
    input: InputSource
    join_type: str  # inner | left | right | full
    on: tuple  # ((local attr, remote attr), ...)

    def to_json(self) -> dict:
        return {
            "kind": "join",
            "input": self.input.to_json(),
            "type": self.join_type,
            "on": [list(p) for p in self.on],
        }


@dataclass(frozen=True)
class LinkSpec:
    name: str
    target: InputSource
    on: tuple  # ((local attr, remote attr), ...); remote side must be unique

    def to_json(self) -> dict:
        return {
            "kind": "link",
            "name": self.name,
            "target": self.target.to_json(),
            "on": [list(p) for p in self.on],
        }


@dataclass(frozen=True)
class LevelSpec:
    keys: tuple = ()
    ordering: tuple = ()  # ((column, "asc"|"desc"), ...)
    collapsed: bool = False

    def to_json(self) -> dict:
        return {
            "keys": list(self.keys),
            "ordering": [list(o) for o in self.ordering],
            "collapsed": self.collapsed,
        }


@dataclass(frozen=True)
class ColumnSpec:
    formula: str
    resident_level: int
    hidden: bool = False
    format: Optional[str] = None

    def to_json(self) -> dict:
        d: dict = {"formula": self.formula, "resident_level": self.resident_level,
                   "hidden": self.hidden}
        if self.format is not None:
            d["format"] = self.format
        return d


@dataclass(frozen=True)
class FilterSpec:
    kind: str  # include_list | exclude_list | range | text_match | top_n | custom_predicate
    target: Optional[str] = None
    values: tuple = ()
    low: object = None
    high: object = None
    pattern: Optional[str] = None
    limit: Optional[int] = None
    descending: bool = True
    predicate: Optional[str] = None

    def to_json(self) -> dict:
        d: dict = {"kind": self.kind}
        if self.target is not None:
            d["target"] = self.target
        if self.kind in ("include_list", "exclude_list"):
            d["values"] = list(self.values)
        elif self.kind == "range":
            d["low"] = self.low
            d["high"] = self.high
        elif self.kind == "text_match":
            d["pattern"] = self.pattern
        elif self.kind == "top_n":
            d["limit"] = self.limit
            d["descending"] = self.descending
        elif self.kind == "custom_predicate":
            d["predicate"] = self.predicate
        return d


@dataclass(frozen=True)
class ParameterSpec:
    name: str
    type: ScalarType
    default: object = None

    def to_json(self) -> dict:
        return {"type": self.type.value, "default": self.default}


@dataclass(frozen=True)
class PageSpec:
    limit: int
    offset: int = 0

    def to_json(self) -> dict:
        return {"limit": self.limit, "offset": self.offset}


@dataclass(frozen=True)
class WorksheetSpec:
    inputs: tuple  # InputSource, first is primary
    joins: tuple  # JoinSpec | LinkSpec
    levels: tuple  # LevelSpec; index 0 = base, last = totals
    columns: dict  # name -> ColumnSpec, insertion order = output order
    filters: tuple = ()
    parameters: dict = field(default_factory=dict)  # name -> ParameterSpec
    page: Optional[PageSpec] = None

    def to_json(self) -> dict:
        return {
            "inputs": [i.to_json() for i in self.inputs],
            "joins": [j.to_json() for j in self.joins],
            "levels": [l.to_json() for l in self.levels],
            "columns": {n: c.to_json() for n, c in self.columns.items()},
            "filters": [f.to_json() for f in self.filters],
            "parameters": {n: p.to_json() for n, p in self.parameters.items()},
            **({"page": self.page.to_json()} if self.page else {}),
        }


def serialize(spec: WorksheetSpec) -> str:
    return json.dumps(spec.to_json(), indent=2)


# --------------------------------------------------------------------------
# Catalog


@dataclass
class TableDef:
    name: str
    schema: list  # [(attribute, ScalarType)]
    unique_keys: list = field(default_factory=list)  # [[attr, ...], ...]
    rows: Optional[list] = None  # in-memory rows for local/loaded tables

    @property
    def attr_types(self) -> dict[str, ScalarType]:
        return dict(self.schema)


@dataclass
class Catalog:
    tables: dict = field(default_factory=dict)  # name -> TableDef
    worksheets: dict = field(default_factory=dict)  # id -> WorksheetSpec
    base_dir: str = "."  # for resolving csv paths

    @classmethod
    def from_json(cls, text: str, base_dir: str = ".") -> "Catalog":
        doc = json.loads(text)
        cat = cls(base_dir=base_dir)
        for t in doc.get("tables", []):
            cat.tables[t["name"]] = TableDef(
                name=t["name"],
                schema=[(n, type_from_name(ty)) for n, ty in t["schema"]],
                unique_keys=[list(k) for k in t.get("unique_keys", [])],
                rows=t.get("rows"),
            )
        for wid, wdoc in doc.get("worksheets", {}).items():
            cat.worksheets[wid] = _spec_from_doc(wdoc, f"worksheet {wid!r}")
        return cat

    def add_table(self, table: TableDef) -> None:
        self.tables[table.name] = table


# --------------------------------------------------------------------------
# Parsing


_SPEC_KEYS = {"inputs", "joins", "levels", "columns", "filters", "parameters", "page"}


def _reject_unknown(obj: dict, allowed: set, where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise SchemaError(f"unknown field(s) {sorted(unknown)} in {where}")


def _need(obj: dict, key: str, where: str):
    if key not in obj:
        raise SchemaError(f"missing field {key!r} in {where}")
    return obj[key]


def _input_from_doc(doc, where: str) -> InputSource:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where} must be an object")
    _reject_unknown(doc, {"table", "sql", "worksheet", "bindings", "csv", "name", "schema"}, where)
    kinds = [k for k in ("table", "sql", "worksheet", "csv") if k in doc]
    if len(kinds) != 1:
        raise SchemaError(f"{where} must have exactly one of table/sql/worksheet/csv")
    kind = kinds[0]
    schema = tuple(
        (n, type_from_name(t)) for n, t in doc.get("schema", [])
    )
    if kind == "sql" and not schema:
        raise SchemaError(f"{where}: sql inputs require a declared schema")
    return InputSource(
        kind=kind,
        table=doc.get("table"),
        sql=doc.get("sql"),
        worksheet=doc.get("worksheet"),
        bindings=doc.get("bindings", {}),
        csv=doc.get("csv"),
        name=doc.get("name"),
        schema=schema,
    )


def _join_from_doc(doc, where: str):
    if not isinstance(doc, dict):
        raise SchemaError(f"{where} must be an object")
    kind = doc.get("kind", "join")
    if kind == "join":
        _reject_unknown(doc, {"kind", "input", "type", "on"}, where)
        jt = doc.get("type", "inner")
        if jt not in ("inner", "left", "right", "full", "semi", "anti"):
            raise SchemaError(f"{where}: unknown join type {jt!r}")
        on = tuple(tuple(p) for p in _need(doc, "on", where))
        if not on or any(len(p) != 2 for p in on):
            raise SchemaError(f"{where}: 'on' must be a list of [local, remote] pairs")
        return JoinSpec(_input_from_doc(_need(doc, "input", where), where + ".input"), jt, on)
    if kind == "link":
        _reject_unknown(doc, {"kind", "name", "target", "on"}, where)
        on = tuple(tuple(p) for p in _need(doc, "on", where))
        if not on or any(len(p) != 2 for p in on):
            raise SchemaError(f"{where}: 'on' must be a list of [local, remote] pairs")
        return LinkSpec(
            _need(doc, "name", where),
            _input_from_doc(_need(doc, "target", where), where + ".target"),
            on,
        )
    raise SchemaError(f"{where}: unknown join kind {kind!r}")


def _filter_from_doc(doc, where: str) -> FilterSpec:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where} must be an object")
    kind = _need(doc, "kind", where)
    allowed_by_kind = {
        "include_list": {"kind", "target", "values"},
        "exclude_list": {"kind", "target", "values"},
        "range": {"kind", "target", "low", "high"},
        "text_match": {"kind", "target", "pattern"},
        "top_n": {"kind", "target", "limit", "descending"},
        "custom_predicate": {"kind", "predicate"},
    }
    if kind not in allowed_by_kind:
        raise SchemaError(f"{where}: unknown filter kind {kind!r}")
    _reject_unknown(doc, allowed_by_kind[kind], where)
    if kind != "custom_predicate":
        _need(doc, "target", where)
    return FilterSpec(
        kind=kind,
        target=doc.get("target"),
        values=tuple(doc.get("values", [])),
        low=doc.get("low"),
        high=doc.get("high"),
        pattern=doc.get("pattern"),
        limit=doc.get("limit"),
        descending=doc.get("descending", True),
        predicate=doc.get("predicate"),
    )


def _spec_from_doc(doc, where: str = "worksheet") -> WorksheetSpec:
    if not isinstance(doc, dict):
        raise SchemaError(f"{where} must be a JSON object")
    _reject_unknown(doc, _SPEC_KEYS, where)

    inputs_doc = _need(doc, "inputs", where)
    if not isinstance(inputs_doc, list) or not inputs_doc:
        raise SchemaError(f"{where}: 'inputs' must be a non-empty list")
    inputs = tuple(
        _input_from_doc(i, f"{where}.inputs[{k}]") for k, i in enumerate(inputs_doc)
    )

    joins = tuple(
        _join_from_doc(j, f"{where}.joins[{k}]")
        for k, j in enumerate(doc.get("joins", []))
    )

    levels_doc = _need(doc, "levels", where)
    if not isinstance(levels_doc, list):
        raise SchemaError(f"{where}: 'levels' must be a list")
    levels = []
    for k, l in enumerate(levels_doc):
        lw = f"{where}.levels[{k}]"
        if not isinstance(l, dict):
            raise SchemaError(f"{lw} must be an object")
        _reject_unknown(l, {"keys", "ordering", "collapsed"}, lw)
        ordering = []
        for o in l.get("ordering", []):
            if not (isinstance(o, list) and len(o) == 2 and o[1] in ("asc", "desc")):
                raise SchemaError(f"{lw}: ordering entries are [column, asc|desc]")
            ordering.append(tuple(o))
        levels.append(LevelSpec(
            keys=tuple(l.get("keys", [])),
            ordering=tuple(ordering),
            collapsed=bool(l.get("collapsed", False)),
        ))

    columns_doc = _need(doc, "columns", where)
    if not isinstance(columns_doc, dict):
        raise SchemaError(f"{where}: 'columns' must be an object")
    columns = {}
    for name, c in columns_doc.items():
        cw = f"{where}.columns[{name!r}]"
        if not isinstance(c, dict):
            raise SchemaError(f"{cw} must be an object")
        _reject_unknown(c, {"formula", "resident_level", "hidden", "format"}, cw)
        level = _need(c, "resident_level", cw)
        if not isinstance(level, int):
            raise SchemaError(f"{cw}: resident_level must be an integer")
        columns[name] = ColumnSpec(
            formula=str(_need(c, "formula", cw)),
            resident_level=level,
            hidden=bool(c.get("hidden", False)),
            format=c.get("format"),
        )

    filters = tuple(
        _filter_from_doc(f, f"{where}.filters[{k}]")
        for k, f in enumerate(doc.get("filters", []))
    )

    parameters = {}
    for name, p in doc.get("parameters", {}).items():
        pw = f"{where}.parameters[{name!r}]"
        if not isinstance(p, dict):
            raise SchemaError(f"{pw} must be an object")
        _reject_unknown(p, {"type", "default"}, pw)
        try:
            ptype = type_from_name(_need(p, "type", pw))
        except ValueError as e:
            raise SchemaError(f"{pw}: {e}") from None
        parameters[name] = ParameterSpec(name, ptype, p.get("default"))

    page = None
    if "page" in doc:
        p = doc["page"]
        _reject_unknown(p, {"limit", "offset"}, f"{where}.page")
        page = PageSpec(int(_need(p, "limit", f"{where}.page")), int(p.get("offset", 0)))

    return WorksheetSpec(inputs, joins, tuple(levels), columns, filters, parameters, page)


def parse_spec(document: str) -> WorksheetSpec:
    """Parse a JSON worksheet document into a WorksheetSpec."""
    try:
        doc = json.loads(document)
    except json.JSONDecodeError as e:
        raise SpecSyntaxError(str(e)) from None
    return _spec_from_doc(doc)


# --------------------------------------------------------------------------
# Validation


@dataclass
class ValidatedSpec:
    spec: WorksheetSpec
    # cumulative keyset per level: own keys unioned with all higher levels'
    cumulative_keys: list  # list[tuple[str, ...]]
    # grouping keys actually usable to materialize each level: the members
    # of the cumulative keyset resident strictly below the level
    group_keys: list  # list[tuple[str, ...]]
    formulas: dict  # column name -> parsed Expr

    @property
    def n_levels(self) -> int:
        return len(self.spec.levels)

    @property
    def output_grain(self) -> int:
        """Lowest un-collapsed level (collapse hides the level and below)."""
        grain = 0
        for i, level in enumerate(self.spec.levels):
            if level.collapsed:
                grain = i + 1
        return min(grain, self.n_levels - 1)

    def key_level(self, name: str) -> int:
        col = self.spec.columns.get(name)
        if col is not None:
            return col.resident_level
        return 0  # input attribute


def _column_level(spec: WorksheetSpec, name: str, input_attrs: dict) -> Optional[int]:
    if name in spec.columns:
        return spec.columns[name].resident_level
    if name in input_attrs:
        return 0
    return None


def validate_spec(spec: WorksheetSpec, catalog: Catalog) -> ValidatedSpec:
    """Check structural invariants and compute cumulative keysets."""
    n = len(spec.levels)
    if n < 2:
        raise ValidationError("a worksheet needs at least two levels (base and totals)")
    if spec.levels[0].keys:
        raise ValidationError("the base level (level 0) must have no keys")
    if spec.levels[-1].keys:
        raise ValidationError(f"the totals level (level {n - 1}) must have no keys")
    for i in range(1, n - 1):
        if not spec.levels[i].keys:
            raise ValidationError(f"level {i} must declare at least one key")

    input_attrs = _declared_attrs(spec, catalog)

    for name, col in spec.columns.items():
        if not (0 <= col.resident_level < n):
            raise ValidationError(
                f"column [{name}] resident level {col.resident_level} out of range"
            )

    formulas: dict[str, Expr] = {}
    for name, col in spec.columns.items():
        try:
            formulas[name] = parse_formula(col.formula)
        except ParseError as e:
            raise ValidationError(f"column [{name}]: {e}") from None

    for i, level in enumerate(spec.levels):
        for key in level.keys:
            key_level = _column_level(spec, key, input_attrs)
            if key_level is None and key not in spec.parameters:
                raise ValidationError(f"level {i} key [{key}] references no column")
            if key_level is None:
                raise ValidationError(f"level {i} key [{key}] references a parameter")
            if key_level >= i:
                raise ValidationError(
                    f"level {i} key [{key}] must reference a column from a lower "
                    f"level (it is resident at level {key_level})"
                )
        for col_name, _dir in level.ordering:
            ol = _column_level(spec, col_name, input_attrs)
            if ol is None:
                raise ValidationError(f"level {i} ordering references unknown column [{col_name}]")
            if ol != i and col_name not in level.keys:
                raise ValidationError(
                    f"level {i} ordering column [{col_name}] must be resident at "
                    f"this level or one of its keys"
                )

    for k, f in enumerate(spec.filters):
        if f.kind == "custom_predicate":
            try:
                parse_formula(f.predicate or "")
            except ParseError as e:
                raise ValidationError(f"filter {k}: {e}") from None
        elif f.target not in spec.columns and f.target not in input_attrs:
            raise ValidationError(f"filter {k} targets unknown column [{f.target}]")

    cumulative: list[tuple] = [()] * n
    acc: list[str] = []
    for i in range(n - 1, 0, -1):  # totals down to level 1
        for key in spec.levels[i].keys:
            if key not in acc:
                acc.append(key)
        cumulative[i] = tuple(acc)
    cumulative[0] = ()

    group_keys: list[tuple] = [()] * n
    for i in range(1, n - 1):
        group_keys[i] = tuple(
            k for k in cumulative[i]
            if _column_level(spec, k, input_attrs) < i
        )
    group_keys[n - 1] = ()

    return ValidatedSpec(spec, cumulative, group_keys, formulas)


def _declared_attrs(spec: WorksheetSpec, catalog: Catalog) -> dict[str, ScalarType]:
    """Attribute name -> type across the primary input and all joins.

    A joined input may reuse an existing name only for its own join keys
    (the sides are equated, and the left value is the one exposed); any
    other collision is ambiguous and rejected.
    """
    attrs: dict[str, ScalarType] = {}
    sources = [(spec.inputs[0], ())] + [
        (j.input, tuple(r for _l, r in j.on))
        for j in spec.joins if isinstance(j, JoinSpec)
    ]
    for src, join_keys in sources:
        for name, t in _input_schema(src, catalog):
            if name in attrs:
                if name in join_keys:
                    continue
                raise ValidationError(f"duplicate input attribute [{name}]")
            attrs[name] = t
    return attrs


def _input_schema(src: InputSource, catalog: Catalog, _stack: tuple = ()) -> list:
    if src.kind == "table":
        table = catalog.tables.get(src.table)
        if table is None:
            raise UnknownReference(f"unknown table {src.table!r}")
        return list(table.schema)
    if src.kind == "sql":
        return list(src.schema)
    if src.kind == "csv":
        name = src.name or src.csv
        table = catalog.tables.get(name)
        if table is not None:
            return list(table.schema)
        raise UnknownReference(f"csv input {src.csv!r} not loaded (table {name!r})")
    if src.kind == "worksheet":
        inner = catalog.worksheets.get(src.worksheet)
        if inner is None:
            raise UnknownReference(f"unknown worksheet {src.worksheet!r}")
        if src.worksheet in _stack:
            raise CyclicComposition(list(_stack) + [src.worksheet])
        return worksheet_output_schema(inner, catalog, _stack + (src.worksheet,))
    raise SchemaError(f"unknown input kind {src.kind!r}")


def worksheet_output_schema(spec: WorksheetSpec, catalog: Catalog,
                            _stack: tuple = ()) -> list:
    """Visible output columns of a worksheet, in output order.

    Types are resolved by typechecking the worksheet's columns; this runs
    the front half of the compiler, so composition cycles surface here.
    """
    from sheetc.compiler import output_schema_of  # local import: layering

    return output_schema_of(spec, catalog, _stack)


# --------------------------------------------------------------------------
# Resolution


@dataclass
class ResolvedInput:
    source: InputSource
    schema: list  # [(attr, ScalarType)]
    # how to obtain rows / SQL for this input
    kind: str  # table | sql | worksheet
    table_name: Optional[str] = None
    sql_text: Optional[str] = None
    inner: Optional["ResolvedSpec"] = None


@dataclass
class ResolvedLink:
    name: str
    target: ResolvedInput
    on: tuple  # ((local attr, remote attr), ...)
    attributes: list  # remote attributes pulled through this link


@dataclass
class ResolvedSpec:
    validated: ValidatedSpec
    primary: ResolvedInput
    joins: list  # [(JoinSpec, ResolvedInput)]
    links: list  # [ResolvedLink] — only links actually referenced
    bindings: dict  # parameter name -> bound literal value
    formulas: dict  # column name -> Expr with link refs rewritten
    filter_predicates: dict  # filter index -> Expr for custom predicates
    input_attrs: dict  # attr name -> ScalarType (including link attrs)

    @property
    def spec(self) -> WorksheetSpec:
        return self.validated.spec


def link_attr_name(link: str, attr: str) -> str:
    return f"{link}.{attr}"


def resolve_inputs(validated: ValidatedSpec, catalog: Catalog,
                   bindings: Optional[dict] = None,
                   _stack: tuple = ()) -> ResolvedSpec:
    """Resolve tables/worksheets/links/parameters against the catalog."""
    spec = validated.spec
    bindings = dict(bindings or {})

    bound: dict[str, object] = {}
    for name, p in spec.parameters.items():
        if name in bindings:
            bound[name] = bindings[name]
        elif p.default is not None:
            bound[name] = p.default
        else:
            raise MissingBinding(f"parameter {name!r} has no default and no binding")

    def resolve_source(src: InputSource) -> ResolvedInput:
        schema = _input_schema(src, catalog, _stack)
        if src.kind in ("table", "csv"):
            return ResolvedInput(src, schema, "table",
                                 table_name=src.table or src.name or src.csv)
        if src.kind == "sql":
            return ResolvedInput(src, schema, "sql", sql_text=src.sql)
        inner_spec = catalog.worksheets[src.worksheet]
        if src.worksheet in _stack:
            raise CyclicComposition(list(_stack) + [src.worksheet])
        inner_validated = validate_spec(inner_spec, catalog)
        inner = resolve_inputs(inner_validated, catalog, src.bindings,
                               _stack + (src.worksheet,))
        return ResolvedInput(src, schema, "worksheet", inner=inner)

    primary = resolve_source(spec.inputs[0])
    joins = [
        (j, resolve_source(j.input)) for j in spec.joins if isinstance(j, JoinSpec)
    ]
    link_specs = {j.name: j for j in spec.joins if isinstance(j, LinkSpec)}

    # Find link references in formulas and filter predicates, then rewrite
    # them to plain column references on synthesized joined attributes.
    used_links: dict[str, set] = {}
    all_exprs: dict[str, Expr] = dict(validated.formulas)
    filter_preds: dict[int, Expr] = {}
    for k, f in enumerate(spec.filters):
        if f.kind == "custom_predicate":
            filter_preds[k] = parse_formula(f.predicate or "")
    for owner, expr in list(all_exprs.items()) + list(filter_preds.items()):
        for node in walk(expr):
            if isinstance(node, LinkRef):
                if len(node.path) != 1:
                    raise UnknownReference(
                        f"multi-hop link path {'.'.join(node.path)} is not supported"
                    )
                link_name = node.path[0]
                if link_name not in link_specs:
                    raise UnknownReference(f"unknown link [{link_name}]")
                used_links.setdefault(link_name, set()).add(node.attribute)

    links: list[ResolvedLink] = []
    input_attrs = dict(_declared_attrs(spec, catalog))
    for link_name, attrs in used_links.items():
        lspec = link_specs[link_name]
        target = resolve_source(lspec.target)
        target_attrs = dict(target.schema)
        remote_keys = [r for _l, r in lspec.on]
        for _local, remote in lspec.on:
            if remote not in target_attrs:
                raise UnknownReference(
                    f"link [{link_name}] remote key [{remote}] not in target schema"
                )
        if not _keys_unique(lspec.target, remote_keys, catalog):
            raise ValidationError(
                f"link [{link_name}] remote keys {remote_keys} are not declared "
                f"unique on the target; links must preserve cardinality"
            )
        for attr in sorted(attrs):
            if attr not in target_attrs:
                raise UnknownReference(
                    f"link [{link_name}] has no attribute [{attr}]"
                )
            input_attrs[link_attr_name(link_name, attr)] = target_attrs[attr]
        links.append(ResolvedLink(link_name, target, lspec.on, sorted(attrs)))

    def rewrite(e: Expr) -> Expr:
        from sheetc.formula.ast import BinOp, Call, ColumnRef, If
        if isinstance(e, LinkRef):
            return ColumnRef(link_attr_name(e.path[0], e.attribute), offset=e.offset)
        if isinstance(e, Call):
            return replace(e, args=tuple(rewrite(a) for a in e.args))
        if isinstance(e, BinOp):
            return replace(e, lhs=rewrite(e.lhs), rhs=rewrite(e.rhs))
        if isinstance(e, If):
            return replace(e, cond=rewrite(e.cond), then=rewrite(e.then),
                           else_=rewrite(e.else_) if e.else_ is not None else None)
        return e

    formulas = {name: rewrite(expr) for name, expr in all_exprs.items()}
    filter_preds = {k: rewrite(expr) for k, expr in filter_preds.items()}

    return ResolvedSpec(
        validated=validated,
        primary=primary,
        joins=joins,
        links=links,
        bindings=bound,
        formulas=formulas,
        filter_predicates=filter_preds,
        input_attrs=input_attrs,
    )


def _keys_unique(src: InputSource, keys: list, catalog: Catalog) -> bool:
    if src.kind in ("table", "csv"):
        name = src.table or src.name or src.csv
        table = catalog.tables.get(name)
        if table is None:
            return False
        return any(set(uk) <= set(keys) for uk in table.unique_keys)
    if src.kind == "worksheet":
        # A worksheet is unique on its output grain's grouping keys.
        inner = catalog.worksheets.get(src.worksheet)
        if inner is None:
            return False
        v = validate_spec(inner, catalog)
        grain = v.output_grain
        if grain == 0:
            return False  # base grain carries no uniqueness guarantee
        return set(v.group_keys[grain]) <= set(keys) or grain == v.n_levels - 1
    return False
