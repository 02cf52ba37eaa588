"""Seeded random worksheet generation for differential testing.

Every generated case pairs a small random catalog with a worksheet that
is valid by construction: grouping keys reference generated key columns,
aggregates and bare references respect level residency, windows only
appear on ordered levels, and filters target existing columns.
"""

from __future__ import annotations

import datetime
import random
from typing import Optional

from sheetc.scalars import ScalarType
from sheetc.spec_model import Catalog, TableDef, WorksheetSpec, parse_spec

import json

MAX_ROWS = 1000
MAX_LEVELS = 4
MAX_COLUMNS = 12

_WORDS = ["ash", "birch", "cedar", "dawn", "elm", "fern", "gale", "hazel"]


def _random_table(rng: random.Random) -> TableDef:
    n_rows = rng.choice([0, rng.randint(1, 40), rng.randint(40, 250),
                         rng.randint(250, MAX_ROWS)])
    k1 = [rng.choice(_WORDS[:rng.randint(2, 5)]) for _ in range(n_rows)]
    k2 = [rng.choice(["north", "south", "east", "west"]) for _ in range(n_rows)]
    epoch = datetime.date(2021, 1, 1)
    rows = []
    for i in range(n_rows):
        num1 = None if rng.random() < 0.1 else rng.randint(-50, 200)
        num2 = None if rng.random() < 0.1 else round(rng.uniform(0, 10), 2)
        day = None if rng.random() < 0.05 else \
            epoch + datetime.timedelta(days=rng.randint(0, 400))
        rows.append((k1[i], k2[i], num1, num2, day))
    return TableDef(
        "t",
        schema=[("k1", ScalarType.TEXT), ("k2", ScalarType.TEXT),
                ("num1", ScalarType.NUMBER), ("num2", ScalarType.NUMBER),
                ("day", ScalarType.DATE)],
        rows=rows,
    )


def _aggregate_formula(rng: random.Random, over: str) -> str:
    return rng.choice([
        f"Sum([{over}])",
        f"Avg([{over}])",
        f"Min([{over}])",
        f"Max([{over}])",
        "Count()",
        f"Count([{over}])",
        f"CountIf([{over}] > 50)",
        "CountDistinct([k2])",
    ])


def _base_formula(rng: random.Random) -> str:
    return rng.choice([
        "[num1] + 1",
        "[num1] * 2 - [num2]",
        "If([num1] > 100, [num1], 0)",
        "[num1] / [num2]",
        'If([k2] = "north", 1, 0)',
        "[num1]",
        "[day]",
    ])


def random_doc(rng: random.Random) -> dict:
    n_levels = rng.randint(2, MAX_LEVELS)
    n_middle = n_levels - 2

    columns: dict[str, dict] = {}
    columns["Key1"] = {"formula": "[k1]", "resident_level": 0}
    if n_middle >= 2:
        columns["Key2"] = {"formula": "[k2]", "resident_level": 0}

    levels: list[dict] = [{"keys": []}]
    if n_middle >= 1:
        levels.append({"keys": ["Key1"]})
    if n_middle >= 2:
        levels.append({"keys": ["Key2"]})
    levels.append({"keys": []})

    # base ordering enables window functions deterministically
    base_ordered = rng.random() < 0.5
    if base_ordered:
        levels[0]["ordering"] = [["Day", rng.choice(["asc", "desc"])]]
        columns["Day"] = {"formula": "[day]", "resident_level": 0}

    numeric_by_level: dict[int, list] = {0: ["num1", "num2"]}
    # leave room for the optional Windowed and Shared columns below
    budget = rng.randint(1, max(1, MAX_COLUMNS - len(columns) - 2))
    for i in range(budget):
        name = f"Col{i}"
        level = rng.randint(0, n_levels - 1)
        if level == 0:
            columns[name] = {"formula": _base_formula(rng),
                             "resident_level": 0}
            if "day" not in columns[name]["formula"]:
                numeric_by_level.setdefault(0, []).append(name)
            continue
        roll = rng.random()
        if roll < 0.55:
            over = rng.choice(numeric_by_level[0])
            columns[name] = {"formula": _aggregate_formula(rng, over),
                             "resident_level": level}
            numeric_by_level.setdefault(level, []).append(name)
        elif roll < 0.8:
            # bare lower reference: automatic aggregation
            columns[name] = {"formula": rng.choice(["[num1]", "[k2]", "[Key1]"])
                             if level <= n_levels - 2 else "[num1]",
                             "resident_level": level}
        else:
            # arithmetic over an aggregate living at this level, if any
            pool = numeric_by_level.get(level)
            if pool:
                columns[name] = {
                    "formula": f"[{rng.choice(pool)}] * 2",
                    "resident_level": level,
                }
            else:
                over = rng.choice(numeric_by_level[0])
                columns[name] = {"formula": _aggregate_formula(rng, over),
                                 "resident_level": level}
                numeric_by_level.setdefault(level, []).append(name)

    if base_ordered and rng.random() < 0.6:
        wfn = rng.choice(["CumulativeSum([num1])", "Lag([num1])",
                          "MovingAverage([num1], 2)", "FillDown([num1])"])
        columns["Windowed"] = {"formula": wfn, "resident_level": 0}

    # repeat a grouped value down onto the base rows
    upper_pool = [
        (n, c) for n, c in columns.items()
        if c["resident_level"] > 0 and n in sum(numeric_by_level.values(), [])
    ]
    if upper_pool and rng.random() < 0.5:
        name, _c = rng.choice(upper_pool)
        columns["Shared"] = {"formula": f"[{name}] + 0",
                             "resident_level": 0}

    filters: list[dict] = []
    if rng.random() < 0.4:
        filters.append({
            "kind": "range", "target": "num1",
            "low": rng.choice([None, rng.randint(-20, 50)]),
            "high": rng.choice([None, rng.randint(50, 150)]),
        })
    if rng.random() < 0.25:
        filters.append({
            "kind": "include_list", "target": "k2",
            "values": rng.sample(["north", "south", "east", "west"],
                                 rng.randint(1, 3)),
        })
    if rng.random() < 0.2:
        level_cols = [n for n, c in columns.items()
                      if c["resident_level"] == 1
                      and n in numeric_by_level.get(1, [])]
        if level_cols:
            filters.append({
                "kind": "custom_predicate",
                "predicate": f"[{level_cols[0]}] > {rng.randint(-10, 100)}",
            })

    # collapse a random prefix of levels
    grain = rng.choice([0] * 3 + list(range(1, n_levels - 1)))
    for i in range(grain):
        levels[i]["collapsed"] = True

    # optional ordering on a middle level
    if n_middle >= 1 and rng.random() < 0.4:
        pool = [n for n, c in columns.items() if c["resident_level"] == 1]
        if pool:
            levels[1]["ordering"] = [[rng.choice(pool),
                                      rng.choice(["asc", "desc"])]]

    doc = {
        "inputs": [{"table": "t"}],
        "levels": levels,
        "columns": columns,
        "filters": filters,
    }
    if rng.random() < 0.2:
        doc["page"] = {"limit": rng.randint(1, 50),
                       "offset": rng.choice([0, 0, rng.randint(1, 10)])}
    return doc


def random_case(seed: int) -> tuple:
    """Return (catalog, worksheet) for one seeded random case."""
    rng = random.Random(seed)
    cat = Catalog()
    cat.add_table(_random_table(rng))
    spec = parse_spec(json.dumps(random_doc(rng)))
    return cat, spec


def case_count_check(spec: WorksheetSpec) -> None:
    assert len(spec.levels) <= MAX_LEVELS
    assert len(spec.columns) <= MAX_COLUMNS
