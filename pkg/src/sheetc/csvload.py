"""CSV ingestion with type inference.

Reads RFC-4180 files (header row required) into TableDef values. Column
types are inferred from the data: Number when every non-empty cell
parses as a number, Date when every non-empty cell is an ISO-8601 date,
otherwise Text. A column that mixes number-shaped and date-shaped cells
is reported as a conflict rather than silently degraded.
"""

from __future__ import annotations

import csv
import datetime
import io
from typing import Optional, Union

from sheetc.scalars import ScalarType

__all__ = ["CsvError", "InferenceConflict", "load_csv_table"]


class CsvError(Exception):
    pass


class InferenceConflict(CsvError):
    pass


def _as_number(text: str):
    try:
        i = int(text)
        return i
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return None


def _as_date(text: str) -> Optional[datetime.date]:
    try:
        return datetime.date.fromisoformat(text)
    except ValueError:
        return None


def _infer(values: list) -> ScalarType:
    kinds = set()
    for name, v in values:
        if v == "":
            continue
        if _as_date(v) is not None:
            kinds.add(ScalarType.DATE)
        elif _as_number(v) is not None:
            kinds.add(ScalarType.NUMBER)
        else:
            kinds.add(ScalarType.TEXT)
    if kinds == {ScalarType.NUMBER, ScalarType.DATE}:
        raise InferenceConflict(
            f"column {values[0][0]!r} mixes numbers and dates"
        )
    if not kinds or ScalarType.TEXT in kinds or len(kinds) > 1:
        return ScalarType.TEXT
    return kinds.pop()


def _convert(text: str, t: ScalarType):
    if text == "":
        return None
    if t is ScalarType.NUMBER:
        return _as_number(text)
    if t is ScalarType.DATE:
        return _as_date(text)
    return text


def load_csv_table(source: Union[str, io.TextIOBase], name: str):
    """Parse a CSV file (path or open text stream) into a TableDef."""
    from sheetc.spec_model import TableDef

    if isinstance(source, str):
        with open(source, newline="", encoding="utf-8") as f:
            return load_csv_table(f, name)

    reader = csv.reader(source)
    try:
        header = next(reader)
    except StopIteration:
        raise CsvError("empty file: missing header row") from None
    if not header or any(h == "" for h in header):
        raise CsvError("header row has empty column names")

    raw_rows: list = []
    for lineno, row in enumerate(reader, start=2):
        if len(row) != len(header):
            raise CsvError(
                f"line {lineno}: expected {len(header)} fields, got {len(row)}"
            )
        raw_rows.append(row)

    types = [
        _infer([(h, row[i]) for row in raw_rows] or [(h, "")])
        for i, h in enumerate(header)
    ]
    rows = [
        tuple(_convert(v, t) for v, t in zip(row, types))
        for row in raw_rows
    ]
    # columns whose values are all present and distinct are usable as
    # cardinality-preserving link keys
    unique = []
    for i, h in enumerate(header):
        values = [r[i] for r in rows]
        if None not in values and len(set(values)) == len(values):
            unique.append([h])
    return TableDef(name, schema=list(zip(header, types)),
                    unique_keys=unique, rows=rows)
