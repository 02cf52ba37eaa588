"""Catalog assembly for the command line and the service.

A workspace is a directory of worksheet documents plus their input data:
CSV files next to the specs (or in a ``data`` sibling directory) and,
optionally, tables living in a local database file.
"""

from __future__ import annotations

import sqlite3
from pathlib import Path
from typing import Optional

from sheetc.csvload import load_csv_table
from sheetc.scalars import ScalarType
from sheetc.spec_model import Catalog, SpecError, TableDef, parse_spec

SPEC_SUFFIX = ".wks.json"

_DB_TYPES = {
    "NUMERIC": ScalarType.NUMBER,
    "INTEGER": ScalarType.NUMBER,
    "INT": ScalarType.NUMBER,
    "REAL": ScalarType.NUMBER,
    "FLOAT": ScalarType.NUMBER,
}


def db_tables(path: str) -> list:
    """Declared schemas of every table in a local database file. Numeric
    declarations map to Number; everything else is Text."""
    conn = sqlite3.connect(path)
    try:
        names = [
            r[0] for r in conn.execute(
                "SELECT name FROM sqlite_master WHERE type = 'table'"
            )
        ]
        tables = []
        for name in names:
            info = conn.execute(f'PRAGMA table_info("{name}")').fetchall()
            schema = [
                (col, _DB_TYPES.get((decl or "").upper(), ScalarType.TEXT))
                for _i, col, decl, _nn, _dv, _pk in info
            ]
            tables.append(TableDef(name, schema))
        return tables
    finally:
        conn.close()


def _csv_dirs(spec_dir: Path) -> list:
    candidates = [spec_dir, spec_dir / "data",
                  spec_dir.parent / "data", spec_dir.parent.parent / "data"]
    return [d for d in candidates if d.is_dir()]


def build_catalog(spec_dir: Path, db_path: Optional[str] = None) -> Catalog:
    """CSV files and sibling worksheets around ``spec_dir``, plus tables
    from ``db_path`` when given. First CSV occurrence of a name wins."""
    cat = Catalog(base_dir=str(spec_dir))
    if db_path:
        for table in db_tables(db_path):
            cat.add_table(table)
    for d in _csv_dirs(spec_dir):
        for csv_path in sorted(d.glob("*.csv")):
            if csv_path.stem not in cat.tables:
                cat.add_table(load_csv_table(str(csv_path), csv_path.stem))
    for path in sorted(spec_dir.glob(f"*{SPEC_SUFFIX}")):
        name = path.name[: -len(SPEC_SUFFIX)]
        try:
            cat.worksheets[name] = parse_spec(path.read_text())
        except SpecError:
            # a broken sibling only matters if something references it
            continue
    return cat


def catalog_for_spec(spec_path: Path,
                     db_path: Optional[str] = None) -> Catalog:
    return build_catalog(spec_path.resolve().parent, db_path)
