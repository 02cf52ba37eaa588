"""Local execution engine over an embedded sqlite database.

Queries run on their own connection so an in-flight statement can be
interrupted from another thread.
"""

from __future__ import annotations

import sqlite3
import threading
from dataclasses import dataclass
from typing import Optional

from sheetc.scalars import ScalarType, coerce_value
from sheetc.spec_model import Catalog, TableDef

_SQL_TYPES = {
    ScalarType.NUMBER: "NUMERIC",
    ScalarType.TEXT: "TEXT",
    ScalarType.DATE: "TEXT",
    ScalarType.LOGICAL: "INTEGER",
    ScalarType.ERROR: "TEXT",
}


class QueryCancelled(Exception):
    pass


@dataclass
class Table:
    columns: list  # [(name, ScalarType)]
    rows: list  # list of tuples of runtime values

    @property
    def column_names(self) -> list:
        return [n for n, _t in self.columns]


def quote(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


class Engine:
    """One database; one connection per running query."""

    def __init__(self, path: str = ":memory:"):
        self.path = path
        self._setup = sqlite3.connect(path, check_same_thread=False)
        self._lock = threading.Lock()
        self._active: dict[object, sqlite3.Connection] = {}
        self._memory = path == ":memory:"

    def close(self) -> None:
        self._setup.close()

    def create_table(self, table: TableDef) -> None:
        cols = ", ".join(
            f"{quote(n)} {_SQL_TYPES[t]}" for n, t in table.schema
        )
        with self._lock:
            self._setup.execute(f"DROP TABLE IF EXISTS {quote(table.name)}")
            self._setup.execute(f"CREATE TABLE {quote(table.name)} ({cols})")
            if table.rows:
                marks = ", ".join("?" * len(table.schema))
                self._setup.executemany(
                    f"INSERT INTO {quote(table.name)} VALUES ({marks})",
                    [tuple(_to_db(v) for v in row) for row in table.rows],
                )
            self._setup.commit()

    def load_catalog(self, catalog: Catalog) -> None:
        for table in catalog.tables.values():
            if table.rows is not None:
                self.create_table(table)

    def _connection(self) -> sqlite3.Connection:
        if self._memory:
            return self._setup  # in-memory databases are per-connection
        return sqlite3.connect(self.path, check_same_thread=False)

    def run(self, sql: str, columns: list, token: object = None) -> Table:
        """Execute one statement; ``token`` identifies it for cancel()."""
        conn = self._connection()
        if token is not None:
            with self._lock:
                self._active[token] = conn
        try:
            cursor = conn.execute(sql)
            raw = cursor.fetchall()
        except sqlite3.OperationalError as e:
            if "interrupted" in str(e):
                raise QueryCancelled() from None
            raise
        finally:
            if token is not None:
                with self._lock:
                    self._active.pop(token, None)
            if conn is not self._setup:
                conn.close()
        rows = [
            tuple(coerce_value(v, t) for v, (_n, t) in zip(row, columns))
            for row in raw
        ]
        return Table(list(columns), rows)

    def cancel(self, token: object) -> bool:
        with self._lock:
            conn = self._active.get(token)
        if conn is None:
            return False
        conn.interrupt()
        return True


def _to_db(v):
    import datetime

    if isinstance(v, bool):
        return int(v)
    if isinstance(v, datetime.date):
        return v.isoformat()
    return v


def run_compiled(compiled, catalog: Catalog, path: str = ":memory:") -> Table:
    """Convenience: load catalog rows and execute one compiled query."""
    eng = Engine(path)
    try:
        eng.load_catalog(catalog)
        return eng.run(compiled.sql, compiled.columns)
    finally:
        eng.close()
