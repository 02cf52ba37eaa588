"""Command line: compile worksheets, run them on a local database,
check them against the reference interpreter, serve the HTTP API, and
load CSV files."""

from __future__ import annotations

import csv
import json
import sys
import time
from pathlib import Path
from typing import Optional

import click

from sheetc.compiler import compile_spec
from sheetc.engine import Engine, Table
from sheetc.errors import UnsupportedQuery
from sheetc.options import Page
from sheetc.oracle import evaluate_spec
from sheetc.runner.explain import STAGES, explain
from sheetc.runner.workspace import catalog_for_spec
from sheetc.spec_model import SpecError
from sheetc.sqlgen.dialect import DIALECTS

_DIALECT = click.option("--dialect", default="ansi",
                        type=click.Choice(sorted(DIALECTS)),
                        show_default=True)
_DB = click.option("--db", envvar="SHEETC_DB", default=None,
                   help="Database file (default: in-memory; env SHEETC_DB).")
_PAGE = click.option("--page", "page_text", default=None,
                     metavar="LIMIT[,OFFSET]",
                     help="Row window of the result.")


def _parse_page(text: Optional[str]) -> Optional[Page]:
    if text is None:
        return None
    parts = text.split(",")
    try:
        limit = int(parts[0])
        offset = int(parts[1]) if len(parts) > 1 else 0
    except ValueError:
        raise click.BadParameter(f"expected LIMIT[,OFFSET], got {text!r}")
    return Page(limit=limit, offset=offset)


def _parse_bindings(pairs: tuple) -> dict:
    out = {}
    for pair in pairs:
        name, _sep, value = pair.partition("=")
        if not _sep:
            raise click.BadParameter(f"expected NAME=VALUE, got {pair!r}")
        try:
            out[name] = json.loads(value)
        except json.JSONDecodeError:
            out[name] = value
    return out


def _write_table(table: Table, as_json: bool) -> None:
    if as_json:
        doc = {
            "columns": [{"name": n, "type": t.value} for n, t in table.columns],
            "rows": [[_json_value(v) for v in row] for row in table.rows],
        }
        click.echo(json.dumps(doc, indent=2))
        return
    writer = csv.writer(sys.stdout)
    writer.writerow(table.column_names)
    for row in table.rows:
        writer.writerow(["" if v is None else _json_value(v) for v in row])


def _json_value(v):
    import datetime

    if isinstance(v, datetime.date):
        return v.isoformat()
    return v


def _fail(exc: Exception) -> None:
    click.echo(f"error: {exc}", err=True)
    sys.exit(2 if isinstance(exc, UnsupportedQuery) else 1)


@click.group()
def main() -> None:
    """Worksheet-to-SQL compiler."""


@main.command("compile")
@click.argument("spec", type=click.Path(exists=True, path_type=Path))
@_DIALECT
@_DB
@_PAGE
@click.option("--explain", "stage", default=None,
              type=click.Choice(STAGES),
              help="Dump an intermediate stage instead of SQL.")
@click.option("--param", "params", multiple=True, metavar="NAME=VALUE")
def compile_command(spec: Path, dialect: str, db: Optional[str],
                    page_text: Optional[str], stage: Optional[str],
                    params: tuple) -> None:
    """Compile SPEC and print the SQL statement."""
    catalog = catalog_for_spec(spec, db)
    started = time.perf_counter()
    try:
        compiled = compile_spec(spec.read_text(), catalog,
                                bindings=_parse_bindings(params),
                                dialect=dialect,
                                page=_parse_page(page_text))
    except (SpecError, UnsupportedQuery, ValueError) as exc:
        _fail(exc)
    elapsed_ms = (time.perf_counter() - started) * 1000.0
    for name, ds in compiled.diagnostics.items():
        for d in ds:
            click.echo(f"warning: [{name}]: {d.message}", err=True)
    click.echo(explain(compiled, stage) if stage else compiled.sql)
    click.echo(f"compiled in {elapsed_ms:.1f} ms", err=True)


@main.command("run")
@click.argument("spec", type=click.Path(exists=True, path_type=Path))
@_DB
@_PAGE
@click.option("--param", "params", multiple=True, metavar="NAME=VALUE")
@click.option("--json", "as_json", is_flag=True, help="JSON instead of CSV.")
def run_command(spec: Path, db: Optional[str], page_text: Optional[str],
                params: tuple, as_json: bool) -> None:
    """Compile SPEC, execute it locally, and print the result rows."""
    catalog = catalog_for_spec(spec, db)
    try:
        compiled = compile_spec(spec.read_text(), catalog,
                                bindings=_parse_bindings(params),
                                page=_parse_page(page_text))
    except (SpecError, UnsupportedQuery, ValueError) as exc:
        _fail(exc)
    engine = Engine(db or ":memory:")
    try:
        engine.load_catalog(catalog)
        table = engine.run(compiled.sql, compiled.columns)
    finally:
        engine.close()
    _write_table(table, as_json)


@main.command("oracle")
@click.argument("spec", type=click.Path(exists=True, path_type=Path))
@_DB
@_PAGE
@click.option("--param", "params", multiple=True, metavar="NAME=VALUE")
@click.option("--json", "as_json", is_flag=True, help="JSON instead of CSV.")
def oracle_command(spec: Path, db: Optional[str], page_text: Optional[str],
                   params: tuple, as_json: bool) -> None:
    """Evaluate SPEC with the reference interpreter (no SQL engine)."""
    catalog = catalog_for_spec(spec, db)
    try:
        table = evaluate_spec(spec.read_text(), catalog,
                              bindings=_parse_bindings(params),
                              page=_parse_page(page_text))
    except (SpecError, UnsupportedQuery, ValueError) as exc:
        _fail(exc)
    _write_table(table, as_json)


@main.command("serve")
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True)
@click.option("--specs", "spec_dir", default=".", show_default=True,
              type=click.Path(exists=True, file_okay=False, path_type=Path),
              help="Directory of worksheet documents and CSV inputs.")
@_DB
def serve_command(host: str, port: int, spec_dir: Path,
                  db: Optional[str]) -> None:
    """Serve the HTTP/JSON API."""
    import uvicorn

    from sheetc.runner.service import create_app
    from sheetc.runner.workspace import build_catalog

    app = create_app(build_catalog(spec_dir, db), db_path=db)
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.command("load-csv")
@click.argument("path", type=click.Path(exists=True, path_type=Path))
@click.option("--name", default=None, help="Table name (default: file stem).")
@_DB
def load_csv_command(path: Path, name: Optional[str],
                     db: Optional[str]) -> None:
    """Infer a schema from a CSV file and load it into the database."""
    from sheetc.csvload import CsvError, InferenceConflict, load_csv_table

    try:
        table = load_csv_table(str(path), name or path.stem)
    except (CsvError, InferenceConflict) as exc:
        _fail(exc)
    if db:
        engine = Engine(db)
        try:
            engine.create_table(table)
        finally:
            engine.close()
    for attr, t in table.schema:
        click.echo(f"{attr}: {t.value}")


if __name__ == "__main__":
    main()
