"""Shared access to the fixture corpus: CSV input tables plus worksheet
documents, loaded into one catalog."""

from __future__ import annotations

from pathlib import Path

from sheetc.csvload import load_csv_table
from sheetc.spec_model import Catalog, parse_spec

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"
SPEC_SUFFIX = ".wks.json"


def spec_paths() -> list:
    return sorted((FIXTURES / "specs").glob(f"*{SPEC_SUFFIX}"))


def unsupported_spec_paths() -> list:
    return sorted((FIXTURES / "specs" / "unsupported").glob(f"*{SPEC_SUFFIX}"))


def spec_name(path: Path) -> str:
    return path.name[: -len(SPEC_SUFFIX)]


def load_catalog() -> Catalog:
    cat = Catalog()
    for csv_path in sorted((FIXTURES / "data").glob("*.csv")):
        cat.add_table(load_csv_table(str(csv_path), csv_path.stem))
    for path in spec_paths():
        cat.worksheets[spec_name(path)] = parse_spec(path.read_text())
    return cat
