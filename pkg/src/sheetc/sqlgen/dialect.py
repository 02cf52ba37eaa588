"""Target dialect descriptions.

The ``ansi`` dialect doubles as the locally executable one (it is what
the embedded engine runs), so its date arithmetic is spelled with the
engine's date functions. The warehouse dialects are text targets.
"""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class Dialect:
    name: str
    quote_char: str = '"'
    float_type: str = "REAL"
    # EXISTS-based semijoins; when false the renderer joins against a
    # DISTINCT key list instead
    supports_semijoin_exists: bool = True
    # DATEDIFF(unit, a, b) counts unit boundaries natively
    native_datediff: bool = False
    date_literal_prefix: str = "DATE "
    backslash_strings: bool = False
    case_insensitive_like: str = "like"  # like | ilike | upper

    def quote(self, name: str) -> str:
        q = self.quote_char
        return q + name.replace(q, q + q) + q

    def string(self, value: str) -> str:
        if self.backslash_strings:
            return "'" + value.replace("\\", "\\\\").replace("'", "\\'") + "'"
        return "'" + value.replace("'", "''") + "'"


ANSI = Dialect(
    name="ansi",
    date_literal_prefix="",  # the local engine stores dates as ISO text
)

POSTGRES = Dialect(
    name="postgres",
    float_type="DOUBLE PRECISION",
    case_insensitive_like="ilike",
)

SNOWFLAKE = Dialect(
    name="snowflake",
    float_type="FLOAT",
    native_datediff=True,
    case_insensitive_like="ilike",
)

BIGQUERY = Dialect(
    name="bigquery",
    quote_char="`",
    float_type="FLOAT64",
    backslash_strings=True,
    case_insensitive_like="upper",
)

REDSHIFT = Dialect(
    name="redshift",
    float_type="FLOAT",
    supports_semijoin_exists=False,
    native_datediff=True,
    case_insensitive_like="ilike",
)

DIALECTS = {d.name: d for d in (ANSI, POSTGRES, SNOWFLAKE, BIGQUERY, REDSHIFT)}


def get_dialect(name: str) -> Dialect:
    try:
        return DIALECTS[name]
    except KeyError:
        raise ValueError(
            f"unknown dialect {name!r}; expected one of {sorted(DIALECTS)}"
        ) from None
