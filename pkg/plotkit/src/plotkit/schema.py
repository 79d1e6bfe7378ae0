"""Header-checked access to nearsplit CSV tables.

Every file the harness writes starts with a single provenance comment,
``# nearsplit-csv schema=<name> config=<hash12> version=<version>``, followed
by a conventional column-name row. Readers here verify the schema token and
the column list before handing rows to the renderer, so a stale or foreign
file fails loudly instead of producing a silently wrong figure.
"""
from __future__ import annotations

import csv
import re
from dataclasses import dataclass

HEADER_RE = re.compile(
    r"^# nearsplit-csv schema=([a-z0-9-]+) config=([0-9a-f]{12}) version=(\S+)$"
)

# Column contracts per schema token, exactly as the harness writes them.
KNOWN_SCHEMAS: dict[str, tuple[str, ...]] = {
    "nmse-v1": ("sweep", "axis_value", "estimator", "mean_nmse", "std_nmse", "trials"),
    "nmse-trials-v1": ("sweep", "axis_value", "trial", "estimator", "nmse"),
    "gainmap-v1": ("x_m", "y_m", "m", "gain"),
    "gainmap-markers-v1": ("kind", "m", "x_m", "y_m"),
    "fl-v1": ("round", "train_loss", "eval_nmse"),
    "overhead-v1": ("source", "xi", "t_cl", "t_fl", "ratio"),
}


@dataclass(frozen=True)
class CsvHeader:
    """Provenance carried by every harness CSV."""

    schema: str
    config_hash: str
    version: str


@dataclass(frozen=True)
class Table:
    """One parsed CSV: provenance, column names and string-valued rows."""

    header: CsvHeader
    columns: tuple[str, ...]
    rows: list[dict[str, str]]


def parse_header(line: str) -> CsvHeader:
    """Parse the provenance comment; reject anything that is not one."""
    match = HEADER_RE.match(line.rstrip("\r\n"))
    if match is None:
        raise ValueError(f"not a nearsplit CSV header: {line!r}")
    schema, config_hash, version = match.groups()
    if schema not in KNOWN_SCHEMAS:
        raise ValueError(f"unknown schema {schema!r}")
    return CsvHeader(schema=schema, config_hash=config_hash, version=version)


def read_table(path: str, expect_schema: str) -> Table:
    """Read a harness CSV and enforce its schema contract.

    Raises ValueError when the header is missing or foreign, the schema is
    not `expect_schema`, the column row deviates from the registered
    contract, a data row is ragged, or the table holds no data rows.
    """
    if expect_schema not in KNOWN_SCHEMAS:
        raise ValueError(f"unknown schema {expect_schema!r}")
    with open(path, newline="") as handle:
        first = handle.readline()
        if not first:
            raise ValueError(f"{path}: empty file")
        header = parse_header(first)
        if header.schema != expect_schema:
            raise ValueError(
                f"{path}: schema {header.schema!r} where {expect_schema!r} is required"
            )
        reader = csv.reader(handle)
        try:
            columns = tuple(next(reader))
        except StopIteration:
            raise ValueError(f"{path}: missing column row") from None
        expected = KNOWN_SCHEMAS[expect_schema]
        if columns != expected:
            raise ValueError(f"{path}: columns {columns} do not match {expected}")
        rows = []
        for row in reader:
            if not row:
                continue
            if len(row) != len(expected):
                raise ValueError(
                    f"{path}: row with {len(row)} fields where {len(expected)} expected"
                )
            rows.append(dict(zip(columns, row)))
    if not rows:
        raise ValueError(f"{path}: no data rows")
    return Table(header=header, columns=columns, rows=rows)
