"""Render nearsplit benchmark CSVs into publication-style figures.

The package is a read-only consumer of the harness outputs: every table is
validated against its embedded schema header before anything is drawn, and
marker coordinates come verbatim from the CSVs, never recomputed here.
"""
from .render import KINDS, PlotSpec, build_figure, render
from .schema import KNOWN_SCHEMAS, CsvHeader, Table, parse_header, read_table

__version__ = "0.1.0"

__all__ = [
    "KINDS",
    "KNOWN_SCHEMAS",
    "CsvHeader",
    "PlotSpec",
    "Table",
    "build_figure",
    "parse_header",
    "read_table",
    "render",
]
