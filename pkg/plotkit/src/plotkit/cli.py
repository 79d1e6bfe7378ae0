"""Command line entry point: ``plotkit <kind> --in <csv> --out <img>``."""
from __future__ import annotations

import argparse
import sys

from .render import KINDS, PlotSpec, render


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plotkit",
        description="Render nearsplit CSV outputs as figures.",
    )
    parser.add_argument("kind", choices=KINDS, help="figure kind")
    parser.add_argument(
        "--in", dest="input_csv", required=True, metavar="CSV",
        help="input table written by the nearsplit harness",
    )
    parser.add_argument(
        "--out", dest="output_path", required=True, metavar="IMG",
        help="output image path (format from the extension)",
    )
    parser.add_argument("--x-label", default=None, help="x axis caption override")
    parser.add_argument("--y-label", default=None, help="y axis caption override")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    spec = PlotSpec(
        input_csv=args.input_csv,
        kind=args.kind,
        output_path=args.output_path,
        x_label=args.x_label,
        y_label=args.y_label,
    )
    try:
        path = render(spec)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
