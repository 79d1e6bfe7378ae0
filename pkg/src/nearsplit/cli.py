"""Command-line front end for the experiment harness.

Subcommands: `nmse-sweep`, `gain-map`, `fl-train`, `overhead`. Each starts
from a named profile (desk-scale by default), optionally overlays a JSON
config file whose keys mirror the ExperimentConfig field names, and then
applies the --seed override. Outputs are CSV files under --out.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys

from ._version import __version__
from .harness import (
    PROFILES,
    ExperimentConfig,
    config_from_json,
    config_hash,
    run_fl_experiment,
    run_gain_map,
    run_nmse_sweep,
    run_overhead_report,
)


def _load_config(args: argparse.Namespace) -> ExperimentConfig:
    config = PROFILES[args.profile]()
    if args.config is not None:
        with open(args.config) as fh:
            config = config_from_json(fh.read(), base=config)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    return config


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config overlay file")
    parser.add_argument("--seed", type=int, help="override the config seed")
    parser.add_argument("--out", default=".", help="output directory (default: .)")
    parser.add_argument(
        "--profile",
        choices=sorted(PROFILES),
        default="desk",
        help="base parameter profile (default: desk)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="nearsplit",
        description="Near-field wideband channel-estimation experiments",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in (
        ("nmse-sweep", "Monte-Carlo NMSE benchmark over an SNR or bandwidth sweep"),
        ("gain-map", "Cartesian array-gain raster around a user"),
        ("fl-train", "federated training run with overhead accounting"),
        ("overhead", "communication-overhead report only"),
    ):
        _add_common(sub.add_parser(name, help=help_text))
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = _load_config(args)
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"config hash {config_hash(config)}")
    if args.command == "nmse-sweep":
        summary, trials, _ = run_nmse_sweep(config, args.out)
        written = [summary, trials]
    elif args.command == "gain-map":
        written = list(run_gain_map(config, args.out))
    elif args.command == "fl-train":
        written = list(run_fl_experiment(config, args.out))
    else:
        written = [run_overhead_report(config, args.out)]
    for path in written:
        print(f"wrote {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
