"""Command-line entry point: ``vbag run | scenarios | validate``."""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .errors import ConfigError, VbagError
from .report import write_csv, write_report
from .scenarios import SCENARIOS, load_config, run_scenario

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vbag", description="Bagged mean-field variational Bayes experiments.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario from a config file")
    run.add_argument("--config", required=True, help="YAML or JSON scenario config")
    run.add_argument("--seed", type=int, default=None, help="override the config seed")
    run.add_argument("--workers", type=int, default=1, help="parallel worker processes")
    run.add_argument("--out", default=None, help="output directory (overrides output_path)")

    sub.add_parser("scenarios", help="list scenario names")

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "scenarios":
        print("\n".join(SCENARIOS))
        return EXIT_OK
    try:
        overrides = {"seed": getattr(args, "seed", None), "output_path": getattr(args, "out", None)}
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.command == "validate":
        print(f"{args.config}: ok ({cfg.scenario})")
        return EXIT_OK

    try:
        report, tables = run_scenario(cfg, workers=args.workers)
        out = Path(cfg.output_path)
        path = write_report(report, out / f"{cfg.scenario}.json")
        for stem, rows in tables.items():
            write_csv(rows, out / f"{cfg.scenario}_{stem}.csv")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (VbagError, OSError) as exc:
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
