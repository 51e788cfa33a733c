"""Command line entry point: ``toricquant <command> --config FILE --out DIR [--force]``."""
from __future__ import annotations

import argparse
import logging
import sys

from .errors import ConfigError, NumericalFailure, PositivityError
from .experiments import COMMANDS, RUNNERS, ExperimentConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def build_parser():
    p = argparse.ArgumentParser(prog="toricquant", description="Toric quantization convergence experiments.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name, help=f"run the {name} stage")
        sp.add_argument("--config", required=True, help="JSON experiment config")
        sp.add_argument("--out", required=True, help="output root; results go to OUT/<config_hash>/<command>")
        sp.add_argument("--force", action="store_true", help="recompute even on a cache hit")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = ExperimentConfig.load(args.config)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        res = RUNNERS[args.command](cfg, args.out, force=args.force)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, PositivityError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    state = "cached" if res.cached else "computed"
    print(f"{args.command}: {state} -> {res.out_dir}")
    if res.errors:
        print(f"{res.errors} row(s) failed; see the error column", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
