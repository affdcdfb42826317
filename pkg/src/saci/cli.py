"""Command line entry point.

    saci <command> [-c CONFIG] [-s KEY=VALUE ...]

Commands: features, score, correlate, saci, evaluate, synth.
Exit codes: 0 success, 1 usage/config error, 2 data error, 3 analysis failure.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys

from . import pipeline
from .config import ConfigError, load_config
from .errors import AnalysisError, DataError

COMMANDS = {
    "features": pipeline.run_features,
    "score": pipeline.run_score,
    "correlate": pipeline.run_correlate,
    "saci": pipeline.run_saci,
    "evaluate": pipeline.run_evaluate,
    "synth": pipeline.run_synth,
}

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_ANALYSIS = 0, 1, 2, 3

LOG_ENV = "SACI_LOG_LEVEL"


def _override(text: str) -> tuple[str, str]:
    key, sep, value = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected KEY=VALUE, got {text!r}")
    return key.strip(), value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="saci", description="Lagged-correlation causal analysis toolkit")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("-c", "--config", help="key = value configuration file")
    parser.add_argument("-s", "--set", dest="overrides", action="append", type=_override, default=[],
                        metavar="KEY=VALUE", help="override a config key (repeatable)")
    parser.add_argument("-o", "--output", help="output directory (same as -s output=DIR)")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get(LOG_ENV, "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    log = logging.getLogger("saci")
    try:
        overrides = dict(args.overrides)
        if args.output:
            overrides["output"] = args.output
        cfg = load_config(args.config, overrides)
        cfg.validate()
        paths = COMMANDS[args.command](cfg)
    except ConfigError as exc:
        log.error("%s", exc)
        print(f"saci: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except AnalysisError as exc:
        print(f"saci: analysis failed: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except (DataError, OSError, ValueError) as exc:
        print(f"saci: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    for name, path in paths.items():
        print(f"{name}\t{path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
