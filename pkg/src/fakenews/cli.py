"""Command-line entry point: ``fakenews <scenario> [--config PATH] [--seed N] ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config, parse_config
from .harness import run_scenario

COMMANDS = {
    "referendum": "single linear fake-news item before a yes/no vote",
    "election": "damped fake news released at Poisson times",
    "flip-prob": "Monte Carlo fraction of elections flipped by fake news",
    "micro": "election microstructure vote shares averaged over runs",
    "filter": "apply the Category I/II/III filters to an eta CSV",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fakenews", description="Fake news in referendums and elections.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, help_text in COMMANDS.items():
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", help="JSON scenario config")
        p.add_argument("--seed", type=int, help="master seed (64-bit unsigned)")
        p.add_argument("--threads", type=int, help="worker processes")
        p.add_argument("--out", help="output directory")
        p.add_argument("--plot", action="store_true", help="also write SVG figures")
        p.add_argument("--print-config", action="store_true", help="print the resolved config and exit")
        if name != "filter":
            p.add_argument("--runs", type=int, help="number of Monte Carlo runs")
        else:
            p.add_argument("--input", help="CSV with columns t,eta[,f]")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    overrides = {"seed": args.seed, "threads": args.threads, "out": args.out}
    if args.command == "filter":
        overrides["input"] = args.input
    else:
        overrides["n_runs"] = args.runs
    try:
        if args.config:
            cfg = load_config(args.config, args.command, overrides)
        else:
            cfg = parse_config("", args.command, overrides)
    except (ConfigError, OSError) as exc:
        print(f"fakenews: config error: {exc}", file=sys.stderr)
        return 2
    if args.print_config:
        print(json.dumps(cfg.to_dict(), indent=2))
        return 0
    try:
        result = run_scenario(cfg, plot=args.plot)
    except (OSError, ValueError) as exc:
        print(f"fakenews: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(result.summary, indent=2))
    print(f"manifest: {result.manifest}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
