"""Command line: ``qtcrystal run|sweep|validate|schema``.

Exit codes: 0 success, 1 configuration error, 2 numerical guard failure,
3 internal error.
"""

from __future__ import annotations

import argparse
import sys

from .config import ConfigError, load_scenario
from .runner import (
    EXIT_CONFIG,
    EXIT_INTERNAL,
    EXIT_OK,
    SCHEMA_PATH,
    WORKERS_ENV,
    run_scenario,
    sweep,
)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qtcrystal", description=__doc__.splitlines()[0])
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one scenario")
    run.add_argument("config")
    run.add_argument("--out", help="output directory (overrides 'output' in the file)")

    sw = sub.add_parser("sweep", help="run a scenario over a parameter grid")
    sw.add_argument("config")
    sw.add_argument("--grid", action="append", required=True, metavar="KEY=V1,V2,...",
                    help="dotted parameter path and values, e.g. ring.h=0.5,1,2; repeatable")
    sw.add_argument("--out")
    sw.add_argument("--workers", type=int, default=None,
                    help=f"parallel grid points (default: ${WORKERS_ENV} or 1)")

    val = sub.add_parser("validate", help="check a scenario file without running it")
    val.add_argument("config")

    sub.add_parser("schema", help="print the JSON schema of verdicts.json")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return run_scenario(args.config, args.out)
        if args.command == "sweep":
            return sweep(args.config, args.grid, args.out, args.workers)
        if args.command == "validate":
            sc = load_scenario(args.config)
            print(f"{args.config}: ok (model {sc.model}, hash {sc.hash()[:12]})")
            return EXIT_OK
        if args.command == "schema":
            sys.stdout.write(SCHEMA_PATH.read_text())
            return EXIT_OK
    except ConfigError as exc:
        for line in exc.messages:
            print(line, file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001
        print(f"internal error: {exc!r}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
