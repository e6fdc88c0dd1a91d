"""Command-line entry point: ``truncdefect <command> [--config F] [--out D] [--seed N] [--jobs N]``.

Exit codes: 0 when nothing failed, 1 when some check failed, 2 for an
invalid configuration, 3 when a solver raised an error.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigInvalid, DefectError
from .harness import COMMANDS, ExperimentConfig, SCHEMAS, report, run


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="truncdefect",
                                     description="Truncated contact defects and saddle-node passage times.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, exp in COMMANDS.items():
        p = sub.add_parser(name, help=f"run the {exp.value} experiment")
        p.add_argument("--config", type=Path, help="JSON configuration file")
        p.add_argument("--out", type=Path, help="output directory (default out/<command>)")
        p.add_argument("--seed", type=int, help="seed for randomised consistency checks")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for parameter sweeps")
        p.add_argument("--show-schema", action="store_true", help="print the parameter defaults and exit")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    exp = COMMANDS[args.command]
    if args.show_schema:
        print(json.dumps({k: p.default for k, p in SCHEMAS[exp].items()}, indent=2))
        return 0
    out = args.out if args.out is not None else Path("out") / args.command
    try:
        if args.config is not None:
            cfg = ExperimentConfig.from_json(args.config, experiment=exp, output_dir=args.out, seed=args.seed)
            if args.out is None and cfg.output_dir == Path("out"):
                cfg.output_dir = out
        else:
            cfg = ExperimentConfig.from_dict({}, experiment=exp, output_dir=out, seed=args.seed)
    except ConfigInvalid as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        for line in exc.errors:
            print(f"  {line}", file=sys.stderr)
        return 2
    if args.jobs < 1:
        print("--jobs must be at least 1", file=sys.stderr)
        return 2
    try:
        if exp.value == "Acceptance":
            from .acceptance import run_acceptance

            records = run_acceptance(cfg, jobs=args.jobs,
                                     on_record=lambda r: report([r]) and None)
            code = 1 if any(r.status == "FAIL" for r in records) else 0
        else:
            records = run(cfg, jobs=args.jobs)
            code = report(records)
    except ConfigInvalid as exc:
        print(f"invalid configuration: {exc}", file=sys.stderr)
        for line in exc.errors:
            print(f"  {line}", file=sys.stderr)
        return 2
    except DefectError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 3
    print(f"results written to {cfg.output_dir}")
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
