"""Command line entry point.

    barronrc run CONFIG.json [--out DIR] [--threads K]
    barronrc slope RESULTS.csv --x COL --y COL [--semilog]
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

from .experiments import fit_slope, run_experiment, write_results


def _cmd_run(args) -> int:
    cfg = json.loads(Path(args.config).read_text())
    if args.threads < 1:
        raise ValueError("--threads must be >= 1")
    out = args.out or cfg.get("out") or f"results/{cfg.get('experiment', 'run')}"
    rows, summary = run_experiment(cfg, threads=args.threads)
    csv_path, json_path = write_results(rows, summary, out)
    status = "PASS" if summary.get("passed") else "FAIL"
    print(f"{summary['experiment']}: {status} ({len(rows)} rows) -> {csv_path}, {json_path}")
    return 0


def _cmd_slope(args) -> int:
    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for col in (args.x, args.y):
        if rows and col not in rows[0]:
            raise ValueError(f"column {col!r} not in {args.csv}")
    pairs = [(float(r[args.x]), float(r[args.y])) for r in rows if r[args.x] != "" and r[args.y] != ""]
    slope, se = fit_slope([p[0] for p in pairs], [p[1] for p in pairs], semilog=args.semilog)
    print(json.dumps({"slope": slope, "stderr": se, "points": len(pairs)}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="barronrc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config")
    run.add_argument("config")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--threads", type=int, default=1, help="worker threads")
    run.set_defaults(func=_cmd_run)
    slope = sub.add_parser("slope", help="fit a log-log slope between two CSV columns")
    slope.add_argument("csv")
    slope.add_argument("--x", required=True)
    slope.add_argument("--y", required=True)
    slope.add_argument("--semilog", action="store_true", help="use linear x and log y")
    slope.set_defaults(func=_cmd_slope)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
