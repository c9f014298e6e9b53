"""Command-line entry point: ``trendsbd simulate|detect|evaluate|report``.

Failures print one line ``error: <Class>: <message>`` to stderr and exit 2.
``SBD_LOG`` sets the log level (``debug``, ``info``, ``warning``...).
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from pathlib import Path

from . import __version__
from .netsim.scenario import load_scenario
from .pipeline import REPORT_COLUMNS, evaluate, report, simulate
from .sbd.detector import DetectorConfig, run_detector
from .sbd.traceio import format_verdicts, read_trace, write_verdicts

log = logging.getLogger("trendsbd")


class UsageError(ValueError):
    pass


def _setup_logging():
    level = os.environ.get("SBD_LOG", "warning").upper()
    if not isinstance(logging.getLevelName(level), int):
        raise UsageError(f"SBD_LOG: unknown level {level.lower()!r}")
    logging.basicConfig(level=level, stream=sys.stderr, format="%(levelname)s %(name)s: %(message)s")


def cmd_simulate(args) -> int:
    if not args.scenario or not args.out:
        raise UsageError("simulate needs --scenario and --out")
    scenario = load_scenario(args.scenario)
    files = simulate(scenario, args.out, args.seed)
    print(f"wrote {len(files)} files to {args.out}")
    return 0


def cmd_detect(args) -> int:
    if len(args.trace) != 2:
        raise UsageError(f"detect needs exactly two --trace files, got {len(args.trace)}")
    config = DetectorConfig.load(args.config) if args.config else DetectorConfig()
    a, b = (read_trace(p) for p in args.trace)
    if not (a.t and b.t and max(a.t[0], b.t[0]) < min(a.t[-1], b.t[-1])):
        raise UsageError("traces do not overlap in time")
    rows = run_detector(a, b, config)
    if args.out:
        write_verdicts(rows, args.out)
    else:
        sys.stdout.write(format_verdicts(rows))
    return 0


def cmd_evaluate(args) -> int:
    if not args.run_dirs:
        raise UsageError("evaluate needs a run directory")
    for d in args.run_dirs:
        rows = evaluate(d)
        print((Path(d) / "report.txt").read_text(), end="")
        log.info("%s: %d metrics", d, len(rows))
    return 0


def cmd_report(args) -> int:
    table = report(args.run_dirs)
    fh = open(args.out, "w", newline="") if args.out else sys.stdout
    try:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        w.writerows(table)
    finally:
        if args.out:
            fh.close()
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="trendsbd", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", help="run a scenario and write a run directory")
    s.add_argument("--scenario", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int)
    s.set_defaults(fn=cmd_simulate)

    d = sub.add_parser("detect", help="per-window shared-bottleneck verdicts for two traces")
    d.add_argument("--trace", action="append", default=[], required=True)
    d.add_argument("--config")
    d.add_argument("--out")
    d.set_defaults(fn=cmd_detect)

    e = sub.add_parser("evaluate", help="fairness, detection, and delay-law metrics of run directories")
    e.add_argument("run_dirs", nargs="+")
    e.set_defaults(fn=cmd_evaluate)

    r = sub.add_parser("report", help="one row per evaluated run")
    r.add_argument("run_dirs", nargs="+")
    r.add_argument("--out")
    r.set_defaults(fn=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        _setup_logging()
        return args.fn(args)
    except (ValueError, RuntimeError, OSError, KeyError) as exc:
        msg = str(exc).replace("\n", " ")
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
