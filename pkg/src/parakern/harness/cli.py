"""Command-line entry point.

    parakern run CONFIG.json [--out DIR] [--seed N] [--threads K]
                             [--override key=value ...]
    parakern list

Exit status 0 when every check in the report passes, 1 otherwise, 2 on
configuration errors.  The run writes report.json and tables/*.csv into the
output directory (default runs/<experiment>-seed<seed>).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..errors import ConfigError
from .config import ExperimentConfig
from .experiments import REGISTRY, run_experiment


def build_parser():
    ap = argparse.ArgumentParser(prog="parakern",
                                 description="parabolic kernel experiment harness")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run one experiment from a JSON config")
    run.add_argument("config", help="path to the configuration JSON")
    run.add_argument("--out", default=None, help="output directory")
    run.add_argument("--seed", type=int, default=None, help="override the RNG seed")
    run.add_argument("--threads", type=int, default=None,
                     help="worker threads for family sweeps")
    run.add_argument("--override", action="append", default=[],
                     metavar="KEY=VALUE", help="dotted-path config override")
    sub.add_parser("list", help="print the experiment registry")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "list":
        for name in sorted(REGISTRY):
            print(f"{name:18s} {REGISTRY[name][1]}")
        return 0
    try:
        cfg = ExperimentConfig.from_json(args.config)
        if args.seed is not None:
            cfg.data["seed"] = args.seed
        if args.threads is not None:
            cfg.data["threads"] = args.threads
        for item in args.override:
            key, _, value = item.partition("=")
            if not _:
                raise ConfigError(f"override {item!r} is not KEY=VALUE")
            cfg.override(key, value)
        cfg.validate(REGISTRY)
    except (OSError, ValueError, ConfigError) as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    outdir = args.out or Path("runs") / f"{cfg.experiment}-seed{cfg.seed}"
    report = run_experiment(cfg)
    for line in report.summary_lines():
        print(line)
    path = report.write(outdir)
    print(f"report: {path}")
    return 0 if report.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())
