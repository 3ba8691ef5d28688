"""Command line entry point: ``scale-probe run|compare|list``."""
from __future__ import annotations

import argparse
import sys

from .harness import ConfigError, ExperimentError, SchemaError, compare_runs, load_config, read_table, run, schema_text


def _cmd_run(args) -> int:
    try:
        cfg = load_config(args.config)
    except (OSError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        result = run(cfg, out=args.out, jobs=args.jobs)
    except (OSError, ExperimentError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(f"{cfg.experiment}: {len(result.records.rows)} records, {len(result.fits.rows)} fit rows, "
          f"{len(result.violations)} violations")
    return 0 if result.ok else 1


def _cmd_compare(args) -> int:
    try:
        report = compare_runs(read_table(args.a), read_table(args.b), threshold=args.threshold)
    except (OSError, SchemaError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    for line in report.lines():
        print(line)
    return 0 if not report.flagged else 1


def _cmd_list(args) -> int:
    print(schema_text())
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scale-probe", description="Local finite element estimate experiments.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="run an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--out", default=None, help="output directory (overrides the config)")
    p_run.add_argument("--jobs", type=int, default=1, help="worker processes")
    p_run.set_defaults(func=_cmd_run)
    p_cmp = sub.add_parser("compare", help="compare two result CSVs")
    p_cmp.add_argument("a")
    p_cmp.add_argument("b")
    p_cmp.add_argument("--threshold", type=float, default=1e-9)
    p_cmp.set_defaults(func=_cmd_compare)
    p_list = sub.add_parser("list", help="list experiments and their CSV schemas")
    p_list.set_defaults(func=_cmd_list)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if getattr(args, "jobs", 1) < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return 2
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
