"""Command-line entry point.

Subcommands:
    run <config>        execute an experiment config; exit 0 on full success,
                        3 when some runs failed, 2 on config errors
    summarize <manifest>  print the cross-method comparison table
    validate <config>   schema-check a config without running it

The output root is taken from --output-root, then the DDLQR_OUTPUT_ROOT
environment variable, then the config, defaulting to ./runs.
"""

from __future__ import annotations

import argparse
import sys

from .exceptions import ConfigError
from .harness import has_failures, load_config, run_experiment, summarize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_PARTIAL = 3


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="ddlqr", description="Data-driven LQR policy-iteration experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="execute an experiment config")
    p_run.add_argument("config")
    p_run.add_argument("--output-root", default=None)
    p_run.add_argument("--workers", type=int, default=None)

    p_sum = sub.add_parser("summarize", help="summarize a completed manifest")
    p_sum.add_argument("manifest")

    p_val = sub.add_parser("validate", help="validate a config file")
    p_val.add_argument("config")

    args = parser.parse_args(argv)
    try:
        if args.command == "validate":
            cfg = load_config(args.config)
            print(f"config ok: {cfg.name} ({len(cfg.runs)} runs)")
            return EXIT_OK
        if args.command == "run":
            manifest = run_experiment(args.config, output_root=args.output_root,
                                      max_workers=args.workers)
            print(f"manifest: {manifest}")
            return EXIT_PARTIAL if has_failures(manifest) else EXIT_OK
        if args.command == "summarize":
            print(summarize(args.manifest))
            return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
