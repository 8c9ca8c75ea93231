"""Command-line entry point: ``rdars run --config <path> [...]``."""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys

from .bench import ConfigError, emit_csv, parse_config, run_experiment, summarize


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rdars", description="RDARS uplink sum-MSE Monte-Carlo benchmark")
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run an experiment config and write a CSV")
    run.add_argument("--config", required=True, help="YAML experiment config")
    run.add_argument("--trials", type=int, help="override the number of trials")
    run.add_argument("--seed", type=int, help="override base_seed")
    run.add_argument("--out", help="override output_path")
    run.add_argument("--profile", choices=["desk", "paper"], help="apply a size/trials profile")
    run.add_argument("--workers", type=int, default=1, help="worker processes (output is order-independent)")
    run.add_argument("--quiet", action="store_true", help="do not print the summary table")
    return parser


def _error(kind: str, message: str, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}), file=sys.stderr)
    return 2


def cmd_run(args) -> int:
    cfg = parse_config(args.config)
    if args.profile:
        cfg = cfg.with_profile(args.profile)
    changes = {}
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.out is not None:
        changes["output_path"] = args.out
    if changes:
        cfg = dataclasses.replace(cfg, **changes)
    if args.workers < 1:
        raise ConfigError([f"--workers must be >= 1, got {args.workers}"])
    records = run_experiment(cfg, workers=args.workers)
    emit_csv(records, cfg.output_path)
    if not args.quiet:
        for (scheme, value), mean in summarize(records).items():
            print(f"{scheme:>12s}  {cfg.sweep_axis}={value:g}  mean ANMSE={mean:.6g}")
        print(f"wrote {len(records)} records to {cfg.output_path}")
    return 0


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return cmd_run(args)
    except ConfigError as exc:
        return _error("config", str(exc), problems=exc.problems)
    except OSError as exc:
        return _error("io", str(exc))
    except Exception as exc:  # last-resort machine-readable failure
        return _error(type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
