"""Run one sweep config and print a mean-ANMSE table (schemes x sweep values).

    python3 scripts/sweep.py configs/desk_power.yaml --trials 10
    python3 scripts/sweep.py configs/desk_rician.yaml --out results/rician.csv
"""

import argparse
import dataclasses
import time

from rdars.bench import emit_csv, parse_config, run_experiment, summarize


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--trials", type=int)
    ap.add_argument("--connected", type=int, help="override n_connected")
    ap.add_argument("--out")
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args()

    cfg = parse_config(args.config)
    if args.trials:
        cfg = dataclasses.replace(cfg, trials=args.trials)
    if args.connected is not None:
        cfg = dataclasses.replace(cfg, dims=cfg.dims.with_connected(args.connected))
    t0 = time.perf_counter()
    records = run_experiment(cfg, workers=args.workers)
    elapsed = time.perf_counter() - t0
    if args.out:
        emit_csv(records, args.out)

    table = summarize(records)
    values = sorted(cfg.sweep_values)
    print(f"{cfg.sweep_axis:>14s} " + " ".join(f"{v:>11g}" for v in values))
    for scheme in cfg.schemes:
        row = [table.get((scheme.value, v), float("nan")) for v in values]
        print(f"{scheme.value:>14s} " + " ".join(f"{x:11.4e}" for x in row))
    n_err = sum(bool(r.error) for r in records)
    print(f"{len(records)} records, {n_err} failed, {elapsed:.1f}s")


if __name__ == "__main__":
    main()
