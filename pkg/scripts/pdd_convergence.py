"""PDD behaviour on small instances.

Default: print the outer-loop trace (violation h, penalty rho, AL value) of one
run and compare the final selection against exhaustive search.

``--study``: fraction of seeds where PDD's rounded selection is within 2% of
the exhaustive optimum, for several initial penalties and both
initializations (Fixed Index mask, uniform interior point).

    python3 scripts/pdd_convergence.py --seed 3
    python3 scripts/pdd_convergence.py --study --seeds 20
"""

import argparse

import numpy as np

from rdars.channels import TOPOLOGY_1, PathLossParams, RicianParams, dbm_to_watt, generate_channel_set, iid_channel_set
from rdars.model import SystemDims, random_phases
from rdars.pdd import PDDConfig, run_pdd
from rdars.schemes import exhaustive_search, fixed_index_selection


def instance(family, s, n, a):
    dims = SystemDims(4, 4, n, a)
    rng = np.random.default_rng([s, 99])
    if family == "iid":
        ch = iid_channel_set(dims, rng)
    else:
        noise = float(dbm_to_watt(-90.0))
        ch = generate_channel_set(dims, TOPOLOGY_1, PathLossParams(), RicianParams(), s,
                                  power=float(dbm_to_watt(10.0)) / 4, noise_bs=noise, noise_conn=noise)
    return dims, ch, random_phases(n, rng)


def trace(args):
    dims, ch, theta = instance(args.family, args.seed, args.n, args.a)
    cfg = PDDConfig(rho0=args.rho0, update_theta=False)
    res = run_pdd(ch, dims, cfg, (fixed_index_selection(args.n, args.a), theta))
    print(f"{'outer':>5s} {'sweeps':>6s} {'h':>10s} {'rho':>10s} {'AL':>12s} dual")
    for d in res.diagnostics:
        print(f"{d['iter']:5d} {d['sweeps']:6d} {d['h']:10.2e} {d['rho']:10.2e} {d['al']:12.6g} {'y' if d['dual_step'] else '-'}")
    best_sel, best = exhaustive_search(ch, dims, theta)
    print(f"PDD selection {res.selection.indices.tolist()} f={res.objective_exact:.6g} converged={res.converged}")
    print(f"exhaustive    {best_sel.indices.tolist()} f={best:.6g} ratio={res.objective_exact / best:.4f}")


def study(args):
    rhos = [1e1, 1e3, 1e4, 1e5]
    print(f"family={args.family} N={args.n} a={args.a} seeds={args.seeds}; share within 2% of exhaustive")
    for init in ("fixed", "interior"):
        for rho0 in rhos:
            hits = 0
            for s in range(args.seeds):
                dims, ch, theta = instance(args.family, s, args.n, args.a)
                if init == "fixed":
                    res = run_pdd(ch, dims, PDDConfig(rho0=rho0, update_theta=False),
                                  (fixed_index_selection(args.n, args.a), theta))
                else:
                    res = _run_interior(ch, dims, rho0, theta)
                _, best = exhaustive_search(ch, dims, theta)
                hits += res.objective_exact <= 1.02 * best
            print(f"  init={init:8s} rho0={rho0:8.0e}: {hits}/{args.seeds}")


def _run_interior(ch, dims, rho0, theta):
    x_mid = np.full(ch.n_elements, dims.n_connected / ch.n_elements)
    return run_pdd(ch, dims, PDDConfig(rho0=rho0, update_theta=False),
                   (fixed_index_selection(ch.n_elements, dims.n_connected), theta), x_start=x_mid)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--family", choices=["iid", "model"], default="iid")
    ap.add_argument("--n", type=int, default=8)
    ap.add_argument("--a", type=int, default=2)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--rho0", type=float, default=10.0)
    ap.add_argument("--study", action="store_true")
    ap.add_argument("--seeds", type=int, default=20)
    args = ap.parse_args()
    study(args) if args.study else trace(args)


if __name__ == "__main__":
    main()
