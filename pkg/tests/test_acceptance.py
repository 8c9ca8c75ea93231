"""End-to-end acceptance checks; each prints one PASS/FAIL line in the terminal summary.

Criteria 8 and 9 run the desk-scale Monte-Carlo sweeps (about 15 minutes in
total on one core).
"""

import dataclasses
import itertools
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES, random_instance
from rdars.bench import parse_config, run_experiment, summarize
from rdars.channels import TOPOLOGY_1, PathLossParams, RicianParams, dbm_to_watt, generate_channel_set
from rdars.greedy import (
    commit_selection,
    delta_gain,
    greedy_mode_select,
    init_greedy,
    phase_optimize_p9,
    select_next,
)
from rdars.model import (
    ModeSelection,
    Receiver,
    SystemDims,
    approx_objective,
    hermitian_inv,
    mse_matrix,
    optimal_receiver,
    random_phases,
    reduced_objective,
    reflect_channel,
    relaxed_objective,
)
from rdars.pdd import PDDConfig, run_pdd
from rdars.schemes import exhaustive_search, fixed_index_selection, los_closed_form, siso_closed_form
from rdars.subsolvers import build_mm_scratch, mm_phase_step, project_ball_nonneg

ROOT = Path(__file__).resolve().parent.parent
NOISE = float(dbm_to_watt(-90.0))


def report(num, ok, detail):
    ACCEPTANCE_LINES.append((num, bool(ok), detail))
    print(f"criterion {num}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def model_instance(dims, s, kappa=0.75, power_dbm=10.0):
    return generate_channel_set(
        dims, TOPOLOGY_1, PathLossParams(), RicianParams(kappa), s,
        power=float(dbm_to_watt(power_dbm)) / dims.n_users, noise_bs=NOISE, noise_conn=NOISE,
    )


def test_1_receiver_optimality():
    t0 = time.perf_counter()
    worst_rel, worst_drop = 0.0, -np.inf
    rng = np.random.default_rng(2024)
    for s in range(100):
        _, ch, theta, sel = random_instance(s, n_r=4, m=2, n=8, a=2)
        rx = optimal_receiver(ch, sel, theta)
        tr = np.trace(mse_matrix(ch, sel, theta, rx)).real
        f = reduced_objective(ch, sel, theta)
        worst_rel = max(worst_rel, abs(tr - f) / f)
        for _ in range(20):
            d = rng.standard_normal(rx.w.shape) + 1j * rng.standard_normal(rx.w.shape)
            d *= 1e-3 / np.linalg.norm(d)
            tr_p = np.trace(mse_matrix(ch, sel, theta, Receiver(rx.w + d, 4))).real
            worst_drop = max(worst_drop, tr - tr_p)
    dt = time.perf_counter() - t0
    ok = worst_rel <= 1e-9 and worst_drop <= 1e-12 and dt < 5
    report(1, ok, f"max rel |TrMSE - f| = {worst_rel:.2e}, max decrease under perturbation = {worst_drop:.2e}, {dt:.1f}s")


def test_2_greedy_identities():
    t0 = time.perf_counter()
    worst_tel, worst_sm = 0.0, 0.0
    for i in range(50):
        m, a = 1 + i % 8, 1 + (3 * i) % 8
        dims, ch, theta, _ = random_instance(100 + i, n_r=4, m=m, n=12, a=a)
        st = init_greedy(ch, theta)
        f = approx_objective(ch, ModeSelection.empty(12), theta)
        h_b = reflect_channel(ch, np.ones(12), theta) * ch.amp[None, :]
        hp = ch.h_ris * ch.amp[None, :]
        m_dir = np.eye(m) + h_b.conj().T @ h_b / ch.noise_bs
        for _ in range(a):
            j = select_next(st, ch)
            gain = delta_gain(st, ch, j)
            st = commit_selection(st, ch, j)
            m_dir = m_dir + np.outer(hp[j].conj(), hp[j]) / ch.noise_conn
            f_next = approx_objective(ch, ModeSelection.from_indices(12, st.selected), theta)
            worst_tel = max(worst_tel, abs(f - gain - f_next))
            worst_sm = max(worst_sm, np.max(np.abs(st.m_inv - hermitian_inv(m_dir))))
            f = f_next
    dt = time.perf_counter() - t0
    ok = worst_tel <= 1e-10 and worst_sm <= 1e-10 and dt < 5
    report(2, ok, f"max telescoping error = {worst_tel:.2e}, max Sherman-Morrison error = {worst_sm:.2e}, {dt:.1f}s")


def _oracle_rates(make, n_seeds=50):
    greedy_ok = pdd_ok = 0
    for s in range(n_seeds):
        dims, ch, theta = make(s)
        _, best_app = exhaustive_search(ch, dims, theta, "approx")
        greedy_ok += approx_objective(ch, greedy_mode_select(ch, theta, dims), theta) <= 1.05 * best_app
        _, best = exhaustive_search(ch, dims, theta, "exact")
        res = run_pdd(ch, dims, PDDConfig(update_theta=False), (fixed_index_selection(8, 2), theta))
        pdd_ok += res.objective_exact <= 1.02 * best
    return greedy_ok, pdd_ok


def test_3_oracle_near_optimality():
    t0 = time.perf_counter()

    def iid(s):
        dims, ch, theta, _ = random_instance(300 + s, n_r=4, m=4, n=8, a=2)
        return dims, ch, theta

    g, p = _oracle_rates(iid)
    dt = time.perf_counter() - t0

    def path_loss_model(s):
        dims = SystemDims(4, 4, 8, 2)
        return dims, model_instance(dims, s), random_phases(8, np.random.default_rng([s, 99]))

    g_pl, p_pl = _oracle_rates(path_loss_model)
    ok = g >= 45 and p >= 40 and dt < 120
    report(
        3, ok,
        f"iid instances: greedy within 5% on {g}/50 (need 45), PDD within 2% on {p}/50 (need 40), {dt:.1f}s"
        f" | info, path-loss model: greedy {g_pl}/50, PDD {p_pl}/50",
    )


def test_4_siso_closed_form():
    t0 = time.perf_counter()
    hits = 0
    worst_gap = 0.0
    for s, a in itertools.product(range(50), (1, 2, 3)):
        dims, ch, _, _ = random_instance(400 + s, n_r=1, m=1, n=8, a=a, g_scale=1e-3)
        sel, theta = siso_closed_form(ch, a)
        best, _ = exhaustive_search(ch, dims, theta, "exact")
        h_b = reflect_channel(ch, 1.0 - sel.mask, theta)[0, 0]
        bound = abs(ch.h_direct[0, 0]) + np.sum((1 - sel.mask) * np.abs(ch.g_bs[:, 0] * ch.h_ris[:, 0]))
        gap = (bound - abs(h_b)) / bound
        worst_gap = max(worst_gap, gap)
        hits += best == sel and gap <= 1e-12
    dt = time.perf_counter() - t0
    ok = hits == 150 and dt < 30
    report(4, ok, f"closed form equals exhaustive on {hits}/150 (seed, a) pairs, max phase-bound gap {worst_gap:.1e}, {dt:.1f}s")


def test_5_los_selection_invariance():
    t0 = time.perf_counter()
    worst_spread, beaten = 0.0, 0
    for s in range(20):
        dims = SystemDims(4, 1, 8, 2)
        ch = model_instance(dims, 500 + s, kappa=1.0)
        vals = []
        for p in itertools.combinations(range(8), 2):
            sel = ModeSelection.from_indices(8, p)
            vals.append(reduced_objective(ch, sel, los_closed_form(ch, sel)))
        vals = np.array(vals)
        worst_spread = max(worst_spread, np.ptp(vals) / vals.max())
        sel = fixed_index_selection(8, 2)
        best = reduced_objective(ch, sel, los_closed_form(ch, sel))
        rng = np.random.default_rng([s, 5])
        beaten += sum(reduced_objective(ch, sel, random_phases(8, rng)) < best for _ in range(1000))
    dt = time.perf_counter() - t0
    ok = worst_spread <= 1e-9 and beaten == 0 and dt < 30
    report(5, ok, f"max relative spread over 28 subsets = {worst_spread:.1e}, random phases beating closed form: {beaten}/20000, {dt:.1f}s")


def test_6_pdd_feasibility():
    t0 = time.perf_counter()
    cfg = PDDConfig()
    n_conv, problems = 0, []
    for s in range(50):
        dims = SystemDims(4, 4, 16, 3)
        ch = model_instance(dims, 600 + s)
        theta = random_phases(16, np.random.default_rng([s, 6]))
        res = run_pdd(ch, dims, cfg, (fixed_index_selection(16, 3), theta))
        diag = res.diagnostics
        rhos = [d["rho"] for d in diag]
        if any(b > a for a, b in zip(rhos, rhos[1:])):
            problems.append(f"seed {s}: rho increased")
        for prev, cur in zip(diag, diag[1:]):
            duals_moved = (prev["lam"], prev["nu"]) != (cur["lam"], cur["nu"])
            if duals_moved and not (prev["dual_step"] and cur["rho"] == prev["rho"]):
                problems.append(f"seed {s}: duals moved on an infeasible sweep")
            if not prev["dual_step"] and (duals_moved or cur["rho"] != pytest.approx(cfg.alpha * prev["rho"])):
                problems.append(f"seed {s}: penalty not shrunk after an infeasible sweep")
        if res.selection.n_connected != 3:
            problems.append(f"seed {s}: rounded selection has {res.selection.n_connected} ones")
        if res.converged:
            n_conv += 1
            if diag[-1]["h"] > 1e-6:
                problems.append(f"seed {s}: converged with h = {diag[-1]['h']:.1e}")
    dt = time.perf_counter() - t0
    ok = not problems and n_conv > 0 and dt < 300
    detail = f"{n_conv}/50 runs converged, {len(problems)} contract violations, {dt:.1f}s"
    if problems:
        detail += f" (first: {problems[0]})"
    report(6, ok, detail)


def test_7_mm_monotonicity():
    t0 = time.perf_counter()
    worst_l, worst_app = -np.inf, -np.inf
    for s in range(50):
        _, ch, theta0, sel = random_instance(700 + s, n_r=4, m=2, n=8, a=2)
        rng = np.random.default_rng([s, 7])
        x = rng.random(8)
        v = project_ball_nonneg(rng.random(8), 8)
        theta = theta0
        f = relaxed_objective(ch, x, v, theta)
        for _ in range(20):
            theta = mm_phase_step(build_mm_scratch(ch, theta, 1.0 - x, v), theta)
            f_new = relaxed_objective(ch, x, v, theta)
            worst_l = max(worst_l, f_new - f)
            f = f_new
        theta = theta0
        f = approx_objective(ch, sel, theta)
        for _ in range(20):
            theta = phase_optimize_p9(ch, sel, theta, iters=1, rtol=0.0)
            f_new = approx_objective(ch, sel, theta)
            worst_app = max(worst_app, f_new - f)
            f = f_new
    dt = time.perf_counter() - t0
    ok = worst_l <= 1e-10 and worst_app <= 1e-10 and dt < 30
    report(7, ok, f"max step increase: L_theta {worst_l:.1e}, f_app {worst_app:.1e}, {dt:.1f}s")


def _trend_table(cfg):
    return summarize(run_experiment(cfg))


@pytest.mark.slow
def test_8_power_trend():
    t0 = time.perf_counter()
    base = parse_config(ROOT / "configs" / "desk_power.yaml")
    tables = {a: _trend_table(dataclasses.replace(base, dims=base.dims.with_connected(a))) for a in (2, 4)}
    dt = time.perf_counter() - t0
    powers = sorted(base.sweep_values)
    schemes = [s.value for s in base.schemes]
    failures = []
    for a, tab in tables.items():
        for sc in schemes:
            curve = [tab[(sc, p)] for p in powers]
            if any(b > c for c, b in zip(curve, curve[1:])):
                failures.append(f"a={a} {sc} not monotone in power")
        for p in powers:
            g = lambda sc: tab[(sc, p)]  # noqa: E731
            chain = [
                ("IBCDPDD<=GSAO", g("IBCDPDD") <= g("GSAO")),
                ("GSAO<=min(Random,Fixed)", g("GSAO") <= min(g("RandomIndex"), g("FixedIndex"))),
                ("min(Random,Fixed)<=min(Passive,DAS)", min(g("RandomIndex"), g("FixedIndex")) <= min(g("PassiveRIS"), g("DAS"))),
            ]
            failures += [f"a={a} P={p:g}: {name}" for name, holds in chain if not holds]
    for sc in ("RandomIndex", "FixedIndex", "GSAO", "IBCDPDD"):
        for p in powers:
            if not tables[4][(sc, p)] < tables[2][(sc, p)]:
                failures.append(f"{sc} P={p:g}: a=4 not below a=2")
    lines = "; ".join(
        f"a={a} P={p:g}: " + ", ".join(f"{sc}={tab[(sc, p)]:.3g}" for sc in schemes)
        for a, tab in tables.items() for p in powers
    )
    print(lines)
    ok = not failures and dt < 1800
    detail = f"{len(failures)} violated checks, {dt:.0f}s"
    if failures:
        detail += " (" + "; ".join(failures[:6]) + (" ..." if len(failures) > 6 else "") + ")"
    report(8, ok, detail)


@pytest.mark.slow
def test_9_rician_trend():
    t0 = time.perf_counter()
    cfg = parse_config(ROOT / "configs" / "desk_rician.yaml")
    tab = _trend_table(cfg)
    dt = time.perf_counter() - t0
    kappas = sorted(cfg.sweep_values)
    schemes = [s.value for s in cfg.schemes]
    failures = []
    for sc in schemes:
        curve = [tab[(sc, k)] for k in kappas]
        if any(b > c for c, b in zip(curve, curve[1:])):
            failures.append(f"{sc} not non-increasing in kappa: " + ", ".join(f"{v:.3g}" for v in curve))
    at_los = [tab[(sc, 1.0)] for sc in schemes]
    spread = max(at_los) / min(at_los) - 1.0
    if spread > 0.01:
        failures.append(f"kappa=1 spread {spread:.2%}")
    ok = not failures and dt < 600
    detail = f"kappa=1 spread {spread:.1e}, {dt:.0f}s"
    if failures:
        detail += " (" + "; ".join(failures) + ")"
    report(9, ok, detail)


def test_10_cli_determinism(tmp_path):
    t0 = time.perf_counter()
    outs = []
    for k in range(2):
        out = tmp_path / f"run{k}.csv"
        subprocess.run(
            [sys.executable, "-m", "rdars", "run", "--config", str(ROOT / "configs" / "smoke.yaml"), "--out", str(out), "--quiet"],
            check=True, cwd=tmp_path,
        )
        outs.append(out.read_bytes())
    dt = time.perf_counter() - t0
    ok = outs[0] == outs[1] and len(outs[0]) > 0 and dt < 60
    report(10, ok, f"CSV outputs byte-identical: {outs[0] == outs[1]} ({len(outs[0])} bytes), {dt:.1f}s")
