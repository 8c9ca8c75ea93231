"""Greedy mode selection with rank-one inverse updates, alternated with MM phases."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .model import (
    ChannelSet,
    ModeSelection,
    Receiver,
    SystemDims,
    approx_objective,
    hermitian_inv,
    optimal_receiver,
    reduced_objective,
    reflect_channel,
)
from .subsolvers import build_mm_scratch, mm_phase_step


@dataclass
class AOConfig:
    eps_ao: float = 1e-6
    max_ao_rounds: int = 20
    mm_iters_p9: int = 50
    mm_rtol: float = 1e-8

    def __post_init__(self):
        if self.eps_ao <= 0 or self.max_ao_rounds < 1 or self.mm_iters_p9 < 1:
            raise ValueError("AOConfig values must be positive")


@dataclass
class GreedyState:
    m_inv: np.ndarray
    selected: list
    candidates: list
    hp: np.ndarray  # rows of H_r P
    noise_conn: float

    @property
    def x_count(self) -> int:
        return len(self.selected)


def init_greedy(ch: ChannelSet, theta) -> GreedyState:
    """``M_0^{-1} = (I + P^H H_b'^H H_b' P / s_b^2)^{-1}`` with all elements reflecting."""
    h_b = reflect_channel(ch, np.ones(ch.n_elements), np.asarray(theta))
    bp = h_b * ch.amp[None, :]
    m0 = np.eye(ch.n_users) + (bp.conj().T @ bp) / ch.noise_bs
    return GreedyState(
        m_inv=hermitian_inv(0.5 * (m0 + m0.conj().T)),
        selected=[],
        candidates=list(range(ch.n_elements)),
        hp=ch.h_ris * ch.amp[None, :],
        noise_conn=ch.noise_conn,
    )


def _gains(st: GreedyState, rows: np.ndarray) -> np.ndarray:
    # z_j = h_j P M^{-1}; numerator ||z_j||^2, denominator s_c^2 + z_j (h_j P)^H
    z = rows @ st.m_inv
    num = np.sum(np.abs(z) ** 2, axis=1)
    den = st.noise_conn + np.real(np.sum(z * rows.conj(), axis=1))
    return num / den


def delta_gain(st: GreedyState, ch: ChannelSet, j: int) -> float:
    """MSE reduction from connecting element ``j`` next."""
    if j not in st.candidates:
        raise ValueError(f"element {j} is not a candidate")
    return float(_gains(st, st.hp[j : j + 1])[0])


def select_next(st: GreedyState, ch: ChannelSet) -> int:
    if not st.candidates:
        raise ValueError("no candidates left to select")
    cand = np.asarray(st.candidates)
    gains = _gains(st, st.hp[cand])
    order = np.lexsort((cand, -gains))  # largest gain, then lowest index
    return int(cand[order[0]])


def commit_selection(st: GreedyState, ch: ChannelSet, j: int) -> GreedyState:
    """Sherman-Morrison update of ``M^{-1}`` after connecting element ``j``."""
    if j not in st.candidates:
        raise ValueError(f"element {j} is not a candidate")
    u = st.hp[j].conj()  # P^H h_j^H
    mu = st.m_inv @ u
    den = st.noise_conn + np.real(u.conj() @ mu)
    m_inv = st.m_inv - np.outer(mu, mu.conj()) / den
    m_inv = 0.5 * (m_inv + m_inv.conj().T)
    return GreedyState(
        m_inv=m_inv,
        selected=st.selected + [j],
        candidates=[c for c in st.candidates if c != j],
        hp=st.hp,
        noise_conn=st.noise_conn,
    )


def greedy_mode_select(ch: ChannelSet, theta, dims: SystemDims) -> ModeSelection:
    a = dims.n_connected
    if a > ch.n_elements:
        raise ValueError(f"cannot connect {a} of {ch.n_elements} elements")
    st = init_greedy(ch, theta)
    for _ in range(a):
        st = commit_selection(st, ch, select_next(st, ch))
    return ModeSelection.from_indices(ch.n_elements, st.selected)


def phase_optimize_p9(ch: ChannelSet, sel: ModeSelection, theta0, iters: int = 50, rtol: float = 1e-8) -> np.ndarray:
    """MM iterations on the approximate objective with the selection held fixed.

    Exits early once the relative objective change is at most ``rtol``.
    """
    theta = np.asarray(theta0, dtype=complex).copy()
    ones = np.ones(ch.n_elements)
    conn = sel.mask.astype(float)
    f = approx_objective(ch, sel, theta)
    for _ in range(iters):
        scratch = build_mm_scratch(ch, theta, ones, conn)
        theta = mm_phase_step(scratch, theta)
        f_new = approx_objective(ch, sel, theta)
        done = abs(f - f_new) <= rtol * abs(f)
        f = f_new
        if done:
            break
    return theta


@dataclass
class RunResult:
    """Output shared by the optimizers and reference schemes."""

    selection: ModeSelection
    theta: np.ndarray
    receiver: Receiver
    objective_exact: float
    objective_approx: float
    iterations: int
    converged: bool
    diagnostics: list = field(default_factory=list)


def run_ao(ch: ChannelSet, dims: SystemDims, cfg: AOConfig, theta0, fixed_selection: ModeSelection | None = None) -> RunResult:
    """Alternate greedy selection (at the current phases) and MM phase updates.

    With ``fixed_selection`` the greedy pass is skipped and only the phase
    rounds run. A greedy pass is kept only if it does not worsen the
    approximate objective relative to the previous selection, so the
    per-round trace is non-increasing.
    """
    theta = np.asarray(theta0, dtype=complex).copy()
    sel = fixed_selection
    f_prev = None
    trace = []
    converged = False
    rounds = 0
    for rounds in range(1, cfg.max_ao_rounds + 1):
        if fixed_selection is None:
            cand = greedy_mode_select(ch, theta, dims) if dims.n_connected > 0 else ModeSelection.empty(ch.n_elements)
            if sel is None or approx_objective(ch, cand, theta) <= approx_objective(ch, sel, theta):
                sel = cand
        theta = phase_optimize_p9(ch, sel, theta, cfg.mm_iters_p9, cfg.mm_rtol)
        f = approx_objective(ch, sel, theta)
        trace.append({"round": rounds, "f_app": f, "selected": sel.indices.tolist()})
        if f_prev is not None and abs(f - f_prev) <= cfg.eps_ao:
            converged = True
            break
        f_prev = f
    return RunResult(
        selection=sel,
        theta=theta,
        receiver=optimal_receiver(ch, sel, theta),
        objective_exact=reduced_objective(ch, sel, theta),
        objective_approx=f,
        iterations=rounds,
        converged=converged,
        diagnostics=trace,
    )
