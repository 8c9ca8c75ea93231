"""Inexact-BCD penalty dual decomposition for joint phase / mode optimization.

The binary mask ``x`` is relaxed to the box ``[0, 1]^N`` and paired with an
auxiliary ``v`` on the ball ``||2v - 1|| <= sqrt(N)``; the equalities
``x^T 1 = a`` and ``(2x-1)^T (2v-1) = N`` force binarity and are priced by an
augmented Lagrangian with duals ``(lam, nu)`` and penalty ``rho``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .greedy import AOConfig, RunResult, run_ao
from .model import (
    ChannelSet,
    ModeSelection,
    SystemDims,
    approx_objective,
    check_phases,
    hermitian_inv,
    optimal_receiver,
    reduced_objective,
    reflect_channel,
    relaxed_objective,
)
from .subsolvers import (
    BallProblem,
    BoxQP,
    build_mm_scratch,
    eig_split,
    mm_phase_step,
    solve_ball_trace_inverse,
    solve_box_qp,
)

log = logging.getLogger(__name__)


@dataclass
class PDDConfig:
    rho0: float = 10.0
    alpha: float = 0.6
    eps_violation: float = 1e-6
    eps_rbp: float = 1e-5
    max_outer: int = 200
    max_inner: int = 30
    ccp_iters: int = 5
    sub_tol: float = 1e-8
    sub_max_iter: int = 5000
    update_theta: bool = True

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie in (0, 1)")
        if self.rho0 <= 0 or self.eps_violation <= 0 or self.eps_rbp <= 0:
            raise ValueError("rho0 and tolerances must be positive")
        if min(self.max_outer, self.max_inner, self.ccp_iters, self.sub_max_iter) < 1:
            raise ValueError("iteration limits must be >= 1")


@dataclass
class PDDState:
    theta: np.ndarray
    x: np.ndarray
    v: np.ndarray
    lam: float
    nu: float
    rho: float
    n_connected: int
    history: list = field(default_factory=list)
    flags: dict = field(default_factory=dict)

    def copy(self, **changes) -> "PDDState":
        st = replace(self, history=list(self.history), flags=dict(self.flags))
        for k, val in changes.items():
            setattr(st, k, val)
        return st


def _residuals(st: PDDState) -> tuple[float, float]:
    card = float(st.x.sum() - st.n_connected)
    align = float((2 * st.x - 1) @ (2 * st.v - 1) - st.x.size)
    return card, align


def al_objective(ch: ChannelSet, st: PDDState) -> float:
    card, align = _residuals(st)
    f = relaxed_objective(ch, st.x, st.v, st.theta)
    return f + st.nu * align + st.lam * card + (card**2 + align**2) / (2 * st.rho)


def constraint_violation(st: PDDState) -> float:
    card, align = _residuals(st)
    return max(abs(card), abs(align))


def theta_update(ch: ChannelSet, st: PDDState) -> np.ndarray:
    scratch = build_mm_scratch(ch, st.theta, 1.0 - st.x, st.v)
    return mm_phase_step(scratch, st.theta)


def x_surrogate(ch: ChannelSet, st: PDDState) -> tuple[np.ndarray, np.ndarray]:
    """Quadratic ``(Xi, zeta)`` majorizing the AL in ``x`` at the current ``x``."""
    amp = ch.amp
    hp = ch.h_ris * amp[None, :]
    xd = ch.h_direct * amp[None, :]
    g = ch.g_bs
    f = st.theta[:, None] * hp  # Phi H_r P
    c = np.eye(ch.n_users) + (hp.conj().T @ (st.v[:, None] * hp)) / ch.noise_conn
    c_inv = hermitian_inv(0.5 * (c + c.conj().T))
    c_inv2 = c_inv @ c_inv
    x_full = xd + g.conj().T @ f
    y_k = xd + g.conj().T @ ((1.0 - st.x)[:, None] * f)
    q = ch.noise_bs * np.eye(ch.n_bs_antennas) + y_k @ c_inv @ y_k.conj().T
    qy = hermitian_inv(0.5 * (q + q.conj().T)) @ y_k
    k_mat = qy @ c_inv2 @ qy.conj().T
    xi = np.real((f @ c_inv @ f.conj().T).T * (g @ k_mat @ g.conj().T))
    left = f @ (np.eye(ch.n_users) - c_inv @ x_full.conj().T @ qy) @ c_inv2 @ qy.conj().T
    zeta = 2.0 * np.real(np.sum(left * g.conj(), axis=1))

    n = st.x.size
    u = 2.0 * st.v - 1.0
    ones = np.ones(n)
    xi = xi + (np.outer(ones, ones) + 4.0 * np.outer(u, u)) / (2.0 * st.rho)
    zeta = zeta + (
        (st.rho * st.lam - st.n_connected) * ones
        + 2.0 * (st.rho * st.nu - n) * u
        - 2.0 * u.sum() * u
    ) / st.rho
    return 0.5 * (xi + xi.T), zeta


def x_update(ch: ChannelSet, st: PDDState, cfg: PDDConfig) -> tuple[np.ndarray, dict]:
    """CCP rounds on the box-constrained quadratic surrogate, warm-started at ``x``."""
    xi, zeta = x_surrogate(ch, st)
    xi_p, xi_n = eig_split(xi)
    x = st.x.copy()
    values = [float(x @ xi @ x + zeta @ x)]
    converged = True
    for _ in range(cfg.ccp_iters):
        res = solve_box_qp(BoxQP(xi_p, zeta + 2.0 * xi_n @ x), x, cfg.sub_tol, cfg.sub_max_iter)
        converged &= res.converged
        step = np.max(np.abs(res.x - x))
        x = res.x
        values.append(float(x @ xi @ x + zeta @ x))
        if step <= cfg.sub_tol:
            break
    return x, {"ccp_values": values, "converged": converged}


def v_problem(ch: ChannelSet, st: PDDState) -> BallProblem:
    """The AL restricted to ``v`` (up to a constant) as a ball-constrained problem."""
    h_b = reflect_channel(ch, 1.0 - st.x, st.theta)
    bp = h_b * ch.amp[None, :]
    hp = ch.h_ris * ch.amp[None, :]
    base = np.eye(ch.n_users) + (bp.conj().T @ bp) / ch.noise_bs
    c = 2.0 * (2.0 * st.x - 1.0)
    offset = -(2.0 * st.x - 1.0).sum() - st.x.size + st.rho * st.nu
    rho = st.rho

    def objective(v):
        m = base + (hp.conj().T @ (v[:, None] * hp)) / ch.noise_conn
        chol = np.linalg.cholesky(0.5 * (m + m.conj().T))
        ci = np.linalg.inv(chol)
        inv = ci.conj().T @ ci
        s = c @ v + offset
        z = hp @ inv
        val = float(np.real(np.trace(inv))) + s * s / (2.0 * rho)
        grad = -np.sum(np.abs(z) ** 2, axis=1) / ch.noise_conn + (s / rho) * c
        return val, grad

    return BallProblem(objective, st.x.size, nonneg=True)


def v_update(ch: ChannelSet, st: PDDState, cfg: PDDConfig) -> tuple[np.ndarray, dict]:
    res = solve_ball_trace_inverse(v_problem(ch, st), st.v, cfg.sub_tol, cfg.sub_max_iter)
    return res.x, {"converged": res.converged, "iterations": res.iterations}


def outer_update(st: PDDState, cfg: PDDConfig) -> PDDState:
    """Dual ascent when nearly feasible, otherwise shrink the penalty parameter."""
    if constraint_violation(st) < cfg.eps_violation:
        card, align = _residuals(st)
        return st.copy(lam=st.lam + card / st.rho, nu=st.nu + align / st.rho)
    return st.copy(rho=cfg.alpha * st.rho)


def round_to_binary(x, a: int) -> ModeSelection:
    """Keep the ``a`` largest entries; ties go to the lowest index."""
    x = np.asarray(x, dtype=float)
    order = np.lexsort((np.arange(x.size), -x))
    return ModeSelection.from_indices(x.size, sorted(order[:a].tolist()))


def run_pdd(
    ch: ChannelSet,
    dims: SystemDims,
    cfg: PDDConfig,
    init: tuple[ModeSelection, np.ndarray],
    ao_cfg: AOConfig | None = None,
    x_start=None,
) -> RunResult:
    """Double-loop PDD; returns the rounded selection and final phases.

    ``x`` and ``v`` start at the mask of the initial selection unless a relaxed
    point ``x_start`` in ``[0, 1]^N`` is given. With ``a = 0`` the mask is
    pinned to zero and the problem is phase-only; this delegates to the same
    MM rounds used by the passive-RIS baseline.
    """
    sel0, theta0 = init
    theta0 = check_phases(theta0, ch.n_elements)
    a = dims.n_connected
    if a == 0:
        return run_ao(ch, dims, ao_cfg or AOConfig(), theta0)
    if sel0.n_connected != a:
        raise ValueError("initial selection must connect exactly a elements")

    x0 = sel0.mask.astype(float) if x_start is None else np.clip(np.asarray(x_start, dtype=float), 0.0, 1.0)
    if x0.shape != (ch.n_elements,):
        raise ValueError(f"x_start must have shape ({ch.n_elements},)")
    st = PDDState(theta=theta0.copy(), x=x0, v=x0.copy(), lam=0.0, nu=0.0, rho=cfg.rho0, n_connected=a)
    diagnostics = []
    converged = False
    sweeps = 0
    l_prev = al_objective(ch, st)
    for outer in range(cfg.max_outer):
        rbp_met = False
        sub_ok = True
        for _ in range(cfg.max_inner):
            if cfg.update_theta:
                st.theta = theta_update(ch, st)
            st.x, xinfo = x_update(ch, st, cfg)
            st.v, vinfo = v_update(ch, st, cfg)
            sub_ok &= xinfo["converged"] and vinfo["converged"]
            sweeps += 1
            l_cur = al_objective(ch, st)
            st.history.append(l_cur)
            rbp = abs(l_cur - l_prev) / max(abs(l_prev), 1e-300)
            l_prev = l_cur
            if rbp <= cfg.eps_rbp:
                rbp_met = True
                break
        h = constraint_violation(st)
        feasible = h < cfg.eps_violation
        diagnostics.append(
            {
                "iter": outer,
                "h": h,
                "al": l_prev,
                "rho": st.rho,
                "lam": st.lam,
                "nu": st.nu,
                "sweeps": sweeps,
                "dual_step": feasible,
                "inner_capped": not rbp_met,
                "subsolvers_converged": sub_ok,
            }
        )
        if h <= cfg.eps_violation and rbp_met:
            converged = True
            break
        st = outer_update(st, cfg)
        l_prev = al_objective(ch, st)

    sel = round_to_binary(st.x, a)
    if not converged:
        log.info("PDD stopped at max_outer=%d with h=%.3g", cfg.max_outer, constraint_violation(st))
    return RunResult(
        selection=sel,
        theta=st.theta,
        receiver=optimal_receiver(ch, sel, st.theta),
        objective_exact=reduced_objective(ch, sel, st.theta),
        objective_approx=approx_objective(ch, sel, st.theta),
        iterations=sweeps,
        converged=converged,
        diagnostics=diagnostics,
    )
