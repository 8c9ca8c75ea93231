"""Convex kernels: box QP, ball-constrained trace-inverse, MM phase step, EVD split."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .model import ChannelSet, hermitian_inv


def project_box(x) -> np.ndarray:
    return np.clip(np.asarray(x, dtype=float), 0.0, 1.0)


def project_ball(v, n: int) -> np.ndarray:
    """Project onto ``{v : ||2v - 1|| <= sqrt(n)}``."""
    v = np.asarray(v, dtype=float)
    u = 2.0 * v - 1.0
    norm = np.linalg.norm(u)
    radius = np.sqrt(n)
    if norm <= radius:
        return v
    return 0.5 * (1.0 + u * (radius / norm))


def project_ball_nonneg(v, n: int) -> np.ndarray:
    """Project onto ``{v >= 0 : ||2v - 1|| <= sqrt(n)}``.

    The projection is ``max(c + t (y - c), 0)`` with ``c = 1/2`` and a shrink
    factor ``t`` in ``(0, 1]``. The ball residual is increasing in ``t`` and has
    the form ``t^2 S_k + k c^2`` between consecutive clipping breakpoints, so
    ``t`` is found exactly by scanning the sorted breakpoints.
    """
    y = np.asarray(v, dtype=float)
    c = 0.5
    r2 = 0.25 * n
    z = np.maximum(y, 0.0)
    if np.sum((z - c) ** 2) <= r2:
        return z
    d = y - c
    neg = d < 0
    bp = c / -d[neg]
    order = np.argsort(bp)
    bp = bp[order]
    d2_neg = (d[neg] ** 2)[order]
    total = float(np.sum(d**2))
    k = np.arange(bp.size + 1)
    s_k = total - np.concatenate(([0.0], np.cumsum(d2_neg)))
    with np.errstate(divide="ignore", invalid="ignore"):
        t_k = np.sqrt(np.maximum(r2 - k * c * c, 0.0) / s_k)
    lo = np.concatenate(([0.0], bp))
    hi = np.concatenate((bp, [np.inf]))
    ok = (s_k > 0) & (t_k >= lo) & (t_k <= hi)
    t = float(t_k[np.argmax(ok)]) if ok.any() else 1.0
    return np.maximum(c + min(t, 1.0) * d, 0.0)


# ------------------------------------------------------------------------- box QP


@dataclass
class BoxQP:
    """``min x^T q x + c^T x`` subject to ``0 <= x <= 1``."""

    q: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        self.q = np.asarray(self.q, dtype=float)
        self.c = np.asarray(self.c, dtype=float)
        if np.max(np.abs(self.q - self.q.T), initial=0.0) > 1e-10 * max(1.0, np.max(np.abs(self.q), initial=0.0)):
            raise ValueError("q must be symmetric")
        self.q = 0.5 * (self.q + self.q.T)

    def value(self, x) -> float:
        return float(x @ self.q @ x + self.c @ x)

    def grad(self, x) -> np.ndarray:
        return 2.0 * (self.q @ x) + self.c


@dataclass
class SolveResult:
    x: np.ndarray
    value: float
    converged: bool
    iterations: int


def largest_eigenvalue(q: np.ndarray, rtol: float = 1e-6, max_iter: int = 1000) -> float:
    """Power iteration for the top eigenvalue of a symmetric PSD matrix."""
    n = q.shape[0]
    # fixed, non-degenerate start vector keeps the result deterministic
    b = 1.0 + 0.01 * np.cos(np.arange(n))
    b /= np.linalg.norm(b)
    lam = 0.0
    for _ in range(max_iter):
        qb = q @ b
        nrm = np.linalg.norm(qb)
        if nrm == 0.0:
            return 0.0
        new = float(b @ qb)
        b = qb / nrm
        if abs(new - lam) <= rtol * abs(new):
            return new
        lam = new
    return lam


def solve_box_qp(p: BoxQP, x0, tol: float = 1e-8, max_iter: int = 5000) -> SolveResult:
    """Monotone accelerated projected gradient (MFISTA) with step ``1/L``.

    Stops once the gradient-mapping norm drops below ``tol * max(1, initial
    norm)``. Every accepted iterate has objective no larger than its
    predecessor.
    """
    x = project_box(x0)
    lam = largest_eigenvalue(p.q)
    lip = max(2.0 * lam * 1.01, 1e-12 * max(1.0, float(np.max(np.abs(p.c), initial=0.0))))
    fx = p.value(x)

    def gmap_norm(z):
        return lip * np.linalg.norm(z - project_box(z - p.grad(z) / lip))

    g0 = gmap_norm(x)
    thresh = tol * max(1.0, g0)
    if g0 <= thresh:
        return SolveResult(x, fx, True, 0)
    y = x.copy()
    t = 1.0
    for it in range(1, max_iter + 1):
        z = project_box(y - p.grad(y) / lip)
        fz = p.value(z)
        x_prev = x
        if fz <= fx:
            x, fx = z, fz
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
        y = x + (t / t_next) * (z - x) + ((t - 1.0) / t_next) * (x - x_prev)
        t = t_next
        if gmap_norm(x) <= thresh:
            return SolveResult(x, fx, True, it)
    return SolveResult(x, fx, False, max_iter)


# ------------------------------------------------------------- ball trace-inverse


@dataclass
class BallProblem:
    """Convex objective over ``||2v - 1|| <= sqrt(n)`` (optionally also ``v >= 0``).

    ``objective(v)`` returns ``(value, gradient)`` and should raise
    ``numpy.linalg.LinAlgError`` (or return ``inf``) outside its domain.
    """

    objective: Callable[[np.ndarray], tuple[float, np.ndarray]]
    n: int
    nonneg: bool = False

    def project(self, v) -> np.ndarray:
        return project_ball_nonneg(v, self.n) if self.nonneg else project_ball(v, self.n)


def _safe_eval(p: BallProblem, v):
    try:
        val, grad = p.objective(v)
    except np.linalg.LinAlgError:
        return np.inf, None
    if not np.isfinite(val):
        return np.inf, None
    return float(val), grad


def solve_ball_trace_inverse(p: BallProblem, v0, tol: float = 1e-8, max_iter: int = 5000) -> SolveResult:
    """Projected gradient with Armijo backtracking (halving).

    The first trial step is 1.0; afterwards each iteration starts from twice
    the last accepted step. Stops when the relative decrease falls to ``tol``.
    """
    v = p.project(v0)
    f, g = _safe_eval(p, v)
    if not np.isfinite(f):
        raise np.linalg.LinAlgError("objective undefined at the starting point")
    step = 1.0
    for it in range(1, max_iter + 1):
        while True:
            cand = p.project(v - step * g)
            d = cand - v
            fc, gc = _safe_eval(p, cand)
            if fc <= f + g @ d + (d @ d) / (2.0 * step):
                break
            step *= 0.5
            if step < 1e-300:
                return SolveResult(v, f, True, it)
        decrease = f - fc
        v, f, g = cand, fc, gc
        if decrease <= tol * max(abs(f), 1e-300):
            return SolveResult(v, f, True, it)
        step *= 2.0
    return SolveResult(v, f, False, max_iter)


# --------------------------------------------------------------------- MM phases


@dataclass
class MMScratch:
    """Anchor quantities of the two-level MM surrogate at ``theta_k``.

    The objective is ``Tr{(C + X^H X / s_b^2)^{-1}}`` with
    ``X = (H_d + G^H diag(w * theta) H_r) P``. ``u_mat`` and ``v_mat`` define
    the convex quadratic ``theta^H (V^T o U) theta`` and ``d_mat`` its linear
    term.
    """

    c_mat: np.ndarray
    x_anchor: np.ndarray
    q_anchor: np.ndarray
    d_mat: np.ndarray
    u_mat: np.ndarray
    v_mat: np.ndarray
    lipschitz: float


def build_mm_scratch(ch: ChannelSet, theta_k, reflect_weights, conn_weights) -> MMScratch:
    """Assemble the surrogate at ``theta_k``.

    ``reflect_weights`` is ``1 - x`` (all ones for the full-reflection
    approximation) and ``conn_weights`` the diagonal entering ``C``.
    """
    amp = ch.amp
    hp = ch.h_ris * amp[None, :]
    xd = ch.h_direct * amp[None, :]
    g_w = np.asarray(reflect_weights, dtype=float)[:, None] * ch.g_bs
    c = np.eye(ch.n_users) + (hp.conj().T @ (np.asarray(conn_weights, dtype=float)[:, None] * hp)) / ch.noise_conn
    c = 0.5 * (c + c.conj().T)
    c_inv = hermitian_inv(c)
    c_inv2 = c_inv @ c_inv
    x_k = xd + g_w.conj().T @ (np.asarray(theta_k)[:, None] * hp)
    q = ch.noise_bs * np.eye(ch.n_bs_antennas) + x_k @ c_inv @ x_k.conj().T
    q_inv = hermitian_inv(0.5 * (q + q.conj().T))
    qx = q_inv @ x_k
    k_mat = qx @ c_inv2 @ qx.conj().T
    u = g_w @ k_mat @ g_w.conj().T
    v = hp @ c_inv @ hp.conj().T
    left = hp @ (np.eye(ch.n_users) - c_inv @ xd.conj().T @ qx) @ c_inv2 @ qx.conj().T
    d = left @ g_w.conj().T
    lip = float(np.real(np.sum(np.diag(v) * np.diag(u))))
    return MMScratch(c, x_k, q, d, u, v, lip)


def mm_phase_step(scratch: MMScratch, theta_k) -> np.ndarray:
    """One closed-form MM update of the unit-modulus phases."""
    theta_k = np.asarray(theta_k, dtype=complex)
    b = scratch.v_mat.T * scratch.u_mat
    tilde = b @ theta_k - scratch.lipschitz * theta_k - np.conj(np.diag(scratch.d_mat))
    out = theta_k.copy()
    nz = tilde != 0
    out[nz] = -np.exp(1j * np.angle(tilde[nz]))
    return out


# ---------------------------------------------------------------------- EVD split


def eig_split(m) -> tuple[np.ndarray, np.ndarray]:
    """Split a symmetric matrix into PSD and NSD parts via its eigendecomposition."""
    m = np.asarray(m, dtype=float)
    m = 0.5 * (m + m.T)
    w, vec = np.linalg.eigh(m)
    pos = (vec * np.maximum(w, 0.0)) @ vec.T
    neg = (vec * np.minimum(w, 0.0)) @ vec.T
    return pos, neg
