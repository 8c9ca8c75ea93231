"""System model for the RDARS-aided uplink: channels, receiver, MSE objectives.

Conventions used throughout the package:

* ``h_direct`` is ``N_r x M``, ``h_ris`` is ``N x M`` and ``g_bs`` is ``N x N_r``
  (so the reflected channel seen by the BS is ``G^H diag(theta) H_r``).
* Per-user powers are stored as ``p_m`` (watts); the amplitude matrix is
  ``P = diag(sqrt(p))``.
* Connected-element rows of ``H_c`` are ordered by ascending element index.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.linalg as sla

UNIT_MODULUS_ATOL = 1e-12
_JITTER = 1e-12


class DimensionError(ValueError):
    """Raised when an operand does not have the shape the model expects."""

    def __init__(self, operand: str, expected, got):
        self.operand = operand
        super().__init__(f"{operand}: expected shape {expected}, got {got}")


@dataclass(frozen=True)
class SystemDims:
    n_bs_antennas: int
    n_users: int
    n_elements: int
    n_connected: int = 0

    def __post_init__(self):
        for name in ("n_bs_antennas", "n_users", "n_elements"):
            if int(getattr(self, name)) < 1:
                raise ValueError(f"{name} must be >= 1")
        if not 0 <= self.n_connected <= self.n_elements:
            raise ValueError(
                f"n_connected must lie in [0, n_elements={self.n_elements}], got {self.n_connected}"
            )

    def with_connected(self, a: int) -> "SystemDims":
        return SystemDims(self.n_bs_antennas, self.n_users, self.n_elements, a)


@dataclass(frozen=True, eq=False)
class ChannelSet:
    """One channel realization plus the power/noise parameters it is used with."""

    h_direct: np.ndarray
    h_ris: np.ndarray
    g_bs: np.ndarray
    power: np.ndarray
    noise_bs: float
    noise_conn: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        h_d = np.asarray(self.h_direct, dtype=complex)
        h_r = np.asarray(self.h_ris, dtype=complex)
        g = np.asarray(self.g_bs, dtype=complex)
        p = np.atleast_1d(np.asarray(self.power, dtype=float))
        if h_d.ndim != 2:
            raise DimensionError("h_direct", "(N_r, M)", h_d.shape)
        n_r, m = h_d.shape
        if h_r.ndim != 2 or h_r.shape[1] != m:
            raise DimensionError("h_ris", f"(N, {m})", h_r.shape)
        n = h_r.shape[0]
        if g.shape != (n, n_r):
            raise DimensionError("g_bs", (n, n_r), g.shape)
        if p.shape != (m,):
            raise DimensionError("power", (m,), p.shape)
        if np.any(p < 0):
            raise ValueError("power entries must be non-negative")
        if not (self.noise_bs > 0 and self.noise_conn > 0):
            raise ValueError("noise variances must be positive")
        for name, arr in (("h_direct", h_d), ("h_ris", h_r), ("g_bs", g), ("power", p)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite entries")
        object.__setattr__(self, "h_direct", h_d)
        object.__setattr__(self, "h_ris", h_r)
        object.__setattr__(self, "g_bs", g)
        object.__setattr__(self, "power", p)
        object.__setattr__(self, "noise_bs", float(self.noise_bs))
        object.__setattr__(self, "noise_conn", float(self.noise_conn))

    @property
    def n_bs_antennas(self) -> int:
        return self.h_direct.shape[0]

    @property
    def n_users(self) -> int:
        return self.h_direct.shape[1]

    @property
    def n_elements(self) -> int:
        return self.h_ris.shape[0]

    @property
    def amp(self) -> np.ndarray:
        """Diagonal of ``P`` (square-root powers)."""
        return np.sqrt(self.power)

    def dims(self, n_connected: int = 0) -> SystemDims:
        return SystemDims(self.n_bs_antennas, self.n_users, self.n_elements, n_connected)

    def replace(self, **changes) -> "ChannelSet":
        kw = dict(
            h_direct=self.h_direct,
            h_ris=self.h_ris,
            g_bs=self.g_bs,
            power=self.power,
            noise_bs=self.noise_bs,
            noise_conn=self.noise_conn,
            meta=dict(self.meta),
        )
        kw.update(changes)
        return ChannelSet(**kw)


@dataclass(frozen=True, eq=False)
class ModeSelection:
    """Binary connection mask; ``indices`` is the ascending index set of ones."""

    mask: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.mask)
        if m.ndim != 1:
            raise DimensionError("mask", "(N,)", m.shape)
        if not np.all((m == 0) | (m == 1)):
            raise ValueError("mask entries must be 0 or 1")
        object.__setattr__(self, "mask", m.astype(np.int8))

    @classmethod
    def from_indices(cls, n: int, indices: Iterable[int]) -> "ModeSelection":
        idx = list(indices)
        if len(set(idx)) != len(idx):
            raise ValueError("duplicate indices in selection")
        mask = np.zeros(n, dtype=np.int8)
        if idx:
            if min(idx) < 0 or max(idx) >= n:
                raise ValueError(f"selection indices out of range [0, {n})")
            mask[idx] = 1
        return cls(mask)

    @classmethod
    def empty(cls, n: int) -> "ModeSelection":
        return cls(np.zeros(n, dtype=np.int8))

    @property
    def indices(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    @property
    def n_elements(self) -> int:
        return self.mask.size

    @property
    def n_connected(self) -> int:
        return int(self.mask.sum())

    def __eq__(self, other):
        if not isinstance(other, ModeSelection):
            return NotImplemented
        return np.array_equal(self.mask, other.mask)

    def __hash__(self):
        return hash(self.mask.tobytes())

    def __repr__(self):
        return f"ModeSelection(n={self.n_elements}, indices={self.indices.tolist()})"


def check_phases(theta, n: int | None = None) -> np.ndarray:
    """Validate a unit-modulus phase vector and return it as a complex array."""
    th = np.asarray(theta, dtype=complex)
    if th.ndim != 1:
        raise DimensionError("theta", "(N,)", th.shape)
    if n is not None and th.size != n:
        raise DimensionError("theta", (n,), th.shape)
    if not np.all(np.abs(np.abs(th) - 1.0) <= UNIT_MODULUS_ATOL):
        raise ValueError("theta must have unit-modulus entries")
    return th


def random_phases(n: int, rng: np.random.Generator) -> np.ndarray:
    return np.exp(2j * np.pi * rng.random(n))


@dataclass(frozen=True, eq=False)
class Receiver:
    """Linear receive filter ``W`` of shape ``M x (N_r + a)``."""

    w: np.ndarray
    n_bs_antennas: int

    @property
    def w_b(self) -> np.ndarray:
        return self.w[:, : self.n_bs_antennas]

    @property
    def w_c(self) -> np.ndarray:
        return self.w[:, self.n_bs_antennas :]


# --------------------------------------------------------------------------- helpers


def hermitian_solve(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``a x = b`` for Hermitian positive-definite ``a`` via Cholesky."""
    try:
        factor = sla.cho_factor(a, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        # jitter relative to the mean diagonal; noise floors can be ~1e-12 W
        scale = max(np.trace(a).real / a.shape[0], np.finfo(float).tiny)
        factor = sla.cho_factor(a + _JITTER * scale * np.eye(a.shape[0]),
                                lower=True, check_finite=False)
    return sla.cho_solve(factor, b, check_finite=False)


def hermitian_inv(a: np.ndarray) -> np.ndarray:
    inv = hermitian_solve(a, np.eye(a.shape[0], dtype=a.dtype))
    return 0.5 * (inv + inv.conj().T)


def trace_inv(a: np.ndarray) -> float:
    """``Tr(a^{-1})`` for Hermitian PD ``a``; raises ``LinAlgError`` if not PD."""
    c = sla.cholesky(a, lower=True, check_finite=False)
    ci = sla.solve_triangular(c, np.eye(a.shape[0]), lower=True, check_finite=False)
    return float(np.sum(np.abs(ci) ** 2))


def _check_selection(ch: ChannelSet, sel: ModeSelection):
    if sel.n_elements != ch.n_elements:
        raise DimensionError("selection", (ch.n_elements,), (sel.n_elements,))


def reflect_channel(ch: ChannelSet, weights: np.ndarray, theta: np.ndarray) -> np.ndarray:
    """``H_d + G^H diag(weights * theta) H_r`` (weights = 1 - x for relaxed x)."""
    return ch.h_direct + ch.g_bs.conj().T @ ((weights * theta)[:, None] * ch.h_ris)


def noise_covariance(ch: ChannelSet, sel: ModeSelection) -> np.ndarray:
    return np.diag(
        np.concatenate(
            [np.full(ch.n_bs_antennas, ch.noise_bs), np.full(sel.n_connected, ch.noise_conn)]
        )
    )


# ------------------------------------------------------------------------ operations


def assemble_effective_channel(ch: ChannelSet, sel: ModeSelection, theta) -> np.ndarray:
    """Stack ``H_b = H_d + G^H (I-A) Phi H_r`` over ``H_c = A_a H_r``."""
    _check_selection(ch, sel)
    th = check_phases(theta, ch.n_elements)
    h_b = reflect_channel(ch, 1.0 - sel.mask, th)
    h_c = ch.h_ris[sel.indices]
    return np.vstack([h_b, h_c])


def optimal_receiver(ch: ChannelSet, sel: ModeSelection, theta) -> Receiver:
    """MMSE receiver ``W* = P^H H^H (H P P^H H^H + Lambda)^{-1}``."""
    h = assemble_effective_channel(ch, sel, theta)
    hp = h * ch.amp[None, :]
    gram = hp @ hp.conj().T + noise_covariance(ch, sel)
    # W* = (gram^{-1} H P)^H since gram is Hermitian
    w = hermitian_solve(gram, hp).conj().T
    return Receiver(w, ch.n_bs_antennas)


def mse_matrix(ch: ChannelSet, sel: ModeSelection, theta, rx: Receiver) -> np.ndarray:
    """``E[(s_hat - s)(s_hat - s)^H] = (W H P - I)(W H P - I)^H + W Lambda W^H``."""
    h = assemble_effective_channel(ch, sel, theta)
    w = np.asarray(rx.w)
    if w.shape != (ch.n_users, h.shape[0]):
        raise DimensionError("receiver", (ch.n_users, h.shape[0]), w.shape)
    e = w @ (h * ch.amp[None, :]) - np.eye(ch.n_users)
    lam = np.diag(noise_covariance(ch, sel))
    mse = e @ e.conj().T + (w * lam[None, :]) @ w.conj().T
    return 0.5 * (mse + mse.conj().T)


def _information_matrix(ch: ChannelSet, h_b: np.ndarray, conn_weights: np.ndarray) -> np.ndarray:
    """``I + sigma_b^-2 P^H H_b^H H_b P + sigma_c^-2 P^H H_r^H diag(w) H_r P``."""
    bp = h_b * ch.amp[None, :]
    rp = ch.h_ris * ch.amp[None, :]
    m = (
        np.eye(ch.n_users)
        + (bp.conj().T @ bp) / ch.noise_bs
        + (rp.conj().T @ (conn_weights[:, None] * rp)) / ch.noise_conn
    )
    return 0.5 * (m + m.conj().T)


def relaxed_objective(ch: ChannelSet, x: np.ndarray, v: np.ndarray, theta: np.ndarray) -> float:
    """Sum-MSE with reflection weights ``1 - x`` and connection weights ``v``.

    Equals :func:`reduced_objective` when ``x = v`` is a binary mask. Raises
    ``numpy.linalg.LinAlgError`` when negative entries of ``v`` make the
    information matrix indefinite.
    """
    h_b = reflect_channel(ch, 1.0 - np.asarray(x, dtype=float), theta)
    return trace_inv(_information_matrix(ch, h_b, np.asarray(v, dtype=float)))


def reduced_objective(ch: ChannelSet, sel: ModeSelection, theta) -> float:
    """Sum-MSE at the MMSE receiver, ``Tr{(I + R_b/s_b^2 + R_c/s_c^2)^{-1}}``."""
    _check_selection(ch, sel)
    th = check_phases(theta, ch.n_elements)
    h_b = reflect_channel(ch, 1.0 - sel.mask, th)
    return trace_inv(_information_matrix(ch, h_b, sel.mask.astype(float)))


def approx_objective(ch: ChannelSet, sel: ModeSelection, theta) -> float:
    """Sum-MSE with the full-reflection channel ``H_d + G^H Phi H_r`` in the BS block."""
    _check_selection(ch, sel)
    th = check_phases(theta, ch.n_elements)
    h_b = reflect_channel(ch, np.ones(ch.n_elements), th)
    return trace_inv(_information_matrix(ch, h_b, sel.mask.astype(float)))


def anmse(trace_values: Sequence[float], m: int) -> float:
    """Average normalized MSE: mean of ``Tr(MSE) / M`` over realizations."""
    vals = np.asarray(list(trace_values), dtype=float)
    if vals.size == 0:
        raise ValueError("anmse needs at least one trace value")
    if m < 1:
        raise ValueError("m must be positive")
    return float(np.mean(vals) / m)
