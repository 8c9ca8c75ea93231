"""Reference schemes, exhaustive selection oracle and closed-form special cases."""

from __future__ import annotations

import enum
import itertools
from math import comb

import numpy as np

from .greedy import AOConfig, RunResult, greedy_mode_select, run_ao
from .model import (
    ChannelSet,
    DimensionError,
    ModeSelection,
    SystemDims,
    approx_objective,
    check_phases,
    optimal_receiver,
    reduced_objective,
)
from .pdd import PDDConfig, run_pdd


class SchemeId(str, enum.Enum):
    PassiveRIS = "PassiveRIS"
    DAS = "DAS"
    RandomIndex = "RandomIndex"
    FixedIndex = "FixedIndex"
    GSRand = "GSRand"
    GSAO = "GSAO"
    IBCDPDD = "IBCDPDD"
    Exhaustive = "Exhaustive"


EXHAUSTIVE_CAP = 100_000


def _result(ch: ChannelSet, sel: ModeSelection, theta, iterations=0, converged=True, diagnostics=None) -> RunResult:
    return RunResult(
        selection=sel,
        theta=theta,
        receiver=optimal_receiver(ch, sel, theta),
        objective_exact=reduced_objective(ch, sel, theta),
        objective_approx=approx_objective(ch, sel, theta),
        iterations=iterations,
        converged=converged,
        diagnostics=diagnostics or [],
    )


def fixed_index_selection(n: int, a: int) -> ModeSelection:
    return ModeSelection.from_indices(n, range(a))


def random_index_selection(n: int, a: int, rng: np.random.Generator) -> ModeSelection:
    return ModeSelection.from_indices(n, sorted(rng.choice(n, size=a, replace=False).tolist()))


def scheme_passive_ris(ch: ChannelSet, dims: SystemDims, theta0, cfg: AOConfig | None = None) -> RunResult:
    """All elements reflect; phases by the same MM rounds as GS-AO."""
    return run_ao(ch, dims.with_connected(0), cfg or AOConfig(), theta0, fixed_selection=ModeSelection.empty(ch.n_elements))


def scheme_das(ch: ChannelSet, dims: SystemDims, placement: str = "greedy") -> RunResult:
    """BS array plus ``a`` remote antennas at RDARS element positions, no reflection.

    ``placement`` is ``"greedy"`` (greedy selection on the reflection-free
    channel) or ``"fixed"`` (first ``a`` positions).
    """
    no_reflect = ch.replace(g_bs=np.zeros_like(ch.g_bs))
    theta = np.ones(ch.n_elements, dtype=complex)
    if placement == "fixed":
        sel = fixed_index_selection(ch.n_elements, dims.n_connected)
    elif placement == "greedy":
        sel = greedy_mode_select(no_reflect, theta, dims)
    else:
        raise ValueError(f"unknown DAS placement {placement!r}")
    return _result(no_reflect, sel, theta)


def scheme_fixed_index(ch: ChannelSet, dims: SystemDims, theta0, cfg: AOConfig | None = None) -> RunResult:
    sel = fixed_index_selection(ch.n_elements, dims.n_connected)
    return run_ao(ch, dims, cfg or AOConfig(), theta0, fixed_selection=sel)


def scheme_random_index(ch: ChannelSet, dims: SystemDims, theta0, rng: np.random.Generator, cfg: AOConfig | None = None) -> RunResult:
    sel = random_index_selection(ch.n_elements, dims.n_connected, rng)
    return run_ao(ch, dims, cfg or AOConfig(), theta0, fixed_selection=sel)


def scheme_gs_rand(ch: ChannelSet, dims: SystemDims, theta0) -> RunResult:
    """Greedy selection at the given (random) phases, which are left untouched."""
    theta = check_phases(theta0, ch.n_elements)
    return _result(ch, greedy_mode_select(ch, theta, dims), theta)


def scheme_gs_ao(ch: ChannelSet, dims: SystemDims, theta0, cfg: AOConfig | None = None) -> RunResult:
    return run_ao(ch, dims, cfg or AOConfig(), theta0)


def scheme_ibcd_pdd(
    ch: ChannelSet,
    dims: SystemDims,
    theta0,
    cfg: PDDConfig | None = None,
    ao_cfg: AOConfig | None = None,
) -> RunResult:
    """PDD from the Fixed Index selection and the shared random phases."""
    init = (fixed_index_selection(ch.n_elements, dims.n_connected), theta0)
    return run_pdd(ch, dims, cfg or PDDConfig(), init, ao_cfg)


def exhaustive_search(
    ch: ChannelSet,
    dims: SystemDims,
    theta,
    objective: str = "exact",
    cap: int = EXHAUSTIVE_CAP,
) -> tuple[ModeSelection, float]:
    """Minimize over all ``a``-subsets in lexicographic order; the first minimizer wins."""
    n, a = ch.n_elements, dims.n_connected
    if comb(n, a) > cap:
        raise ValueError(f"C({n}, {a}) = {comb(n, a)} subsets exceeds the cap of {cap}")
    if objective == "exact":
        fn = reduced_objective
    elif objective == "approx":
        fn = approx_objective
    else:
        raise ValueError(f"unknown objective {objective!r}")
    theta = check_phases(theta, n)
    best_sel, best_val = None, np.inf
    for subset in itertools.combinations(range(n), a):
        sel = ModeSelection.from_indices(n, subset)
        val = fn(ch, sel, theta)
        if val < best_val:
            best_sel, best_val = sel, val
    return best_sel, float(best_val)


def scheme_exhaustive(ch: ChannelSet, dims: SystemDims, theta0, cap: int = EXHAUSTIVE_CAP) -> RunResult:
    sel, _ = exhaustive_search(ch, dims, theta0, "exact", cap)
    return _result(ch, sel, check_phases(theta0, ch.n_elements))


# ---------------------------------------------------------------- single-user cases


def _require_single_user(ch: ChannelSet, bs_antennas: int | None = None):
    if ch.n_users != 1:
        raise DimensionError("n_users", 1, ch.n_users)
    if bs_antennas is not None and ch.n_bs_antennas != bs_antennas:
        raise DimensionError("n_bs_antennas", bs_antennas, ch.n_bs_antennas)


def siso_closed_form(ch: ChannelSet, a: int) -> tuple[ModeSelection, np.ndarray]:
    """Top-``a`` ``|h_r|`` selection and co-phasing reflection for the SISO link.

    Exact for the phases; the selection rule ignores the reflection loss of the
    connected elements, which is accurate when the RDARS-BS link is weak.
    """
    _require_single_user(ch, bs_antennas=1)
    h_r = ch.h_ris[:, 0]
    order = np.lexsort((np.arange(ch.n_elements), -np.abs(h_r)))
    sel = ModeSelection.from_indices(ch.n_elements, sorted(order[:a].tolist()))
    theta = np.exp(1j * (np.angle(ch.h_direct[0, 0]) - np.angle(h_r) + np.angle(ch.g_bs[:, 0])))
    return sel, theta


def los_closed_form(ch: ChannelSet, sel: ModeSelection, rank_tol: float = 1e-9) -> np.ndarray:
    """Optimal phases for a single user when the RDARS-BS link is rank one.

    With ``G = s u w^H`` the reflected signal is ``w (r^T theta)``, where
    ``r_n = s conj(u_n) (1 - x_n) h_{r,n}``; aligning every ``r_n theta_n``
    with ``w^H h_d`` maximizes the received power. Connected (or zero-gain)
    entries are set to 1.
    """
    _require_single_user(ch)
    uu, ss, vh = np.linalg.svd(ch.g_bs, full_matrices=False)
    if ss.size > 1 and ss[1] > rank_tol * ss[0]:
        raise ValueError(f"G is not rank one (singular values {ss[:2]})")
    u, s, w = uu[:, 0], ss[0], vh[0].conj()
    r = s * u.conj() * (1.0 - sel.mask) * ch.h_ris[:, 0]
    ref = np.angle(w.conj() @ ch.h_direct[:, 0])
    theta = np.ones(ch.n_elements, dtype=complex)
    nz = np.abs(r) > 0
    theta[nz] = np.exp(1j * (ref - np.angle(r[nz])))
    return theta
