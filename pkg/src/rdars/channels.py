"""Seeded channel realizations: path loss, shadowing, Rician mixing, array responses.

Geometry conventions: the BS carries a half-wavelength ULA along the x axis;
the RDARS is a half-wavelength UPA in the x-z plane. For a unit direction
``d`` the UPA azimuth/elevation satisfy ``sin(az) sin(el) = d_x`` and
``cos(el) = d_z``.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .model import ChannelSet, DimensionError, SystemDims


def db_to_lin(db):
    return 10.0 ** (np.asarray(db, dtype=float) / 10.0)


def dbm_to_watt(dbm):
    return 10.0 ** ((np.asarray(dbm, dtype=float) - 30.0) / 10.0)


@dataclass(frozen=True)
class Topology:
    bs_position: tuple = (0.0, 100.0, 5.0)
    rdars_position: tuple = (0.0, 50.0, 15.0)
    user_center: tuple = (0.0, 0.0, 1.5)
    user_radius: float = 10.0

    def __post_init__(self):
        for name in ("bs_position", "rdars_position", "user_center"):
            pos = tuple(float(c) for c in getattr(self, name))
            if len(pos) != 3 or not np.all(np.isfinite(pos)):
                raise ValueError(f"{name} must be a finite 3-vector")
            object.__setattr__(self, name, pos)
        if not self.user_radius >= 0:
            raise ValueError("user_radius must be non-negative")


# RDARS midway between users and BS, and RDARS next to the BS
TOPOLOGY_1 = Topology(rdars_position=(0.0, 50.0, 15.0))
TOPOLOGY_2 = Topology(rdars_position=(0.0, 100.0, 15.0))


@dataclass(frozen=True)
class PathLossParams:
    beta0_db: float = -30.0
    exponent_rb: float = 2.2
    exponent_ur: float = 2.2
    exponent_ub: float = 3.5
    shadow_sigma_db: float = 5.8

    def __post_init__(self):
        if min(self.exponent_rb, self.exponent_ur, self.exponent_ub) <= 0:
            raise ValueError("path-loss exponents must be positive")
        if self.shadow_sigma_db < 0:
            raise ValueError("shadow_sigma_db must be non-negative")


@dataclass(frozen=True)
class RicianParams:
    """Normalized Rician factor for the RDARS links ``H_r`` and ``G``; ``H_d`` is Rayleigh."""

    kappa: float = 0.75

    def __post_init__(self):
        if not 0.0 <= self.kappa <= 1.0:
            raise ValueError("kappa must lie in [0, 1]")


@dataclass(frozen=True)
class ArrayGeometry:
    n_bs: int
    n_h: int
    n_v: int

    def __post_init__(self):
        if min(self.n_bs, self.n_h, self.n_v) < 1:
            raise ValueError("array sizes must be positive")

    @property
    def n_elements(self) -> int:
        return self.n_h * self.n_v

    @classmethod
    def for_elements(cls, n_bs: int, n: int) -> "ArrayGeometry":
        """Most balanced ``n_h x n_v`` factorization of ``n`` with ``n_h >= n_v``."""
        n_v = int(np.floor(np.sqrt(n)))
        while n % n_v:
            n_v -= 1
        return cls(n_bs=n_bs, n_h=n // n_v, n_v=n_v)


def path_loss(distance_m: float, exponent: float, params: PathLossParams, shadow_draw: float = 0.0) -> float:
    """Linear power gain ``10^((beta0 + shadow)/10) * d^-exponent``."""
    if not distance_m > 0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    return float(10.0 ** ((params.beta0_db + shadow_draw) / 10.0) * distance_m ** (-exponent))


def array_response_ula(n: int, angle: float) -> np.ndarray:
    return np.exp(1j * np.pi * np.arange(n) * np.sin(angle))


def array_response_upa(geom: ArrayGeometry, azimuth: float, elevation: float) -> np.ndarray:
    a_h = np.exp(1j * np.pi * np.arange(geom.n_h) * np.sin(azimuth) * np.sin(elevation))
    a_v = np.exp(1j * np.pi * np.arange(geom.n_v) * np.cos(elevation))
    return np.kron(a_h, a_v)


def rician_channel(los: np.ndarray, nlos_draw: np.ndarray, kappa: float) -> np.ndarray:
    los = np.asarray(los)
    nlos_draw = np.asarray(nlos_draw)
    if los.shape != nlos_draw.shape:
        raise DimensionError("nlos_draw", los.shape, nlos_draw.shape)
    if not 0.0 <= kappa <= 1.0:
        raise ValueError("kappa must lie in [0, 1]")
    return np.sqrt(kappa) * los + np.sqrt(1.0 - kappa) * nlos_draw


def _unit(v):
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v)


def _ula_angle(direction) -> float:
    return float(np.arcsin(np.clip(_unit(direction)[0], -1.0, 1.0)))


def _upa_angles(direction) -> tuple[float, float]:
    d = _unit(direction)
    return float(np.arctan2(d[0], d[1])), float(np.arccos(np.clip(d[2], -1.0, 1.0)))


def _cn(rng: np.random.Generator, shape) -> np.ndarray:
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2.0)


def drop_users(topo: Topology, m: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform user positions in the horizontal disk around ``user_center``."""
    r = topo.user_radius * np.sqrt(rng.random(m))
    phi = 2 * np.pi * rng.random(m)
    c = np.asarray(topo.user_center)
    return np.column_stack([c[0] + r * np.cos(phi), c[1] + r * np.sin(phi), np.full(m, c[2])])


def generate_channel_set(
    dims: SystemDims,
    topo: Topology,
    pl: PathLossParams,
    ric: RicianParams,
    seed: int,
    power=1e-3,
    noise_bs: float = 1e-12,
    noise_conn: float = 1e-12,
) -> ChannelSet:
    """Draw one realization; a deterministic function of the arguments.

    ``power`` is the per-user transmit power in watts (scalar or length-M).
    Shadowing is drawn once per link. Draw order: user drops, shadowing,
    then NLoS of ``H_d``, ``H_r``, ``G``.
    """
    rng = np.random.default_rng(seed)
    m, n, n_r = dims.n_users, dims.n_elements, dims.n_bs_antennas
    geom = ArrayGeometry.for_elements(n_r, n)
    users = drop_users(topo, m, rng)
    bs = np.asarray(topo.bs_position)
    ris = np.asarray(topo.rdars_position)

    sh_ub = rng.normal(0.0, pl.shadow_sigma_db, m)
    sh_ur = rng.normal(0.0, pl.shadow_sigma_db, m)
    sh_rb = rng.normal(0.0, pl.shadow_sigma_db)

    nlos_d = _cn(rng, (n_r, m))
    nlos_r = _cn(rng, (n, m))
    nlos_g = _cn(rng, (n, n_r))

    pl_ub = np.array([path_loss(np.linalg.norm(u - bs), pl.exponent_ub, pl, s) for u, s in zip(users, sh_ub)])
    pl_ur = np.array([path_loss(np.linalg.norm(u - ris), pl.exponent_ur, pl, s) for u, s in zip(users, sh_ur)])
    pl_rb = path_loss(np.linalg.norm(ris - bs), pl.exponent_rb, pl, sh_rb)

    h_d = nlos_d * np.sqrt(pl_ub)[None, :]

    los_r = np.column_stack([array_response_upa(geom, *_upa_angles(u - ris)) for u in users])
    h_r = rician_channel(los_r, nlos_r, ric.kappa) * np.sqrt(pl_ur)[None, :]

    a_arrive = array_response_upa(geom, *_upa_angles(bs - ris))
    a_depart = array_response_ula(n_r, _ula_angle(ris - bs))
    los_g = np.outer(a_arrive, a_depart.conj())
    g = rician_channel(los_g, nlos_g, ric.kappa) * np.sqrt(pl_rb)

    p = np.broadcast_to(np.asarray(power, dtype=float), (m,)).copy()
    meta = {
        "seed": int(seed),
        "dims": asdict(dims),
        "topology": asdict(topo),
        "path_loss": asdict(pl),
        "kappa": ric.kappa,
        "array": asdict(geom),
        "user_positions": users.tolist(),
    }
    return ChannelSet(h_d, h_r, g, p, noise_bs, noise_conn, meta=meta)


def iid_channel_set(
    dims: SystemDims,
    rng: np.random.Generator,
    power=1.0,
    noise_bs: float = 1.0,
    noise_conn: float = 1.0,
    g_scale: float = 1.0,
) -> ChannelSet:
    """Unit-variance i.i.d. Rayleigh channels, handy for small oracle checks."""
    m, n, n_r = dims.n_users, dims.n_elements, dims.n_bs_antennas
    h_d = _cn(rng, (n_r, m))
    h_r = _cn(rng, (n, m))
    g = g_scale * _cn(rng, (n, n_r))
    p = np.broadcast_to(np.asarray(power, dtype=float), (m,)).copy()
    return ChannelSet(h_d, h_r, g, p, noise_bs, noise_conn)
