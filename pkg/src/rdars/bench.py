"""Monte-Carlo experiment runner: YAML config in, deterministic CSV out."""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np
import yaml

from .channels import (
    TOPOLOGY_1,
    TOPOLOGY_2,
    PathLossParams,
    RicianParams,
    Topology,
    dbm_to_watt,
    generate_channel_set,
)
from .greedy import AOConfig, RunResult
from .model import ChannelSet, SystemDims, random_phases
from .pdd import PDDConfig
from .schemes import (
    SchemeId,
    scheme_das,
    scheme_exhaustive,
    scheme_fixed_index,
    scheme_gs_ao,
    scheme_gs_rand,
    scheme_ibcd_pdd,
    scheme_passive_ris,
    scheme_random_index,
)

log = logging.getLogger(__name__)

SWEEP_AXES = ("power_dbm", "n_elements", "n_connected", "rician_factor")
NAMED_TOPOLOGIES = {"topology1": TOPOLOGY_1, "topology2": TOPOLOGY_2}
PROFILES = {
    "desk": {"n_elements": 64, "trials": 50},
    "paper": {"n_elements": 256, "trials": 300},
}


class ConfigError(ValueError):
    """Invalid experiment configuration; ``problems`` lists every violation."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))


@dataclass
class ExperimentConfig:
    dims: SystemDims
    topo: Topology
    pl: PathLossParams
    ric: RicianParams
    schemes: tuple
    sweep_axis: str
    sweep_values: tuple
    trials: int
    base_seed: int
    pdd: PDDConfig = field(default_factory=PDDConfig)
    ao: AOConfig = field(default_factory=AOConfig)
    output_path: str = "results.csv"
    power_dbm: float = 10.0
    noise_dbm: float = -90.0
    das_placement: str = "greedy"
    record_timing: bool = False

    def __post_init__(self):
        problems = []
        if self.sweep_axis not in SWEEP_AXES:
            problems.append(f"sweep.axis must be one of {SWEEP_AXES}, got {self.sweep_axis!r}")
        if len(self.sweep_values) == 0:
            problems.append("sweep.values must be non-empty")
        if self.trials < 1:
            problems.append(f"trials must be >= 1, got {self.trials}")
        if not self.schemes:
            problems.append("schemes must be non-empty")
        if self.das_placement not in ("fixed", "greedy"):
            problems.append(f"das_placement must be 'fixed' or 'greedy', got {self.das_placement!r}")
        if problems:
            raise ConfigError(problems)

    def with_profile(self, name: str) -> "ExperimentConfig":
        if name not in PROFILES:
            raise ConfigError([f"unknown profile {name!r}; choose from {sorted(PROFILES)}"])
        prof = PROFILES[name]
        dims = dataclasses.replace(self.dims, n_elements=prof["n_elements"])
        return dataclasses.replace(self, dims=dims, trials=prof["trials"])


# ------------------------------------------------------------------- parsing


def _section(raw: dict, key: str, cls, problems: list, required: bool = True):
    if key not in raw:
        if required:
            problems.append(f"missing key {key!r}")
            return None
        return cls()
    body = raw[key]
    if not isinstance(body, dict):
        problems.append(f"{key} must be a mapping")
        return None
    allowed = {f.name for f in fields(cls)}
    unknown = sorted(set(body) - allowed)
    for name in unknown:
        problems.append(f"unknown key {key}.{name}")
    if unknown:
        return None
    try:
        return cls(**body)
    except (TypeError, ValueError) as exc:
        problems.append(f"{key}: {exc}")
        return None


def _topology(raw: dict, problems: list):
    body = raw.get("topology")
    if body is None:
        problems.append("missing key 'topology'")
        return None
    if isinstance(body, str):
        if body not in NAMED_TOPOLOGIES:
            problems.append(f"topology must be one of {sorted(NAMED_TOPOLOGIES)} or a mapping, got {body!r}")
            return None
        return NAMED_TOPOLOGIES[body]
    return _section(raw, "topology", Topology, problems)


TOP_LEVEL_KEYS = {
    "dims",
    "topology",
    "path_loss",
    "rician",
    "schemes",
    "sweep",
    "trials",
    "base_seed",
    "pdd",
    "ao",
    "output_path",
    "power_dbm",
    "noise_dbm",
    "das_placement",
    "record_timing",
}


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Validate a parsed mapping; every violation is collected before raising."""
    if not isinstance(raw, dict):
        raise ConfigError(["config root must be a mapping"])
    problems = [f"unknown key {k!r}" for k in sorted(set(raw) - TOP_LEVEL_KEYS)]
    dims = _section(raw, "dims", SystemDims, problems)
    topo = _topology(raw, problems)
    pl = _section(raw, "path_loss", PathLossParams, problems)
    ric = _section(raw, "rician", RicianParams, problems)
    pdd = _section(raw, "pdd", PDDConfig, problems, required=False)
    ao = _section(raw, "ao", AOConfig, problems, required=False)

    schemes = ()
    if "schemes" not in raw:
        problems.append("missing key 'schemes'")
    else:
        try:
            schemes = tuple(SchemeId(s) for s in raw["schemes"])
        except (TypeError, ValueError):
            problems.append(f"schemes must be a list drawn from {[s.value for s in SchemeId]}")

    sweep = raw.get("sweep")
    axis, values = None, ()
    if not isinstance(sweep, dict):
        problems.append("missing or invalid key 'sweep' (needs axis and values)")
    else:
        for k in sorted(set(sweep) - {"axis", "values"}):
            problems.append(f"unknown key sweep.{k}")
        axis = sweep.get("axis")
        try:
            values = tuple(float(v) for v in sweep.get("values", []))
        except (TypeError, ValueError):
            problems.append("sweep.values must be a list of numbers")

    scalars = {}
    for key, kind, default in (
        ("trials", int, None),
        ("base_seed", int, None),
        ("power_dbm", float, 10.0),
        ("noise_dbm", float, -90.0),
        ("output_path", str, "results.csv"),
        ("das_placement", str, "greedy"),
        ("record_timing", bool, False),
    ):
        if key not in raw:
            if default is None:
                problems.append(f"missing key {key!r}")
            scalars[key] = default
            continue
        val = raw[key]
        numeric = (int,) if kind is int else (int, float)
        if kind in (int, float) and (isinstance(val, bool) or not isinstance(val, numeric)):
            problems.append(f"{key} must be {'an integer' if kind is int else 'a number'}, got {val!r}")
        elif kind in (str, bool) and not isinstance(val, kind):
            problems.append(f"{key} must be a {kind.__name__}, got {val!r}")
        else:
            scalars[key] = kind(val)

    if problems:
        raise ConfigError(problems)
    if axis == "n_connected" and values and max(values) > dims.n_elements:
        raise ConfigError([f"sweep value {max(values)} exceeds n_elements={dims.n_elements}"])
    return ExperimentConfig(
        dims=dims,
        topo=topo,
        pl=pl,
        ric=ric,
        schemes=schemes,
        sweep_axis=axis,
        sweep_values=values,
        pdd=pdd,
        ao=ao,
        **scalars,
    )


def parse_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"cannot read config {path}: {exc.strerror}"]) from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError([f"{path}: malformed YAML ({exc})"]) from exc
    return config_from_dict(raw)


# ------------------------------------------------------------------- records


@dataclass
class ResultRecord:
    scheme: str
    sweep_value: float
    trial: int
    seed: int
    anmse: float
    objective_exact: float
    objective_approx: float
    iterations: int
    converged: bool
    wall_time_ms: float | None
    channel_hash: str
    error: str = ""


CSV_FIELDS = [f.name for f in fields(ResultRecord)]


def _q(x: float) -> float:
    """Round to 9 significant digits so the CSV text round-trips exactly."""
    return float(f"{x:.9g}")


def cell_seed(base_seed: int, sweep_value: float, trial: int) -> int:
    """``base_seed XOR blake2b(sweep_value, trial)`` folded to 63 bits."""
    digest = hashlib.blake2b(f"{float(sweep_value)!r}:{int(trial)}".encode(), digest_size=8).digest()
    return (int(base_seed) ^ int.from_bytes(digest, "little")) & ((1 << 63) - 1)


def channel_hash(ch: ChannelSet) -> str:
    h = hashlib.blake2b(digest_size=8)
    for arr in (ch.h_direct, ch.h_ris, ch.g_bs, ch.power):
        h.update(np.ascontiguousarray(arr).tobytes())
    h.update(f"{ch.noise_bs!r}:{ch.noise_conn!r}".encode())
    return h.hexdigest()


def cell_setup(cfg: ExperimentConfig, sweep_value: float, trial: int):
    """Dimensions, channel and shared phase initialization for one cell."""
    dims, ric, power_dbm = cfg.dims, cfg.ric, cfg.power_dbm
    if cfg.sweep_axis == "power_dbm":
        power_dbm = sweep_value
    elif cfg.sweep_axis == "n_elements":
        dims = dataclasses.replace(dims, n_elements=int(sweep_value))
    elif cfg.sweep_axis == "n_connected":
        dims = dataclasses.replace(dims, n_connected=int(sweep_value))
    elif cfg.sweep_axis == "rician_factor":
        ric = RicianParams(kappa=sweep_value)
    seed = cell_seed(cfg.base_seed, sweep_value, trial)
    noise = float(dbm_to_watt(cfg.noise_dbm))
    ch = generate_channel_set(
        dims,
        cfg.topo,
        cfg.pl,
        ric,
        seed,
        power=float(dbm_to_watt(power_dbm)) / dims.n_users,
        noise_bs=noise,
        noise_conn=noise,
    )
    theta0 = random_phases(dims.n_elements, np.random.default_rng([seed, 1]))
    return dims, ch, theta0, seed


def run_scheme(scheme: SchemeId, cfg: ExperimentConfig, dims: SystemDims, ch: ChannelSet, theta0, seed: int) -> RunResult:
    if scheme is SchemeId.PassiveRIS:
        return scheme_passive_ris(ch, dims, theta0, cfg.ao)
    if scheme is SchemeId.DAS:
        return scheme_das(ch, dims, cfg.das_placement)
    if scheme is SchemeId.RandomIndex:
        return scheme_random_index(ch, dims, theta0, np.random.default_rng([seed, 2]), cfg.ao)
    if scheme is SchemeId.FixedIndex:
        return scheme_fixed_index(ch, dims, theta0, cfg.ao)
    if scheme is SchemeId.GSRand:
        return scheme_gs_rand(ch, dims, theta0)
    if scheme is SchemeId.GSAO:
        return scheme_gs_ao(ch, dims, theta0, cfg.ao)
    if scheme is SchemeId.IBCDPDD:
        return scheme_ibcd_pdd(ch, dims, theta0, cfg.pdd, cfg.ao)
    if scheme is SchemeId.Exhaustive:
        return scheme_exhaustive(ch, dims, theta0)
    raise ValueError(f"unhandled scheme {scheme}")


def run_cell(cfg: ExperimentConfig, sweep_value: float, trial: int) -> list:
    """All schemes on one (sweep value, trial); scheme failures become error rows."""
    dims, ch, theta0, seed = cell_setup(cfg, sweep_value, trial)
    chash = channel_hash(ch)
    out = []
    for scheme in cfg.schemes:
        t0 = time.perf_counter()
        try:
            res = run_scheme(scheme, cfg, dims, ch, theta0, seed)
        except Exception as exc:  # recorded, not fatal
            log.warning("scheme %s failed at (%s, %d): %s", scheme.value, sweep_value, trial, exc)
            out.append(
                ResultRecord(scheme.value, _q(sweep_value), trial, seed, math.nan, math.nan, math.nan, 0, False, None, chash, f"{type(exc).__name__}: {exc}")
            )
            continue
        elapsed = _q((time.perf_counter() - t0) * 1e3) if cfg.record_timing else None
        out.append(
            ResultRecord(
                scheme=scheme.value,
                sweep_value=_q(sweep_value),
                trial=trial,
                seed=seed,
                anmse=_q(res.objective_exact / dims.n_users),
                objective_exact=_q(res.objective_exact),
                objective_approx=_q(res.objective_approx),
                iterations=int(res.iterations),
                converged=bool(res.converged),
                wall_time_ms=elapsed,
                channel_hash=chash,
            )
        )
    return out


def _run_cell_args(args):
    return run_cell(*args)


def run_experiment(cfg: ExperimentConfig, workers: int = 1) -> list:
    """Every (sweep value, trial) cell; output order is independent of ``workers``."""
    cells = [(cfg, v, t) for v in cfg.sweep_values for t in range(cfg.trials)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_cell_args, cells, chunksize=max(1, len(cells) // (4 * workers))))
    else:
        chunks = [_run_cell_args(c) for c in cells]
    records = [r for chunk in chunks for r in chunk]
    records.sort(key=lambda r: (r.sweep_value, r.trial, r.scheme))
    return records


# ----------------------------------------------------------------------- CSV


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.9g}"
    return str(value)


def emit_csv(records, path) -> None:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_FIELDS)
            for rec in records:
                writer.writerow([_fmt(getattr(rec, name)) for name in CSV_FIELDS])
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc.strerror}") from exc


def read_csv(path) -> list:
    def opt_float(s):
        return None if s == "" else float(s)

    parsers = {
        "scheme": str,
        "sweep_value": float,
        "trial": int,
        "seed": int,
        "anmse": float,
        "objective_exact": float,
        "objective_approx": float,
        "iterations": int,
        "converged": lambda s: s == "true",
        "wall_time_ms": opt_float,
        "channel_hash": str,
        "error": str,
    }
    with Path(path).open(newline="") as fh:
        reader = csv.DictReader(fh)
        return [ResultRecord(**{k: parsers[k](row[k]) for k in CSV_FIELDS}) for row in reader]


def summarize(records) -> dict:
    """Mean ANMSE per (scheme, sweep value), skipping failed rows."""
    acc = {}
    for r in records:
        if r.error or not math.isfinite(r.anmse):
            continue
        acc.setdefault((r.scheme, r.sweep_value), []).append(r.anmse)
    return {k: float(np.mean(v)) for k, v in sorted(acc.items())}
