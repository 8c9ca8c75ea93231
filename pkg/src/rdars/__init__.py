"""Sum-MSE minimization for RDARS-aided uplink MIMO: model, optimizers, baselines, benchmark."""

from .channels import (
    TOPOLOGY_1,
    TOPOLOGY_2,
    ArrayGeometry,
    PathLossParams,
    RicianParams,
    Topology,
    generate_channel_set,
    iid_channel_set,
)
from .greedy import AOConfig, RunResult, greedy_mode_select, phase_optimize_p9, run_ao
from .model import (
    ChannelSet,
    DimensionError,
    ModeSelection,
    Receiver,
    SystemDims,
    anmse,
    approx_objective,
    mse_matrix,
    optimal_receiver,
    reduced_objective,
)
from .pdd import PDDConfig, run_pdd
from .schemes import SchemeId, exhaustive_search

__all__ = [
    "AOConfig",
    "ArrayGeometry",
    "ChannelSet",
    "DimensionError",
    "ModeSelection",
    "PDDConfig",
    "PathLossParams",
    "Receiver",
    "RicianParams",
    "RunResult",
    "SchemeId",
    "SystemDims",
    "TOPOLOGY_1",
    "TOPOLOGY_2",
    "Topology",
    "anmse",
    "approx_objective",
    "exhaustive_search",
    "generate_channel_set",
    "greedy_mode_select",
    "iid_channel_set",
    "mse_matrix",
    "optimal_receiver",
    "phase_optimize_p9",
    "reduced_objective",
    "run_ao",
    "run_pdd",
]
