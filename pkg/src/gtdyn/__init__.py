"""Gradient-tracking optimization over switching weight-balanced digraphs.

Modules
-------
graphs    weighted digraph snapshots, switching schedules, topology events
spectral  spectra of the linearised system and step-size bounds
costs     quadratic and smoothed-hinge SVM node costs, ring datasets
dynamics  the sampled gradient-tracking iteration and run summaries
oracle    centralized reference minimiser
config, experiment, scenarios, plotting, io, cli
          the experiment harness behind the ``gtdyn`` command
"""

from .costs import CostModel, LabeledDataset, QuadraticCost, SvmCost, generate_ring_dataset, partition_dataset
from .dynamics import RunResult, RunSummary, SimConfig, SimState, ct_reference, run, step
from .errors import (
    ConfigError,
    ConnectivityLostError,
    DegenerateSpectrumError,
    DivergenceError,
    GtdynError,
    InvalidLayerError,
    LinkPreconditionError,
    NonFiniteCostError,
    NotStronglyConnectedError,
    NumericFailureError,
    OracleTimeoutError,
    ScheduleExhaustedError,
)
from .graphs import (
    Signal,
    SwitchingSchedule,
    TopologyEvent,
    WeightedDigraph,
    random_weight_balanced_digraph,
    remove_symmetric_link,
    topology_at,
)
from .oracle import OracleResult, solve_centralized, solve_quadratic_closed_form
from .spectral import StepSizeBounds, build_system_matrix, compute_bounds, euler_matrix

__all__ = [
    "CostModel",
    "LabeledDataset",
    "QuadraticCost",
    "SvmCost",
    "generate_ring_dataset",
    "partition_dataset",
    "RunResult",
    "RunSummary",
    "SimConfig",
    "SimState",
    "ct_reference",
    "run",
    "step",
    "ConfigError",
    "ConnectivityLostError",
    "DegenerateSpectrumError",
    "DivergenceError",
    "GtdynError",
    "InvalidLayerError",
    "LinkPreconditionError",
    "NonFiniteCostError",
    "NotStronglyConnectedError",
    "NumericFailureError",
    "OracleTimeoutError",
    "ScheduleExhaustedError",
    "Signal",
    "SwitchingSchedule",
    "TopologyEvent",
    "WeightedDigraph",
    "random_weight_balanced_digraph",
    "remove_symmetric_link",
    "topology_at",
    "OracleResult",
    "solve_centralized",
    "solve_quadratic_closed_form",
    "StepSizeBounds",
    "build_system_matrix",
    "compute_bounds",
    "euler_matrix",
]

__version__ = "0.1.0"
