"""Bundled, fully seeded scenarios.

* ``quadratic-5node``: the seven-link five-node topology, quadratic
  costs with identical curvature (so the optimum is the mean of the centers),
  step sizes chosen automatically from the bounds.
* ``fig3-link-removal``: SVM training on the same topology; one run drops
  the symmetric link between nodes 3 and 4 (zero-based) halfway through, and
  two static runs use the topology before and after the removal.
* ``fig4-dynamic``: SVM training over six nodes whose link weights are
  redrawn every 100 steps; sweeps three ``(alpha, eta)`` pairs.
* ``fig4-alpha5-eta0.005``: the unstable cell of that sweep as a single run.
* ``spectrum-audit``: continuous and discrete spectrum checks on 100 random
  weight-balanced networks with quadratic costs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .config import ExperimentConfig, SweepSpec, parse_config
from .costs import QuadraticCost
from .graphs import SwitchingSchedule, WeightedDigraph, random_weight_balanced_digraph, remove_symmetric_link
from .spectral import (
    SpectrumReport,
    build_system_matrix,
    check_continuous_spectrum,
    check_discrete_spectrum,
    compute_bounds,
    euler_matrix,
)

__all__ = [
    "SCENARIOS",
    "FIVE_NODE_EDGES",
    "REMOVABLE_LINK",
    "FIG4_PAIRS",
    "FIG3_RING",
    "FIG4_RING",
    "five_node_topology",
    "ring_svm_cost_spec",
    "scenario_configs",
    "AuditCase",
    "random_quadratic_instance",
    "spectrum_audit",
    "three_node_quadratic",
]

# zero-based undirected edges: the square 0-1-3-4 plus node 2 linked to 0, 1 and 3
FIVE_NODE_EDGES = ((0, 1), (0, 2), (1, 2), (1, 3), (2, 3), (3, 4), (0, 4))
REMOVABLE_LINK = (3, 4)
FIG4_PAIRS = ((1.0, 0.01), (5.0, 0.005), (8.0, 0.001))
# the wider ring has ~3.5x the Hessian norm, which is what makes (5, 0.005)
# unstable while (1, 0.01) and (8, 0.001) stay stable
FIG3_RING = (1.0, 2.0)
FIG4_RING = (2.2, 3.2)

SCENARIOS = ("quadratic-5node", "fig3-link-removal", "fig4-dynamic", "fig4-alpha5-eta0.005", "spectrum-audit")

SVM_TOL = 1e-3


def five_node_topology(rng_seed: int = 0) -> WeightedDigraph:
    """Symmetric weights in ``[0.1, 1]`` on each layer, scaled to max row sum 0.9."""
    rng = np.random.default_rng(rng_seed)
    layers = []
    for _ in range(2):
        w = np.zeros((5, 5))
        for i, j in FIVE_NODE_EDGES:
            w[i, j] = w[j, i] = rng.uniform(0.1, 1.0)
        layers.append(w * (0.9 / w.sum(axis=1).max()))
    return WeightedDigraph(layers[0], layers[1])


def ring_svm_cost_spec(
    inner_radius: float, outer_radius: float, n_points: int = 50, seed: int = 3, partition_seed: int = 1
) -> dict:
    """SVM cost on a ring dataset (disk of ``inner_radius`` against the annulus out to ``outer_radius``)."""
    ring = {"n_points": n_points, "inner_radius": inner_radius, "outer_radius": outer_radius, "seed": seed}
    return {
        "kind": "svm",
        "mu": 3.0,
        "c": 1.5,
        "dataset": {"generate": ring},
        "fraction": 0.8,
        "seed": partition_seed,
    }


def _schedule_dict(graph: WeightedDigraph, events=()) -> dict:
    return {"graphs": [graph.to_dict()], "signal": {"kind": "constant"}, "events": list(events)}


def _quadratic_5node(out_dir: str) -> list[ExperimentConfig]:
    centers = np.random.default_rng(5).normal(size=(5, 2))
    data = {
        "name": "quadratic-5node",
        "scenario": "quadratic-5node",
        "schedule": _schedule_dict(five_node_topology()),
        "cost": QuadraticCost.homogeneous(centers, 1.0).to_spec(),
        "sim": {"bound_policy": "auto", "T": 20_000, "tol_converge": 1e-6, "record_stride": 10},
        "out_dir": out_dir,
    }
    return [parse_config(data)]


def _fig3(out_dir: str, T: int = 8_000_000) -> list[ExperimentConfig]:
    full = five_node_topology()
    reduced = remove_symmetric_link(full, *REMOVABLE_LINK)
    i, j = REMOVABLE_LINK
    removal = {"step": T // 2, "kind": "symmetric-link-removal", "i": i, "j": j}
    sim = {"alpha": 1.0, "eta": 0.001, "T": T, "tol_converge": SVM_TOL, "record_stride": 1000}
    runs = (
        ("fig3-removal-midrun", _schedule_dict(full, [removal])),
        ("fig3-static-before", _schedule_dict(full)),
        ("fig3-static-after", _schedule_dict(reduced)),
    )
    return [
        parse_config(
            {
                "name": name,
                "scenario": "fig3-link-removal",
                "schedule": sched,
                "cost": ring_svm_cost_spec(*FIG3_RING),
                "sim": dict(sim),
                "out_dir": out_dir,
            }
        )
        for name, sched in runs
    ]


def _fig4_base(name: str, out_dir: str) -> dict:
    return {
        "name": name,
        "scenario": "fig4-dynamic",
        "schedule": {"generate": {"n": 6, "count": 50, "block": 100, "seed": 100, "cycle_count": 2}},
        "cost": ring_svm_cost_spec(*FIG4_RING),
        "sim": {"T": 10_000_000, "tol_converge": SVM_TOL, "record_stride": 10_000, "stop_on_converge": True},
        "out_dir": out_dir,
    }


def _fig4_dynamic(out_dir: str) -> list[ExperimentConfig]:
    data = _fig4_base("fig4-dynamic", out_dir)
    data["sim"].update(alpha=FIG4_PAIRS[0][0], eta=FIG4_PAIRS[0][1])
    data["sweep"] = SweepSpec(pairs=FIG4_PAIRS).to_dict()
    return [parse_config(data)]


def _fig4_unstable(out_dir: str) -> list[ExperimentConfig]:
    data = _fig4_base("fig4-alpha5-eta0.005", out_dir)
    data["sim"].update(alpha=5.0, eta=0.005)
    return [parse_config(data)]


def scenario_configs(name: str, out_dir: str = "out") -> list[ExperimentConfig]:
    """Configs for a bundled scenario (empty for ``spectrum-audit``).

    Raises
    ------
    KeyError
        For an unknown scenario name.
    """
    builders = {
        "quadratic-5node": _quadratic_5node,
        "fig3-link-removal": _fig3,
        "fig4-dynamic": _fig4_dynamic,
        "fig4-alpha5-eta0.005": _fig4_unstable,
        "spectrum-audit": lambda out: [],
    }
    if name not in builders:
        raise KeyError(name)
    return builders[name](out_dir)


@dataclass
class AuditCase:
    seed: int
    n: int
    m: int
    alpha: float
    eta: float
    continuous: SpectrumReport
    discrete: SpectrumReport

    @property
    def passed(self) -> bool:
        return self.continuous.passed and self.discrete.passed


def random_quadratic_instance(seed: int):
    """Random network with ``n`` in 3..8, ``m`` in {1, 2} and SPD node curvatures.

    Returns ``(graph, cost)``.
    """
    rng = np.random.default_rng(1000 + seed)
    n = int(rng.integers(3, 9))
    m = int(rng.integers(1, 3))
    graph = random_weight_balanced_digraph(n, int(rng.integers(1, 4)), seed)
    curv = []
    for _ in range(n):
        b = rng.normal(size=(m, m))
        curv.append(b @ b.T + 0.5 * np.eye(m))
    return graph, QuadraticCost(rng.normal(size=(n, m)), np.array(curv))


def spectrum_audit(count: int = 100, start_seed: int = 0) -> list[AuditCase]:
    """Check both spectra at ``alpha = 0.9`` of the gap bound and ``eta = 0.9`` of
    the smaller sampling-step bound on ``count`` random instances."""
    cases = []
    for seed in range(start_seed, start_seed + count):
        graph, cost = random_quadratic_instance(seed)
        lw, la = graph.laplacian_w, graph.laplacian_a
        hess = block_diag(*cost.curvatures)
        b = compute_bounds(lw, la, hess, cost.gamma, cost.m)
        system = build_system_matrix(lw, la, hess, b.auto_alpha, cost.m)
        cases.append(
            AuditCase(
                seed=seed,
                n=cost.n,
                m=cost.m,
                alpha=b.auto_alpha,
                eta=b.auto_eta,
                continuous=check_continuous_spectrum(system, cost.m),
                discrete=check_discrete_spectrum(euler_matrix(system, b.auto_eta), cost.m),
            )
        )
    return cases


def three_node_quadratic(rng_seed: int = 7):
    """Three-node weight-balanced network with scalar quadratic costs; returns
    ``(schedule, cost)``."""
    graph = random_weight_balanced_digraph(3, 2, rng_seed)
    centers = np.random.default_rng(rng_seed).normal(size=(3, 1))
    return SwitchingSchedule.constant(graph), QuadraticCost(centers, [1.0, 2.0, 0.5])
