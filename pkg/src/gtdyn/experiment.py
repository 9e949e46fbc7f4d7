"""Run orchestration: oracle, bounds, simulation and artifact writing."""

from __future__ import annotations

import csv
import io
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig, build_cost, build_schedule, parse_config
from .costs import CostModel, QuadraticCost
from .dynamics import RunResult, distinct_topologies, run, schedule_bounds
from .io import atomic_write_text, write_json, write_trace_csv
from .oracle import OracleResult, solve_centralized, solve_quadratic_closed_form
from .plotting import emit_plot_data
from .spectral import StepSizeBounds, min_bounds

__all__ = [
    "RunArtifacts",
    "Outcome",
    "SWEEP_COLUMNS",
    "solve_oracle",
    "execute",
    "run_experiment",
    "run_sweep",
    "sweep_csv",
    "bounds_report",
    "exit_code",
]

SWEEP_COLUMNS = ("alpha", "eta", "seed", "verdict", "final_residual", "iters_to_tol")
EXIT_CODES = {"converged": 0, "diverged": 2, "timed-out": 3}


@dataclass
class RunArtifacts:
    trace_csv: Path
    summary_json: Path
    bounds_json: Path
    svg: Optional[Path] = None
    clamped: int = 0


@dataclass
class Outcome:
    result: RunResult
    oracle: Optional[OracleResult]
    bounds: dict
    artifacts: Optional[RunArtifacts] = None

    @property
    def verdict(self) -> str:
        return self.result.summary.verdict


def exit_code(verdicts) -> int:
    """0 if everything converged, else 2 if anything diverged, else 3."""
    codes = [EXIT_CODES[v] for v in verdicts]
    if 2 in codes:
        return 2
    if 3 in codes:
        return 3
    return 0


def solve_oracle(cost: CostModel) -> OracleResult:
    if isinstance(cost, QuadraticCost):
        return solve_quadratic_closed_form(cost)
    return solve_centralized(cost)


def bounds_report(per: list[StepSizeBounds], alpha: float, eta: float, x_ref: str) -> dict:
    return {
        "alpha_used": alpha,
        "eta_used": eta,
        "hessian_reference": x_ref,
        "schedule_min": min_bounds(per).to_dict(),
        "per_snapshot": [b.to_dict() for b in per],
    }


def execute(
    cfg: ExperimentConfig,
    alpha: float | None = None,
    eta: float | None = None,
    seed: int | None = None,
    oracle: OracleResult | None = None,
) -> Outcome:
    """Build everything from ``cfg`` and run once; nothing is written."""
    schedule = build_schedule(cfg)
    cost = build_cost(cfg, schedule.n)
    policy = "manual" if alpha is not None and eta is not None else None
    sim = cfg.sim_config(alpha=alpha, eta=eta, x_seed=seed, bound_policy=policy)
    if oracle is None:
        oracle = solve_oracle(cost)
    x_ref = np.tile(oracle.x_star, (cost.n, 1)) if cfg.x_ref == "oracle" else None
    result = run(sim, schedule, cost, oracle.F_star, x_ref=x_ref, with_bounds=False)
    s = result.summary
    per, _, _ = schedule_bounds(distinct_topologies(schedule, sim.T), cost, x_ref, alpha=s.alpha_used, eta=s.eta_used)
    s.bounds = min_bounds(per)
    return Outcome(result, oracle, bounds_report(per, s.alpha_used, s.eta_used, cfg.x_ref))


def _write(out_dir: Path, outcome: Outcome, cfg: ExperimentConfig, title: str) -> RunArtifacts:
    out_dir.mkdir(parents=True, exist_ok=True)
    res = outcome.result
    summary = res.summary.to_dict()
    summary["name"] = cfg.name
    summary["scenario"] = cfg.scenario
    if outcome.oracle is not None:
        summary["oracle"] = outcome.oracle.to_dict()
    arts = RunArtifacts(
        trace_csv=write_trace_csv(out_dir / "trace.csv", res.trace),
        summary_json=write_json(out_dir / "summary.json", summary),
        bounds_json=write_json(out_dir / "bounds.json", outcome.bounds),
    )
    if cfg.plot:
        plot = emit_plot_data(res.trace, out_dir / "trace.svg", title=title)
        arts.svg, arts.clamped = plot.svg_path, plot.clamped
    return arts


def run_experiment(cfg: ExperimentConfig, out_dir: Path | None = None) -> Outcome:
    """Single run with artifacts in ``out_dir`` (default ``<output_dir>/<name>``)."""
    outcome = execute(cfg)
    target = Path(out_dir) if out_dir is not None else cfg.output_dir() / cfg.name
    outcome.artifacts = _write(target, outcome, cfg, cfg.name)
    return outcome


def _cell_dir(root: Path, alpha: float, eta: float, seed: int) -> Path:
    return root / "cells" / f"alpha={alpha!r}_eta={eta!r}_seed={seed}"


def _sweep_cell(cfg_dict: dict, base_dir: str, root: str, alpha: float, eta: float, seed: int, oracle) -> dict:
    cfg = parse_config(cfg_dict, base_dir)
    outcome = execute(cfg, alpha, eta, seed, oracle)
    _write(_cell_dir(Path(root), alpha, eta, seed), outcome, cfg, f"{cfg.name} alpha={alpha!r} eta={eta!r}")
    s = outcome.result.summary
    return {
        "alpha": alpha,
        "eta": eta,
        "seed": seed,
        "verdict": s.verdict,
        "final_residual": s.final_residual,
        "iters_to_tol": s.iters_to_tol,
    }


def sweep_csv(rows: list[dict]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SWEEP_COLUMNS)
    for r in rows:
        iters = "" if r["iters_to_tol"] is None else str(r["iters_to_tol"])
        writer.writerow([repr(float(r["alpha"])), repr(float(r["eta"])), str(r["seed"]), r["verdict"], repr(float(r["final_residual"])), iters])
    return buf.getvalue()


def run_sweep(cfg: ExperimentConfig, jobs: int = 1, out_dir: Path | None = None) -> tuple[list[dict], Path]:
    """Run every sweep cell and write ``sweep.csv``; rows follow grid order.

    Cells are independent (own state, own artifact directory) and may run in
    a process pool when ``jobs > 1``; the combined CSV is the same either way.
    """
    if cfg.sweep is None:
        raise ValueError("config has no sweep block")
    root = Path(out_dir) if out_dir is not None else cfg.output_dir() / cfg.name
    schedule = build_schedule(cfg)
    oracle = solve_oracle(build_cost(cfg, schedule.n))
    cells = cfg.sweep.cells()
    args = [(cfg.to_dict(), cfg.base_dir, str(root), a, e, s, oracle) for a, e, s in cells]
    if jobs > 1 and len(cells) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_sweep_cell, *zip(*args)))
    else:
        rows = [_sweep_cell(*a) for a in args]
    path = atomic_write_text(root / "sweep.csv", sweep_csv(rows))
    return rows, path
