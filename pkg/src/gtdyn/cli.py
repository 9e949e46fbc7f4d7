"""Command-line entry point ``gtdyn``.

Exit codes: 0 converged (or command done), 1 config/IO error, 2 diverged,
3 timed out.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import warnings
from dataclasses import replace
from pathlib import Path

import numpy as np

from .config import build_cost, build_schedule, load_config
from .costs import generate_ring_dataset, write_dataset_csv
from .dynamics import distinct_topologies, schedule_bounds
from .errors import GtdynError
from .experiment import bounds_report, exit_code, run_experiment, run_sweep, solve_oracle
from .io import write_json
from .scenarios import SCENARIOS, scenario_configs, spectrum_audit

__all__ = ["main", "build_parser"]


def _err(msg: str):
    print(f"gtdyn: {msg}", file=sys.stderr)


def _out_override(cfg, out: str | None):
    if out is not None and not os.environ.get("GTDYN_OUT"):
        return replace(cfg, out_dir=str(Path(out).resolve()))
    return cfg


def _report(outcome) -> None:
    s = outcome.result.summary
    print(
        f"{outcome.artifacts.summary_json.parent.name}: {s.verdict} after {s.steps_run} steps, "
        f"residual {s.final_residual!r}, disagreement {s.final_disagreement!r}"
    )


def cmd_run(args) -> int:
    cfg = _out_override(load_config(args.config), args.out)
    outcome = run_experiment(cfg)
    _report(outcome)
    return exit_code([outcome.verdict])


def cmd_sweep(args) -> int:
    cfg = _out_override(load_config(args.config), args.out)
    if cfg.sweep is None:
        _err("config has no sweep block")
        return 1
    rows, path = run_sweep(cfg, jobs=args.jobs)
    for r in rows:
        print(f"alpha={r['alpha']!r} eta={r['eta']!r} seed={r['seed']}: {r['verdict']}")
    print(f"wrote {path}")
    return 0


def cmd_scenario(args) -> int:
    if args.name not in SCENARIOS:
        _err(f"unknown scenario {args.name!r}; available: {', '.join(SCENARIOS)}")
        return 1
    out = str(Path(args.out).resolve())
    if args.name == "spectrum-audit":
        cases = spectrum_audit()
        passed = sum(c.passed for c in cases)
        report = [
            {
                "seed": c.seed,
                "n": c.n,
                "m": c.m,
                "alpha": c.alpha,
                "eta": c.eta,
                "continuous_passed": c.continuous.passed,
                "continuous_worst_real": c.continuous.worst_rest,
                "discrete_passed": c.discrete.passed,
                "discrete_worst_modulus": c.discrete.worst_rest,
            }
            for c in cases
        ]
        target = Path(os.environ.get("GTDYN_OUT") or out) / "spectrum-audit" / "audit.json"
        write_json(target, {"passed": passed, "total": len(cases), "cases": report})
        print(f"spectrum audit: {passed}/{len(cases)} instances pass; wrote {target}")
        return 0 if passed == len(cases) else 1
    verdicts = []
    for cfg in scenario_configs(args.name, out):
        if cfg.sweep is not None:
            rows, path = run_sweep(cfg, jobs=args.jobs)
            for r in rows:
                print(f"{cfg.name} alpha={r['alpha']!r} eta={r['eta']!r}: {r['verdict']}")
            print(f"wrote {path}")
            # a sweep completes regardless of the cell verdicts
            continue
        outcome = run_experiment(cfg)
        _report(outcome)
        verdicts.append(outcome.verdict)
    return exit_code(verdicts)


def cmd_bounds(args) -> int:
    cfg = _out_override(load_config(args.config), args.out)
    schedule = build_schedule(cfg)
    cost = build_cost(cfg, schedule.n)
    sim = cfg.sim_config()
    x_ref = None
    if cfg.x_ref == "oracle":
        x_ref = np.tile(solve_oracle(cost).x_star, (cost.n, 1))
    per, alpha, eta = schedule_bounds(distinct_topologies(schedule, sim.T), cost, x_ref, sim.alpha, sim.eta)
    report = bounds_report(per, alpha, eta, cfg.x_ref)
    path = write_json(cfg.output_dir() / cfg.name / "bounds.json", report)
    print(json.dumps(report["schedule_min"], indent=2, sort_keys=True))
    print(f"wrote {path}")
    return 0


def cmd_oracle(args) -> int:
    cfg = _out_override(load_config(args.config), args.out)
    schedule = build_schedule(cfg)
    result = solve_oracle(build_cost(cfg, schedule.n))
    path = write_json(cfg.output_dir() / cfg.name / "oracle.json", result.to_dict())
    print(json.dumps(result.to_dict(), indent=2, sort_keys=True))
    print(f"wrote {path}")
    return 0


def cmd_dataset(args) -> int:
    ds = generate_ring_dataset(args.points, args.inner, args.outer, args.noise, args.seed)
    write_dataset_csv(ds, args.out)
    print(f"wrote {len(ds.labels)} points to {args.out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="gtdyn", description="Gradient-tracking dynamics over switching digraphs")
    sub = p.add_subparsers(dest="command", required=True)

    for name, fn, text in (
        ("run", cmd_run, "single run from a JSON config"),
        ("sweep", cmd_sweep, "run every cell of the config's sweep grid"),
        ("bounds", cmd_bounds, "step-size bounds for the config's schedule"),
        ("oracle", cmd_oracle, "centralized optimum of the config's cost"),
    ):
        sp = sub.add_parser(name, help=text)
        sp.add_argument("config")
        sp.add_argument("--out", default=None, help="output directory (GTDYN_OUT takes precedence)")
        if name == "sweep":
            sp.add_argument("--jobs", type=int, default=1)
        sp.set_defaults(func=fn)

    sp = sub.add_parser("scenario", help="run a bundled scenario")
    sp.add_argument("name")
    sp.add_argument("--out", default="out")
    sp.add_argument("--jobs", type=int, default=1)
    sp.set_defaults(func=cmd_scenario)

    sp = sub.add_parser("dataset", help="write a ring dataset as CSV")
    sp.add_argument("--points", type=int, default=50)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--inner", type=float, default=1.0)
    sp.add_argument("--outer", type=float, default=2.0)
    sp.add_argument("--noise", type=float, default=0.0)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_dataset)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("always")
            return args.func(args)
    except (GtdynError, ValueError, KeyError, OSError) as exc:
        _err(str(exc))
        return 1


if __name__ == "__main__":
    sys.exit(main())
