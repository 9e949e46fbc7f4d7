"""JSON experiment configuration.

A config file looks like::

    {
      "name": "demo",
      "schedule": {"graphs": [...], "signal": {...}, "events": [...]},
      "cost": {"kind": "quadratic", "centers": [[0.0], [1.0], [2.0]]},
      "sim": {"alpha": 0.1, "eta": 0.05, "T": 5000},
      "sweep": {"alpha": [0.1, 0.2], "eta": [0.05], "seeds": [0, 1]},
      "out_dir": "out",
      "scenario": "free-form tag"
    }

``schedule`` may also be a path to a schedule JSON file, or a generator block
``{"generate": {"n": 6, "count": 50, "block": 100, "seed": 100}}`` that draws
``count`` random weight-balanced snapshots and cycles through them.
Relative paths resolve against the directory of the config file.
"""

from __future__ import annotations

import dataclasses
import json
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .costs import CostModel, cost_from_spec
from .dynamics import SimConfig
from .errors import ConfigError
from .graphs import Signal, SwitchingSchedule, TopologyEvent, random_weight_balanced_digraph

__all__ = [
    "SweepSpec",
    "ExperimentConfig",
    "SIM_FIELDS",
    "parse_config",
    "load_config",
    "dump_config",
    "build_schedule",
    "build_cost",
]

SIM_FIELDS = tuple(f.name for f in dataclasses.fields(SimConfig))
TOP_LEVEL = {"name", "schedule", "cost", "sim", "sweep", "out_dir", "scenario", "x_ref", "plot"}


@dataclass(frozen=True)
class SweepSpec:
    """Grid over ``alpha x eta x seeds``, or explicit ``(alpha, eta)`` pairs.

    When ``pairs`` is non-empty it replaces the ``alpha x eta`` product.
    Seeds override ``SimConfig.x_seed``.
    """

    alpha: tuple[float, ...] = ()
    eta: tuple[float, ...] = ()
    seeds: tuple[int, ...] = (0,)
    pairs: tuple[tuple[float, float], ...] = ()

    def cells(self) -> list[tuple[float, float, int]]:
        """Grid cells in deterministic (alpha, eta, seed) order."""
        pairs = self.pairs or tuple((a, e) for a in self.alpha for e in self.eta)
        return [(a, e, s) for a, e in pairs for s in self.seeds]

    def to_dict(self) -> dict:
        d = {"alpha": list(self.alpha), "eta": list(self.eta), "seeds": list(self.seeds)}
        if self.pairs:
            d["pairs"] = [list(p) for p in self.pairs]
        return d


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: topology, cost, run parameters and optional sweep grid.

    ``x_ref`` picks where the bound computation evaluates the Hessians:
    ``"zero"`` (the origin) or ``"oracle"`` (the centralized minimiser on every
    node).
    """

    name: str
    schedule: Any
    cost: dict
    sim: dict
    sweep: Optional[SweepSpec] = None
    out_dir: str = "out"
    scenario: str = ""
    x_ref: str = "zero"
    plot: bool = True
    base_dir: str = field(default=".", compare=False)

    def sim_config(self, **overrides) -> SimConfig:
        params = dict(self.sim)
        params.update({k: v for k, v in overrides.items() if v is not None})
        if params.get("x_init") is not None:
            params["x_init"] = np.asarray(params["x_init"], dtype=float)
        return SimConfig(**params)

    def output_dir(self) -> Path:
        """``GTDYN_OUT`` wins over the configured directory."""
        env = os.environ.get("GTDYN_OUT")
        if env:
            return Path(env)
        out = Path(self.out_dir)
        return out if out.is_absolute() else Path(self.base_dir) / out

    def to_dict(self) -> dict:
        d = {
            "name": self.name,
            "schedule": self.schedule,
            "cost": self.cost,
            "sim": self.sim,
            "out_dir": self.out_dir,
            "scenario": self.scenario,
            "x_ref": self.x_ref,
            "plot": self.plot,
        }
        if self.sweep is not None:
            d["sweep"] = self.sweep.to_dict()
        return d


def _jsonable(value):
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, np.generic):
        return value.item()
    return value


def _resolve(base: Path, p: str) -> Path:
    path = Path(p)
    return path if path.is_absolute() else base / path


def _check_files(schedule, cost: dict, base: Path):
    paths = []
    if isinstance(schedule, str):
        paths.append(schedule)
    elif isinstance(schedule, dict):
        paths.extend(g for g in schedule.get("graphs", ()) if isinstance(g, str))
    ds = cost.get("dataset", {})
    if isinstance(ds, dict) and "file" in ds:
        paths.append(ds["file"])
    for p in paths:
        if not _resolve(base, p).is_file():
            raise ConfigError(f"referenced file does not exist: {p}")


def _parse_sweep(data) -> SweepSpec:
    try:
        spec = SweepSpec(
            alpha=tuple(float(a) for a in data.get("alpha", ())),
            eta=tuple(float(e) for e in data.get("eta", ())),
            seeds=tuple(int(s) for s in data.get("seeds", (0,))),
            pairs=tuple((float(a), float(e)) for a, e in data.get("pairs", ())),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad sweep block: {exc}") from exc
    if not spec.cells():
        raise ConfigError("sweep grid is empty")
    return spec


def parse_config(data: dict, base_dir: str | Path = ".") -> ExperimentConfig:
    """Validate a config dict and build an :class:`ExperimentConfig`.

    Raises
    ------
    ConfigError
        On unknown keys, missing sections, bad simulation fields, missing
        referenced files or an empty sweep grid.
    """
    if not isinstance(data, dict):
        raise ConfigError("config must be a JSON object")
    unknown = set(data) - TOP_LEVEL
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    for key in ("schedule", "cost", "sim"):
        if key not in data:
            raise ConfigError(f"config is missing {key!r}")
    base = Path(base_dir)
    sim = _jsonable(dict(data["sim"]))
    bad = set(sim) - set(SIM_FIELDS)
    if bad:
        raise ConfigError(f"unknown sim fields: {sorted(bad)}")
    cost = _jsonable(dict(data["cost"]))
    schedule = _jsonable(data["schedule"])
    _check_files(schedule, cost, base)
    cfg = ExperimentConfig(
        name=str(data.get("name", "experiment")),
        schedule=schedule,
        cost=cost,
        sim=sim,
        sweep=_parse_sweep(data["sweep"]) if data.get("sweep") is not None else None,
        out_dir=str(data.get("out_dir", "out")),
        scenario=str(data.get("scenario", "")),
        x_ref=str(data.get("x_ref", "zero")),
        plot=bool(data.get("plot", True)),
        base_dir=str(base),
    )
    if cfg.x_ref not in ("zero", "oracle"):
        raise ConfigError(f"x_ref must be zero or oracle, got {cfg.x_ref!r}")
    try:
        cfg.sim_config()
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sim block: {exc}") from exc
    return cfg


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return parse_config(data, path.parent)


def dump_config(cfg: ExperimentConfig) -> str:
    return json.dumps(cfg.to_dict(), indent=2, sort_keys=True)


def _generated_schedule(spec: dict) -> SwitchingSchedule:
    n = int(spec["n"])
    count = int(spec.get("count", 1))
    seed = int(spec.get("seed", 0))
    cycles = int(spec.get("cycle_count", 2))
    graphs = tuple(random_weight_balanced_digraph(n, cycles, seed + s) for s in range(count))
    signal = Signal("periodic", block=int(spec.get("block", 1))) if count > 1 else Signal("constant")
    return SwitchingSchedule(graphs, signal)


def build_schedule(cfg: ExperimentConfig) -> SwitchingSchedule:
    base = Path(cfg.base_dir)
    spec = cfg.schedule
    try:
        if isinstance(spec, str):
            path = _resolve(base, spec)
            return SwitchingSchedule.from_dict(json.loads(path.read_text()), path.parent).validate()
        if "generate" in spec:
            sched = _generated_schedule(spec["generate"])
            events = tuple(TopologyEvent.from_dict(e) for e in spec.get("events", ()))
            if events:
                sched = SwitchingSchedule(sched.graphs, sched.signal, events)
            return sched.validate()
        return SwitchingSchedule.from_dict(spec, base).validate()
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad schedule block: {exc}") from exc


def build_cost(cfg: ExperimentConfig, n: int) -> CostModel:
    try:
        return cost_from_spec(cfg.cost, n, cfg.base_dir)
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"bad cost block: {exc}") from exc

