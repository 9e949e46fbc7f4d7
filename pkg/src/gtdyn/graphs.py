"""Weight-balanced digraphs, Laplacians and switching topologies.

A topology snapshot carries two weight layers over the same node set: ``w``
couples the decision states and ``a`` couples the gradient trackers. Every
snapshot used in a simulation must be weight-balanced and strongly connected
in both layers, with row sums strictly below one.

Snapshots are immutable. Mutations such as link removal return new objects,
which keeps replay of a dynamic topology deterministic.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConnectivityLostError,
    InvalidLayerError,
    LinkPreconditionError,
    ScheduleExhaustedError,
)

__all__ = [
    "TOL_WB",
    "ROW_SUM_CAP",
    "WeightedDigraph",
    "Signal",
    "TopologyEvent",
    "SwitchingSchedule",
    "build_laplacian",
    "is_strongly_connected",
    "is_weight_balanced",
    "random_weight_balanced_digraph",
    "remove_symmetric_link",
    "topology_at",
    "topology_segments",
]

TOL_WB = 1e-9
ROW_SUM_CAP = 0.9


def _as_layer(layer) -> np.ndarray:
    arr = np.array(layer, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise InvalidLayerError(f"weight layer must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidLayerError("weight layer has non-finite entries")
    if np.any(arr < 0):
        raise InvalidLayerError("weight layer has negative entries")
    if np.any(np.diag(arr) != 0):
        raise InvalidLayerError("weight layer has non-zero diagonal (self-loops)")
    return arr


def build_laplacian(layer) -> np.ndarray:
    """Return the Laplacian of a weight layer.

    Off-diagonal entries copy the link weights and the diagonal holds minus
    the row sums, so ``L @ 1 == 0`` and all eigenvalues have non-positive
    real part.

    Raises
    ------
    InvalidLayerError
        If the layer is not square, has negative entries or a non-zero diagonal.
    """
    w = _as_layer(layer)
    lap = w.copy()
    np.fill_diagonal(lap, -w.sum(axis=1))
    return lap


def is_strongly_connected(layer) -> bool:
    """True iff every ordered node pair is joined by a directed positive-weight path."""
    arr = np.asarray(layer, dtype=float)
    n = arr.shape[0]
    if n == 1:
        return True
    support = (arr > 0).astype(np.int8)
    np.fill_diagonal(support, 0)
    n_comp, _ = connected_components(support, directed=True, connection="strong")
    return n_comp == 1


def is_weight_balanced(layer, tol_wb: float = TOL_WB) -> bool:
    """True iff out-weight equals in-weight at every node within ``tol_wb``."""
    arr = np.asarray(layer, dtype=float)
    return bool(np.all(np.abs(arr.sum(axis=1) - arr.sum(axis=0)) <= tol_wb))


@dataclass(frozen=True, eq=False)
class WeightedDigraph:
    """One topology snapshot with state layer ``w`` and tracker layer ``a``.

    Construction checks the structural requirements (square, non-negative,
    zero diagonal). The balance, connectivity and row-sum requirements are
    checked by :meth:`validate`, since intermediate graphs produced while
    mutating a topology may legitimately violate them.
    """

    weights_w: np.ndarray
    weights_a: np.ndarray

    def __post_init__(self):
        w = _as_layer(self.weights_w)
        a = _as_layer(self.weights_a)
        if w.shape != a.shape:
            raise InvalidLayerError(f"layer shapes differ: {w.shape} vs {a.shape}")
        w.setflags(write=False)
        a.setflags(write=False)
        object.__setattr__(self, "weights_w", w)
        object.__setattr__(self, "weights_a", a)

    @classmethod
    def from_single(cls, layer) -> "WeightedDigraph":
        """Snapshot whose two layers are the same matrix."""
        return cls(layer, layer)

    @property
    def n(self) -> int:
        return self.weights_w.shape[0]

    @property
    def laplacian_w(self) -> np.ndarray:
        return build_laplacian(self.weights_w)

    @property
    def laplacian_a(self) -> np.ndarray:
        return build_laplacian(self.weights_a)

    def violations(self, tol_wb: float = TOL_WB) -> list[str]:
        """Human-readable list of broken assumptions; empty when valid."""
        problems = []
        for name, layer in (("w", self.weights_w), ("a", self.weights_a)):
            rows = layer.sum(axis=1)
            if np.any(rows >= 1.0):
                problems.append(f"layer {name}: row sum {rows.max():.6g} is not < 1")
            if not is_weight_balanced(layer, tol_wb):
                problems.append(f"layer {name}: not weight-balanced")
            if not is_strongly_connected(layer):
                problems.append(f"layer {name}: not strongly connected")
        return problems

    def is_valid(self, tol_wb: float = TOL_WB) -> bool:
        return not self.violations(tol_wb)

    def validate(self, tol_wb: float = TOL_WB) -> "WeightedDigraph":
        """Return ``self`` or raise if any assumption on the snapshot fails."""
        problems = self.violations(tol_wb)
        if problems:
            raise InvalidLayerError("; ".join(problems))
        return self

    def __eq__(self, other):
        if not isinstance(other, WeightedDigraph):
            return NotImplemented
        return np.array_equal(self.weights_w, other.weights_w) and np.array_equal(
            self.weights_a, other.weights_a
        )

    __hash__ = None

    def to_dict(self) -> dict:
        return {"n": self.n, "w": self.weights_w.tolist(), "a": self.weights_a.tolist()}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightedDigraph":
        w = data["w"]
        a = data.get("a", w)
        g = cls(w, a)
        if "n" in data and int(data["n"]) != g.n:
            raise InvalidLayerError(f"declared n={data['n']} but matrices are {g.n}x{g.n}")
        return g


def _cycle_superposition(n, cycle_count, rng) -> np.ndarray:
    w = np.zeros((n, n))
    for _ in range(cycle_count):
        perm = rng.permutation(n)
        weight = rng.uniform(0.1, 1.0)
        w[perm, np.roll(perm, -1)] += weight
    return w


def random_weight_balanced_digraph(
    n: int, cycle_count: int = 2, rng_seed: int | None = 0, same_layers: bool = False
) -> WeightedDigraph:
    """Random balanced, strongly connected digraph built from Hamiltonian cycles.

    Each of the ``cycle_count`` cycles follows a random node permutation and
    carries a single positive weight, so every cycle is balanced on its own and
    so is their sum. Each layer is then scaled so its largest row sum is
    ``ROW_SUM_CAP``. With ``same_layers`` the tracker layer copies the state
    layer, otherwise it is drawn independently from the same generator.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if cycle_count < 1:
        raise ValueError(f"need cycle_count >= 1, got {cycle_count}")
    rng = np.random.default_rng(rng_seed)
    layers = []
    for _ in range(1 if same_layers else 2):
        w = _cycle_superposition(n, cycle_count, rng)
        w *= ROW_SUM_CAP / w.sum(axis=1).max()
        layers.append(w)
    return WeightedDigraph(layers[0], layers[-1])


def remove_symmetric_link(g: WeightedDigraph, i: int, j: int, tol_wb: float = TOL_WB) -> WeightedDigraph:
    """Drop the bidirectional link ``i <-> j`` from both layers.

    Removing a symmetric pair subtracts the same amount from node ``i``'s in-
    and out-weight (and likewise for ``j``), so weight balance survives without
    touching any other link.

    Raises
    ------
    LinkPreconditionError
        If the link is missing or not symmetric in either layer.
    ConnectivityLostError
        If either layer stops being strongly connected.
    """
    if i == j:
        raise LinkPreconditionError("endpoints must differ")
    for name, layer in (("w", g.weights_w), ("a", g.weights_a)):
        fwd, back = layer[i, j], layer[j, i]
        if not (fwd > 0 and back > 0 and abs(fwd - back) <= tol_wb):
            raise LinkPreconditionError(
                f"layer {name}: link ({i}, {j}) is absent or asymmetric ({fwd!r} vs {back!r})"
            )
    w = g.weights_w.copy()
    a = g.weights_a.copy()
    for layer in (w, a):
        layer[i, j] = layer[j, i] = 0.0
    out = WeightedDigraph(w, a)
    if not (is_strongly_connected(w) and is_strongly_connected(a)):
        raise ConnectivityLostError(f"removing link ({i}, {j}) disconnects the graph")
    return out


@dataclass(frozen=True)
class Signal:
    """Switching rule from step index to snapshot index.

    ``kind`` is ``"constant"`` (always ``index``), ``"periodic"`` (snapshot
    ``floor(k / block) mod count``) or ``"table"`` (``table[k]``, undefined
    past the end of the table).
    """

    kind: str = "constant"
    index: int = 0
    block: int = 1
    table: tuple[int, ...] = ()

    def __post_init__(self):
        if self.kind not in ("constant", "periodic", "table"):
            raise ValueError(f"unknown signal kind {self.kind!r}")
        if self.kind == "periodic" and self.block < 1:
            raise ValueError("periodic block length must be >= 1")
        object.__setattr__(self, "table", tuple(int(t) for t in self.table))

    def __call__(self, k: int, count: int) -> int:
        if k < 0:
            raise ScheduleExhaustedError(f"negative step {k}")
        if self.kind == "constant":
            return self.index
        if self.kind == "periodic":
            return (k // self.block) % count
        if k >= len(self.table):
            raise ScheduleExhaustedError(f"signal table has no entry for step {k}")
        return self.table[k]

    def to_dict(self) -> dict:
        if self.kind == "constant":
            return {"kind": "constant", "index": self.index}
        if self.kind == "periodic":
            return {"kind": "periodic", "block": self.block}
        return {"kind": "table", "table": list(self.table)}

    @classmethod
    def from_dict(cls, data: dict) -> "Signal":
        kind = data.get("kind", "constant")
        return cls(
            kind=kind,
            index=int(data.get("index", 0)),
            block=int(data.get("block", 1)),
            table=tuple(data.get("table", ())),
        )


@dataclass(frozen=True)
class TopologyEvent:
    """A change scheduled at step ``step``.

    ``symmetric-link-removal`` drops the link ``i <-> j`` from whatever snapshot
    is active; ``snapshot-switch`` pins the base snapshot to ``index`` from then
    on, overriding the signal.
    """

    step: int
    kind: str
    i: int | None = None
    j: int | None = None
    index: int | None = None

    def __post_init__(self):
        if self.kind not in ("symmetric-link-removal", "snapshot-switch"):
            raise ValueError(f"unknown event kind {self.kind!r}")
        if self.kind == "symmetric-link-removal" and (self.i is None or self.j is None):
            raise ValueError("link removal needs endpoints i and j")
        if self.kind == "snapshot-switch" and self.index is None:
            raise ValueError("snapshot switch needs an index")

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"step": self.step, "kind": self.kind}
        if self.kind == "symmetric-link-removal":
            d.update(i=self.i, j=self.j)
        else:
            d["index"] = self.index
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "TopologyEvent":
        return cls(
            step=int(data["step"]),
            kind=data["kind"],
            i=data.get("i"),
            j=data.get("j"),
            index=data.get("index"),
        )


@dataclass(frozen=True, eq=False)
class SwitchingSchedule:
    """Ordered snapshots, a switching signal and scheduled topology events."""

    graphs: tuple[WeightedDigraph, ...]
    signal: Signal = field(default_factory=Signal)
    events: tuple[TopologyEvent, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        graphs = tuple(self.graphs)
        if not graphs:
            raise ValueError("schedule needs at least one snapshot")
        sizes = {g.n for g in graphs}
        if len(sizes) != 1:
            raise ValueError(f"snapshots disagree on node count: {sorted(sizes)}")
        object.__setattr__(self, "graphs", graphs)
        object.__setattr__(self, "events", tuple(sorted(self.events, key=lambda e: e.step)))

    @classmethod
    def constant(cls, graph: WeightedDigraph, events=()) -> "SwitchingSchedule":
        return cls((graph,), Signal("constant"), tuple(events))

    @property
    def n(self) -> int:
        return self.graphs[0].n

    def validate(self, tol_wb: float = TOL_WB) -> "SwitchingSchedule":
        for idx, g in enumerate(self.graphs):
            problems = g.violations(tol_wb)
            if problems:
                raise InvalidLayerError(f"snapshot {idx}: " + "; ".join(problems))
        return self

    def to_dict(self) -> dict:
        return {
            "graphs": [g.to_dict() for g in self.graphs],
            "signal": self.signal.to_dict(),
            "events": [e.to_dict() for e in self.events],
        }

    @classmethod
    def from_dict(cls, data: dict, base_dir: str | Path | None = None) -> "SwitchingSchedule":
        """Parse a schedule; string entries in ``graphs`` are snapshot file paths."""
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        graphs = []
        for entry in data["graphs"]:
            if isinstance(entry, str):
                path = Path(entry)
                if not path.is_absolute():
                    path = base / path
                entry = json.loads(path.read_text())
            graphs.append(WeightedDigraph.from_dict(entry))
        return cls(
            tuple(graphs),
            Signal.from_dict(data.get("signal", {"kind": "constant"})),
            tuple(TopologyEvent.from_dict(e) for e in data.get("events", ())),
        )


def topology_at(schedule: SwitchingSchedule, k: int) -> WeightedDigraph:
    """Snapshot active at step ``k`` with every event at steps ``<= k`` applied.

    Results are memoised on the schedule, keyed by the base snapshot and the
    set of applied events, so repeated calls inside a simulation loop are cheap.

    Raises
    ------
    ScheduleExhaustedError
        If the signal is undefined at ``k``.
    """
    n_applied = 0
    base = None
    for ev in schedule.events:
        if ev.step > k:
            break
        n_applied += 1
        if ev.kind == "snapshot-switch":
            base = ev.index
    if base is None:
        base = schedule.signal(k, len(schedule.graphs))
    if not 0 <= base < len(schedule.graphs):
        raise ScheduleExhaustedError(f"signal selected snapshot {base} of {len(schedule.graphs)}")
    key = (base, n_applied)
    cached = schedule._cache.get(key)
    if cached is not None:
        return cached
    g = schedule.graphs[base]
    for ev in schedule.events[:n_applied]:
        if ev.kind == "symmetric-link-removal":
            g = remove_symmetric_link(g, ev.i, ev.j)
    schedule._cache[key] = g
    return g


def topology_segments(schedule: SwitchingSchedule, T: int) -> list[tuple[int, WeightedDigraph]]:
    """Piecewise-constant view of steps ``0..T-1`` as ``(start_step, snapshot)``.

    Only the steps where the signal or an event can change the topology are
    queried, so this is cheap for long horizons. Consecutive segments never
    share a snapshot.
    """
    sig = schedule.signal
    points = {0}
    points.update(ev.step for ev in schedule.events if 0 <= ev.step < T)
    if sig.kind == "periodic":
        points.update(range(0, T, sig.block))
    elif sig.kind == "table":
        limit = min(T, len(sig.table))
        points.update(k for k in range(1, limit) if sig.table[k] != sig.table[k - 1])
        if T > len(sig.table):
            points.add(len(sig.table))
    segments: list[tuple[int, WeightedDigraph]] = []
    for k in sorted(points):
        g = topology_at(schedule, k)
        if not segments or segments[-1][1] is not g:
            segments.append((k, g))
    return segments
