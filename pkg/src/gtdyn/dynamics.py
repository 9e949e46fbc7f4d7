"""Discrete-time gradient tracking over switching digraphs.

One step of the sampled dynamics (all nodes at once; ``Lw``, ``La`` are the
Laplacians of the active snapshot)::

    x(k+1) = x(k) + eta Lw x(k) - eta alpha y(k)
    y(k+1) = y(k) + eta La y(k) + grad f(x(k+1)) - grad f(x(k))

which is the forward-Euler map ``I + eta M(alpha)`` of the continuous system
for quadratic costs. All ``x`` rows are updated before any tracker reads
them. Setting ``SimConfig.scale_tracker_by_eta=False`` drops the ``eta`` from
the tracker term (``x - ... - alpha y``).

Under weight balance, ``sum_i (y_i - grad f_i(x_i))`` is conserved exactly
(up to rounding); :func:`run` monitors its drift.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .costs import CostModel
from .errors import DivergenceError
from .graphs import SwitchingSchedule, WeightedDigraph, topology_at, topology_segments
from .spectral import (
    StepSizeBounds,
    compute_bounds,
    eta_bound_gershgorin,
    lambda2_abs_real,
    min_bounds,
)

__all__ = [
    "SimState",
    "SimConfig",
    "TraceRecord",
    "RunSummary",
    "RunResult",
    "CtTrajectory",
    "step",
    "run",
    "compute_metrics",
    "initial_state",
    "distinct_topologies",
    "schedule_bounds",
    "ct_reference",
]


@dataclass
class SimState:
    x: np.ndarray
    y: np.ndarray
    k: int = 0

    def copy(self) -> "SimState":
        return SimState(self.x.copy(), self.y.copy(), self.k)


@dataclass
class SimConfig:
    """Run parameters.

    ``alpha``/``eta`` may be ``None`` when ``bound_policy == "auto"``; they are
    then set to 0.9 of the schedule-wide minimum of the spectral-gap bound and
    of the smaller sampling-step bound. ``tol_disagreement`` defaults to
    ``sqrt(tol_converge)`` because the residual is quadratic in the error.
    With ``stop_on_converge`` the run ends at the first recorded step that
    meets the convergence test (checked every few thousand steps on the
    compiled path) instead of always running ``T`` steps.
    """

    alpha: Optional[float] = None
    eta: Optional[float] = None
    T: int = 10_000
    y_init_mode: str = "local-gradient"
    x_init: Optional[np.ndarray] = None
    x_seed: int = 0
    bound_policy: str = "manual"
    divergence_threshold: float = 1e12
    record_stride: int = 1
    tol_converge: float = 1e-6
    tol_disagreement: Optional[float] = None
    scale_tracker_by_eta: bool = True
    record_states: bool = False
    backend: str = "auto"
    stop_on_converge: bool = False

    def __post_init__(self):
        if self.backend not in ("auto", "numpy", "compiled"):
            raise ValueError(f"backend must be auto, numpy or compiled, got {self.backend!r}")
        if self.bound_policy not in ("manual", "auto"):
            raise ValueError(f"bound_policy must be manual or auto, got {self.bound_policy!r}")
        if self.y_init_mode not in ("local-gradient", "zero"):
            raise ValueError(f"y_init_mode must be local-gradient or zero, got {self.y_init_mode!r}")
        if self.bound_policy == "manual":
            if self.alpha is None or self.eta is None:
                raise ValueError("manual bound policy needs alpha and eta")
            if self.alpha <= 0 or self.eta <= 0:
                raise ValueError("alpha and eta must be positive")
        if self.T <= 0:
            raise ValueError("T must be positive")
        if self.record_stride < 1:
            raise ValueError("record_stride must be >= 1")

    @property
    def disagreement_tol(self) -> float:
        if self.tol_disagreement is not None:
            return self.tol_disagreement
        return math.sqrt(self.tol_converge)


@dataclass
class TraceRecord:
    k: int
    residual: float
    disagreement: float
    grad_sum_norm: float
    y_sum_norm: float
    x: Optional[np.ndarray] = None


@dataclass
class RunSummary:
    verdict: str
    final_residual: float
    final_disagreement: float
    iters_to_tol: Optional[int]
    alpha_used: float
    eta_used: float
    bounds: Optional[StepSizeBounds]
    initial_residual: float
    steps_run: int
    conservation_drift: float
    max_grad_magnitude: float
    limit_point: list
    gamma_audit_max: float
    gamma_reestimated: Optional[float] = None
    shifted_stationarity_gap: Optional[float] = None

    def to_dict(self) -> dict:
        def num(v):
            return None if v is None or (isinstance(v, float) and math.isnan(v)) else v

        return {
            "verdict": self.verdict,
            "final_residual": num(self.final_residual),
            "final_disagreement": num(self.final_disagreement),
            "iters_to_tol": self.iters_to_tol,
            "alpha_used": self.alpha_used,
            "eta_used": self.eta_used,
            "bounds": None if self.bounds is None else self.bounds.to_dict(),
            "initial_residual": num(self.initial_residual),
            "steps_run": self.steps_run,
            "conservation_drift": self.conservation_drift,
            "max_grad_magnitude": self.max_grad_magnitude,
            "limit_point": self.limit_point,
            "gamma_audit_max": self.gamma_audit_max,
            "gamma_reestimated": self.gamma_reestimated,
            "shifted_stationarity_gap": self.shifted_stationarity_gap,
        }


@dataclass
class RunResult:
    trace: list
    summary: RunSummary
    final_state: SimState


def _consensus(weights, v):
    # sum_j w_ij (v_j - v_i): equals L v, but is exactly zero at consensus
    return np.einsum("ij,ijk->ik", weights, v[None, :, :] - v[:, None, :])


def _advance(x, y, gx, w, a, cost, alpha, eta, scale_tracker):
    gain = eta * alpha if scale_tracker else alpha
    x_new = x + eta * _consensus(w, x) - gain * y
    g_new = cost.grads(x_new)
    y_new = y + eta * _consensus(a, y) + g_new - gx
    return x_new, y_new, g_new


def _diverged(x, threshold) -> bool:
    return not np.all(np.isfinite(x)) or float(np.abs(x).max()) > threshold


def step(
    state: SimState,
    graph: WeightedDigraph,
    cost: CostModel,
    alpha: float,
    eta: float,
    scale_tracker_by_eta: bool = True,
    divergence_threshold: float = 1e12,
) -> SimState:
    """Advance one step on ``graph``.

    Raises
    ------
    DivergenceError
        If the new state is non-finite or exceeds ``divergence_threshold``.
    """
    x = np.asarray(state.x, dtype=float)
    y = np.asarray(state.y, dtype=float)
    x_new, y_new, _ = _advance(x, y, cost.grads(x), graph.weights_w, graph.weights_a, cost, alpha, eta, scale_tracker_by_eta)
    if _diverged(x_new, divergence_threshold) or not np.all(np.isfinite(y_new)):
        raise DivergenceError(f"state diverged at step {state.k + 1}", state.k + 1)
    return SimState(x_new, y_new, state.k + 1)


def compute_metrics(state: SimState, cost: CostModel, Fstar: float | None = None, keep_state: bool = False) -> TraceRecord:
    """Residual, disagreement and gradient-tracking sums for one state.

    ``residual`` is ``nan`` when ``Fstar`` is unavailable.
    """
    x = np.asarray(state.x, dtype=float)
    y = np.asarray(state.y, dtype=float)
    xbar = x.mean(axis=0)
    residual = float(cost.values(x).sum() - Fstar) if Fstar is not None else math.nan
    return TraceRecord(
        k=state.k,
        residual=residual,
        disagreement=float(np.linalg.norm(x - xbar, axis=1).max()),
        grad_sum_norm=float(np.linalg.norm(cost.grads(x).sum(axis=0))),
        y_sum_norm=float(np.linalg.norm(y.sum(axis=0))),
        x=x.copy() if keep_state else None,
    )


def initial_state(config: SimConfig, cost: CostModel) -> SimState:
    if config.x_init is not None:
        x = np.array(config.x_init, dtype=float).reshape(cost.n, cost.m)
    else:
        x = np.random.default_rng(config.x_seed).uniform(-1.0, 1.0, size=(cost.n, cost.m))
    y = cost.grads(x) if config.y_init_mode == "local-gradient" else np.zeros_like(x)
    return SimState(x, y, 0)


def distinct_topologies(schedule: SwitchingSchedule, T: int) -> list[WeightedDigraph]:
    """Snapshots visited during steps ``0..T-1``, in order of first use."""
    seen: dict[int, WeightedDigraph] = {}
    for _, g in topology_segments(schedule, T):
        seen.setdefault(id(g), g)
    return list(seen.values())


def schedule_bounds(
    graphs,
    cost: CostModel,
    x_ref=None,
    alpha: float | None = None,
    eta: float | None = None,
) -> tuple[list[StepSizeBounds], float, float]:
    """Per-snapshot bounds plus the ``(alpha, eta)`` an auto policy would pick.

    The Hessian stack is evaluated at ``x_ref`` (an ``n x m`` array; zeros by
    default). When ``alpha``/``eta`` are given they are used as the evaluation
    points instead of the auto choices.
    """
    graphs = list(graphs)
    xs = np.zeros((cost.n, cost.m)) if x_ref is None else np.asarray(x_ref, dtype=float)
    hess = cost.hessian_stack(xs)
    gamma = cost.gamma
    if alpha is None:
        gap = min(min(lambda2_abs_real(g.laplacian_w), lambda2_abs_real(g.laplacian_a)) for g in graphs)
        alpha = 0.9 * gap / gamma
    per = [compute_bounds(g.laplacian_w, g.laplacian_a, hess, gamma, cost.m, alpha=alpha, eta=eta) for g in graphs]
    if eta is None:
        eta = 0.9 * min(min(b.eta_max_gershgorin, b.eta_max_perturbation) for b in per)
        per = [
            compute_bounds(g.laplacian_w, g.laplacian_a, hess, gamma, cost.m, alpha=alpha, eta=eta) for g in graphs
        ]
    return per, float(alpha), float(eta)


@dataclass
class _Stepped:
    ks: list
    xs: list
    ys: list
    x: np.ndarray
    y: np.ndarray
    drift: float
    max_grad: float
    diverged: bool
    steps_run: int


def _kernel_for(cost: CostModel):
    """Compiled gradient routine and its parameters, or ``None``."""
    try:
        from . import _kernels
    except ImportError:
        return None
    from .costs import QuadraticCost, SvmCost

    if type(cost) is SvmCost:
        params = np.array([cost.mu, cost.c, cost.ridge_nu])
        return _kernels.SVM, (cost._g, cost._mask, params)
    if type(cost) is QuadraticCost:
        # same (3-d, 2-d, 1-d) layout as the SVM parameters: one compiled signature
        return _kernels.QUADRATIC, (cost.curvatures, cost.centers, np.zeros(1))
    return None


CHUNK = 50_000


def _step_numpy(x, y, segments, cost, alpha, eta, config, stop) -> _Stepped:
    starts = [s for s, _ in segments]
    gx = cost.grads(x)
    inv0 = (y - gx).sum(axis=0)
    drift = 0.0
    max_grad = float(np.abs(gx).max())
    stride = config.record_stride
    ks, xs, ys = [0], [x.copy()], [y.copy()]
    diverged = False
    steps_run = config.T
    seg = 0
    for k in range(config.T):
        while seg + 1 < len(starts) and starts[seg + 1] <= k:
            seg += 1
        g = segments[seg][1]
        x_new, y_new, g_new = _advance(x, y, gx, g.weights_w, g.weights_a, cost, alpha, eta, config.scale_tracker_by_eta)
        if _diverged(x_new, config.divergence_threshold) or not np.all(np.isfinite(y_new)):
            diverged, steps_run = True, k
            break
        x, y, gx = x_new, y_new, g_new
        drift = max(drift, float(np.abs((y - gx).sum(axis=0) - inv0).max()))
        max_grad = max(max_grad, float(np.abs(gx).max()))
        if (k + 1) % stride == 0 or k + 1 == config.T:
            ks.append(k + 1)
            xs.append(x.copy())
            ys.append(y.copy())
            if stop is not None and stop(k + 1, x, y):
                steps_run = k + 1
                break
    return _Stepped(ks, xs, ys, x, y, drift, max_grad, diverged, steps_run)


def _step_compiled(kernel, x, y, segments, alpha, eta, config, stop) -> _Stepped:
    from ._kernels import _grads, run_loop

    kind, (p1, p2, p3) = kernel
    index: dict[int, int] = {}
    weights_w, weights_a, snaps = [], [], []
    for _, g in segments:
        if id(g) not in index:
            index[id(g)] = len(weights_w)
            weights_w.append(g.weights_w)
            weights_a.append(g.weights_a)
        snaps.append(index[id(g)])
    weights_w = np.ascontiguousarray(weights_w)
    weights_a = np.ascontiguousarray(weights_a)
    seg_start = np.array([s for s, _ in segments], dtype=np.int64)
    seg_snap = np.array(snaps, dtype=np.int64)
    gain = eta * alpha if config.scale_tracker_by_eta else alpha
    stride = config.record_stride
    T = config.T
    chunk = T if stop is None else max(stride, CHUNK // stride * stride)

    x = np.ascontiguousarray(x, dtype=float)
    y = np.ascontiguousarray(y, dtype=float)
    gx = np.empty_like(x)
    _grads(kind, x, p1, p2, p3, gx)
    inv0 = (y - gx).sum(axis=0)
    max_grad = float(np.abs(gx).max())
    drift = 0.0
    ks, xs, ys = [0], [x.copy()], [y.copy()]
    diverged = False
    steps_run = T
    k = 0
    while k < T:
        k1 = min(T, k + chunk)
        rk, rx, ry, x, y, d, max_grad, diverged, steps_run = run_loop(
            kind, p1, p2, p3, x, y, weights_w, weights_a, seg_start, seg_snap,
            k, k1, T, float(gain), float(eta), float(config.divergence_threshold), stride, inv0, max_grad,
        )
        drift = max(drift, float(d))
        ks.extend(int(v) for v in rk)
        xs.extend(rx)
        ys.extend(ry)
        if diverged:
            break
        if stop is not None and k1 < T and stop(k1, x, y):
            steps_run = k1
            break
        k = k1
    return _Stepped(ks, xs, ys, x, y, drift, float(max_grad), bool(diverged), int(steps_run))


def run(
    config: SimConfig,
    schedule: SwitchingSchedule,
    cost: CostModel,
    oracle_Fstar: float | None = None,
    x_ref=None,
    with_bounds: bool = True,
) -> RunResult:
    """Execute ``config.T`` steps over ``schedule`` and summarise the outcome.

    The verdict is ``"converged"`` when the final ``|residual|`` is within
    ``tol_converge`` (or, without ``oracle_Fstar``, the gradient sum is) and
    the disagreement is within the disagreement tolerance; ``"diverged"`` when
    the state leaves the finite region or exceeds the divergence threshold
    (the trace up to the last finite state is kept); ``"timed-out"`` otherwise.

    With ``config.backend`` ``"auto"`` the compiled loop is used for the
    built-in quadratic and SVM costs and the numpy loop for anything else.
    """
    if cost.n != schedule.n:
        raise ValueError(f"cost has {cost.n} nodes, schedule has {schedule.n}")
    segments = topology_segments(schedule, config.T)
    graphs = list({id(g): g for _, g in segments}.values())
    for g in graphs:
        g.validate()

    alpha, eta = config.alpha, config.eta
    bounds = None
    if config.bound_policy == "auto":
        per, alpha, eta = schedule_bounds(graphs, cost, x_ref)
        bounds = min_bounds(per)
    elif with_bounds:
        per, _, _ = schedule_bounds(graphs, cost, x_ref, alpha=alpha, eta=eta)
        bounds = min_bounds(per)

    gamma = cost.gamma
    state = initial_state(config, cost)
    g0_sum = cost.grads(state.x).sum(axis=0)

    tol, tol_dis = config.tol_converge, config.disagreement_tol

    def within(rec):
        primary = abs(rec.residual) if oracle_Fstar is not None else rec.grad_sum_norm
        return primary <= tol and rec.disagreement <= tol_dis

    def converged_at(k, x, y):
        return within(compute_metrics(SimState(x, y, k), cost, oracle_Fstar))

    stop = converged_at if config.stop_on_converge else None

    kernel = None if config.backend == "numpy" else _kernel_for(cost)
    if config.backend == "compiled" and kernel is None:
        raise ValueError(f"no compiled kernel for {type(cost).__name__}")
    if kernel is not None:
        out = _step_compiled(kernel, state.x, state.y, segments, alpha, eta, config, stop)
    else:
        out = _step_numpy(state.x, state.y, segments, cost, alpha, eta, config, stop)

    keep = config.record_states
    trace = [compute_metrics(SimState(xr, yr, kr), cost, oracle_Fstar, keep) for kr, xr, yr in zip(out.ks, out.xs, out.ys)]
    audit_max = max(float(np.linalg.norm(cost.hessians(xr), 2, axis=(1, 2)).max()) for xr in out.xs)

    last = trace[-1]
    if out.diverged:
        verdict = "diverged"
    else:
        verdict = "converged" if within(last) else "timed-out"
    iters = next((rec.k for rec in trace if within(rec)), None)

    reestimated = None
    if audit_max > gamma:
        reestimated = 1.05 * audit_max
        warnings.warn(
            f"Hessian norm {audit_max:.4g} on the trajectory exceeds gamma={gamma:.4g}; "
            f"re-estimated gamma is {reestimated:.4g}",
            RuntimeWarning,
            stacklevel=2,
        )

    xbar = out.x.mean(axis=0)
    shifted = None
    if config.y_init_mode == "zero":
        shifted = float(np.linalg.norm(cost.total_grad(xbar) - g0_sum))

    summary = RunSummary(
        verdict=verdict,
        final_residual=last.residual,
        final_disagreement=last.disagreement,
        iters_to_tol=iters,
        alpha_used=float(alpha),
        eta_used=float(eta),
        bounds=bounds,
        initial_residual=trace[0].residual,
        steps_run=out.steps_run,
        conservation_drift=out.drift,
        max_grad_magnitude=out.max_grad,
        limit_point=[float(v) for v in xbar],
        gamma_audit_max=audit_max,
        gamma_reestimated=reestimated,
        shifted_stationarity_gap=shifted,
    )
    return RunResult(trace, summary, SimState(out.x, out.y, out.steps_run))


@dataclass
class CtTrajectory:
    times: np.ndarray
    x: np.ndarray
    y: np.ndarray


def ct_reference(
    x0,
    y0,
    schedule: SwitchingSchedule,
    cost: CostModel,
    alpha: float,
    dt: float,
    horizon: float,
    time_unit: float | None = None,
    sample_every: int = 1,
) -> CtTrajectory:
    """Classical RK4 integration of the continuous-time dynamics.

    ``dx/dt = Lw x - alpha y`` and ``dy/dt = La y + H(x) dx/dt`` with the
    analytic node Hessians. The active snapshot at time ``t`` is
    ``topology_at(schedule, floor(t / time_unit))`` (``time_unit`` defaults to
    ``dt``) and is held fixed within each RK4 step.

    Raises
    ------
    ValueError
        If ``dt`` exceeds ``1e-3`` of the Gershgorin sampling bound of the
        initial snapshot.
    DivergenceError
        If the trajectory becomes non-finite.
    """
    unit = dt if time_unit is None else time_unit
    g0 = topology_at(schedule, 0)
    if dt > 1e-3 * eta_bound_gershgorin(g0.laplacian_w, g0.laplacian_a):
        raise ValueError("dt is too large for a reference integration")
    n_steps = int(round(horizon / dt))
    x = np.array(x0, dtype=float).reshape(cost.n, cost.m)
    y = np.array(y0, dtype=float).reshape(cost.n, cost.m)

    def rhs(xv, yv, lap_w, lap_a):
        xd = lap_w @ xv - alpha * yv
        yd = lap_a @ yv + np.einsum("nij,nj->ni", cost.hessians(xv), xd)
        return xd, yd

    times, xs, ys = [0.0], [x.copy()], [y.copy()]
    laps: dict[int, tuple] = {}
    for s in range(n_steps):
        g = topology_at(schedule, int(math.floor(s * dt / unit + 1e-9)))
        lap_w, lap_a = laps.setdefault(id(g), (g.laplacian_w, g.laplacian_a))
        k1x, k1y = rhs(x, y, lap_w, lap_a)
        k2x, k2y = rhs(x + 0.5 * dt * k1x, y + 0.5 * dt * k1y, lap_w, lap_a)
        k3x, k3y = rhs(x + 0.5 * dt * k2x, y + 0.5 * dt * k2y, lap_w, lap_a)
        k4x, k4y = rhs(x + dt * k3x, y + dt * k3y, lap_w, lap_a)
        x = x + dt / 6.0 * (k1x + 2 * k2x + 2 * k3x + k4x)
        y = y + dt / 6.0 * (k1y + 2 * k2y + 2 * k3y + k4y)
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise DivergenceError(f"reference trajectory diverged at step {s + 1}", s + 1)
        if (s + 1) % sample_every == 0 or s + 1 == n_steps:
            times.append((s + 1) * dt)
            xs.append(x.copy())
            ys.append(y.copy())
    return CtTrajectory(np.array(times), np.array(xs), np.array(ys))
