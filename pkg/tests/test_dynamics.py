import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import cycle_layer
from gtdyn.costs import QuadraticCost, SvmCost, generate_ring_dataset, partition_dataset
from gtdyn.dynamics import (
    SimConfig,
    SimState,
    compute_metrics,
    ct_reference,
    distinct_topologies,
    initial_state,
    run,
    schedule_bounds,
    step,
)
from gtdyn.errors import DivergenceError
from gtdyn.graphs import Signal, SwitchingSchedule, WeightedDigraph, random_weight_balanced_digraph
from gtdyn.oracle import solve_centralized, solve_quadratic_closed_form
from gtdyn.spectral import lambda2_abs_real

PAIR = WeightedDigraph(np.array([[0, 0.25], [0.25, 0]]), np.array([[0, 0.25], [0.25, 0]]))


def small_svm(n, seed=0):
    ds = generate_ring_dataset(30, 1.0, 2.0, 0.0, seed)
    return SvmCost.from_dataset(ds, partition_dataset(ds, n, 0.8, seed))


def random_quadratic(n, m, seed):
    rng = np.random.default_rng(seed)
    curv = []
    for _ in range(n):
        b = rng.normal(size=(m, m))
        curv.append(b @ b.T + 0.5 * np.eye(m))
    return QuadraticCost(rng.normal(size=(n, m)), curv)


class TestStep:
    @pytest.mark.parametrize("scaled", [True, False])
    def test_two_node_hand_example(self, scaled):
        cost = QuadraticCost([[0.0], [2.0]], [1.0, 1.0])
        state = SimState(np.array([[0.0], [2.0]]), np.zeros((2, 1)))
        out = step(state, PAIR, cost, alpha=0.5, eta=0.1, scale_tracker_by_eta=scaled)
        np.testing.assert_allclose(out.x.ravel(), [0.05, 1.95], rtol=0, atol=1e-15)
        np.testing.assert_allclose(out.y.ravel(), [0.05, -0.05], rtol=0, atol=1e-15)
        assert out.k == 1

    def test_single_node_is_gradient_descent(self):
        cost = QuadraticCost([[3.0]], [1.0])
        single = WeightedDigraph(np.zeros((1, 1)), np.zeros((1, 1)))
        x0 = np.array([[7.0]])
        state = SimState(x0, cost.grads(x0))
        out = step(state, single, cost, alpha=0.25, eta=0.1, scale_tracker_by_eta=False)
        assert out.x[0, 0] == pytest.approx(7.0 - 0.25 * 4.0, rel=1e-15)
        np.testing.assert_allclose(out.y, cost.grads(out.x), rtol=0, atol=1e-15)

    def test_single_node_default_scales_by_eta(self):
        cost = QuadraticCost([[3.0]], [1.0])
        single = WeightedDigraph(np.zeros((1, 1)), np.zeros((1, 1)))
        x0 = np.array([[7.0]])
        out = step(SimState(x0, cost.grads(x0)), single, cost, alpha=0.25, eta=0.1)
        assert out.x[0, 0] == pytest.approx(7.0 - 0.1 * 0.25 * 4.0, rel=1e-15)

    @pytest.mark.parametrize("seed", range(5))
    def test_consensus_state_is_exactly_fixed(self, seed):
        g = random_weight_balanced_digraph(5, 2, seed)
        for cost in (random_quadratic(5, 1, seed), QuadraticCost.homogeneous(np.arange(5.0)[:, None])):
            state = SimState(np.full((5, 1), 5.0), np.zeros((5, 1)))
            out = step(state, g, cost, alpha=0.7, eta=0.3)
            np.testing.assert_array_equal(out.x, state.x)
            np.testing.assert_array_equal(out.y, state.y)

    def test_consensus_state_fixed_for_svm(self):
        g = random_weight_balanced_digraph(4, 2, 1)
        cost = small_svm(4)
        xbar = np.array([0.3, -0.7, 0.1, 1.9])
        state = SimState(np.tile(xbar, (4, 1)), np.zeros((4, 4)))
        out = step(state, g, cost, alpha=1.0, eta=0.01)
        np.testing.assert_array_equal(out.x, state.x)
        np.testing.assert_array_equal(out.y, state.y)

    def test_divergence_raises_with_step(self):
        cost = QuadraticCost([[0.0], [2.0]], [1.0, 1.0])
        state = SimState(np.array([[0.0], [1e11]]), np.array([[0.0], [-1e12]]), k=41)
        with pytest.raises(DivergenceError) as info:
            step(state, PAIR, cost, alpha=1.0, eta=1.0)
        assert info.value.step == 42


@given(seed=st.integers(0, 10_000), perm_seed=st.integers(0, 10_000))
def test_permutation_equivariance(seed, perm_seed):
    n, m = 5, 2
    g = random_weight_balanced_digraph(n, 2, seed)
    cost = random_quadratic(n, m, seed)
    rng = np.random.default_rng(seed)
    state = SimState(rng.normal(size=(n, m)), rng.normal(size=(n, m)))
    p = np.random.default_rng(perm_seed).permutation(n)
    gp = WeightedDigraph(g.weights_w[np.ix_(p, p)], g.weights_a[np.ix_(p, p)])
    cost_p = QuadraticCost(cost.centers[p], cost.curvatures[p])
    out = step(state, g, cost, 0.4, 0.2)
    out_p = step(SimState(state.x[p], state.y[p]), gp, cost_p, 0.4, 0.2)
    np.testing.assert_allclose(out_p.x, out.x[p], rtol=0, atol=1e-13)
    np.testing.assert_allclose(out_p.y, out.y[p], rtol=0, atol=1e-13)


@given(seed=st.integers(0, 10_000), n=st.integers(2, 7), xbar=st.floats(-50, 50))
def test_fixed_point_property(seed, n, xbar):
    g = random_weight_balanced_digraph(n, 2, seed)
    cost = random_quadratic(n, 1, seed)
    state = SimState(np.full((n, 1), xbar), np.zeros((n, 1)))
    out = step(state, g, cost, 0.9, 0.4)
    np.testing.assert_array_equal(out.x, state.x)
    np.testing.assert_array_equal(out.y, state.y)


@given(seed=st.integers(0, 10_000), steps=st.integers(1, 40))
def test_conservation_and_tracking(seed, steps):
    n = 4
    g = random_weight_balanced_digraph(n, 2, seed)
    cost = random_quadratic(n, 2, seed)
    x0 = np.random.default_rng(seed).normal(size=(n, 2))
    state = SimState(x0, cost.grads(x0))
    scale = 1.0 + np.abs(cost.grads(x0)).max()
    for _ in range(steps):
        state = step(state, g, cost, 0.3, 0.2)
        scale = max(scale, 1.0 + np.abs(cost.grads(state.x)).max())
        drift = np.abs((state.y - cost.grads(state.x)).sum(axis=0)).max()
        assert drift <= 1e-8 * scale


class TestMetrics:
    def test_at_optimum(self):
        cost = random_quadratic(4, 2, 3)
        opt = solve_quadratic_closed_form(cost)
        rec = compute_metrics(SimState(np.tile(opt.x_star, (4, 1)), np.zeros((4, 2))), cost, opt.F_star)
        assert abs(rec.residual) <= 1e-10
        assert rec.disagreement == 0.0
        assert rec.grad_sum_norm <= 1e-8

    def test_own_centers(self):
        centers = np.array([[0.0], [1.0], [5.0]])
        cost = QuadraticCost.homogeneous(centers)
        rec = compute_metrics(SimState(centers.copy(), np.zeros((3, 1))), cost, 0.0)
        assert rec.grad_sum_norm == 0.0
        assert rec.disagreement > 0.0

    def test_consensus_residual_nonnegative(self, rng):
        cost = random_quadratic(5, 2, 4)
        opt = solve_quadratic_closed_form(cost)
        for _ in range(50):
            x = np.tile(rng.normal(scale=3, size=2), (5, 1))
            assert compute_metrics(SimState(x, x), cost, opt.F_star).residual >= -1e-8 * (1 + abs(opt.F_star))

    def test_disagreeing_residual_can_be_negative(self):
        # each node at its own minimiser: sum_i f_i = 0 < F*
        centers = np.array([[0.0], [2.0]])
        cost = QuadraticCost.homogeneous(centers)
        rec = compute_metrics(SimState(centers.copy(), np.zeros((2, 1))), cost, 1.0)
        assert rec.residual == -1.0

    def test_missing_fstar(self):
        cost = random_quadratic(3, 1, 0)
        assert np.isnan(compute_metrics(SimState(np.zeros((3, 1)), np.zeros((3, 1))), cost).residual)

    def test_keep_state(self):
        cost = random_quadratic(3, 1, 0)
        x = np.ones((3, 1))
        rec = compute_metrics(SimState(x, x), cost, 0.0, keep_state=True)
        np.testing.assert_array_equal(rec.x, x)
        x[0, 0] = 9.0
        assert rec.x[0, 0] == 1.0


class TestConfig:
    @pytest.mark.parametrize(
        "kwargs",
        [
            {"alpha": None, "eta": 0.1},
            {"alpha": -1.0, "eta": 0.1},
            {"alpha": 1.0, "eta": 0.1, "T": 0},
            {"alpha": 1.0, "eta": 0.1, "record_stride": 0},
            {"alpha": 1.0, "eta": 0.1, "y_init_mode": "ones"},
            {"alpha": 1.0, "eta": 0.1, "backend": "gpu"},
            {"bound_policy": "guess"},
        ],
    )
    def test_rejects(self, kwargs):
        with pytest.raises(ValueError):
            SimConfig(**kwargs)

    def test_disagreement_tolerance(self):
        assert SimConfig(alpha=1, eta=1, tol_converge=1e-6).disagreement_tol == pytest.approx(1e-3)
        assert SimConfig(alpha=1, eta=1, tol_disagreement=0.5).disagreement_tol == 0.5

    def test_initial_state(self):
        cost = random_quadratic(3, 2, 0)
        a = initial_state(SimConfig(alpha=1, eta=1, x_seed=4), cost)
        b = initial_state(SimConfig(alpha=1, eta=1, x_seed=4), cost)
        np.testing.assert_array_equal(a.x, b.x)
        assert np.abs(a.x).max() <= 1.0
        np.testing.assert_array_equal(a.y, cost.grads(a.x))
        z = initial_state(SimConfig(alpha=1, eta=1, y_init_mode="zero"), cost)
        assert not z.y.any()


def ring_schedule(n=5, weight=0.45):
    return SwitchingSchedule.constant(WeightedDigraph.from_single(cycle_layer(n, weight) + cycle_layer(n, weight).T))


class TestRun:
    def test_quadratic_auto_bounds_reach_mean(self):
        centers = np.random.default_rng(2).normal(size=(5, 1))
        cost = QuadraticCost.homogeneous(centers)
        schedule = ring_schedule()
        cfg = SimConfig(bound_policy="auto", T=20_000, record_stride=100)
        res = run(cfg, schedule, cost, solve_quadratic_closed_form(cost).F_star)
        assert res.summary.verdict == "converged"
        np.testing.assert_allclose(res.final_state.x, np.full((5, 1), centers.mean()), rtol=0, atol=1e-6)
        gap = lambda2_abs_real(schedule.graphs[0].laplacian_w)
        assert res.summary.alpha_used == pytest.approx(0.9 * gap / cost.gamma)
        b = res.summary.bounds
        assert res.summary.eta_used == pytest.approx(0.9 * min(b.eta_max_gershgorin, b.eta_max_perturbation))

    def test_monotone_tail(self):
        cost = random_quadratic(5, 2, 11)
        cfg = SimConfig(bound_policy="auto", T=30_000, record_stride=1000)
        res = run(cfg, ring_schedule(), cost, solve_quadratic_closed_form(cost).F_star)
        tail = [r.residual for r in res.trace if r.k >= 2000]
        assert all(b <= a for a, b in zip(tail, tail[1:]))

    def test_switching_safety(self):
        graphs = [random_weight_balanced_digraph(5, 2, s) for s in range(3)]
        schedule = SwitchingSchedule(graphs, Signal("periodic", block=50))
        cost = random_quadratic(5, 1, 8)
        cfg = SimConfig(bound_policy="auto", T=60_000, record_stride=500)
        res = run(cfg, schedule, cost, solve_quadratic_closed_form(cost).F_star)
        assert res.summary.verdict == "converged"
        assert len(distinct_topologies(schedule, cfg.T)) == 3

    def test_divergence_verdict_keeps_finite_trace(self):
        cost = random_quadratic(5, 1, 0)
        cfg = SimConfig(alpha=50.0, eta=1.5, T=5000, record_stride=1)
        for backend in ("numpy", "compiled"):
            res = run(SimConfig(**{**cfg.__dict__, "backend": backend}), ring_schedule(), cost, 0.0, with_bounds=False)
            assert res.summary.verdict == "diverged"
            assert res.summary.steps_run < cfg.T
            assert all(np.isfinite(r.residual) for r in res.trace)

    @pytest.mark.filterwarnings("ignore:Hessian norm")
    def test_conservation_on_svm(self):
        cost = small_svm(5)
        opt = solve_centralized(cost)
        res = run(SimConfig(alpha=1.0, eta=0.01, T=20_000, record_stride=1000), ring_schedule(), cost, opt.F_star)
        s = res.summary
        assert s.conservation_drift <= 1e-8 * (1 + s.max_grad_magnitude)
        last = res.trace[-1]
        assert abs(last.y_sum_norm - last.grad_sum_norm) <= 1e-8 * (1 + s.max_grad_magnitude)

    @pytest.mark.filterwarnings("ignore:Hessian norm")
    def test_backends_agree(self):
        graphs = [random_weight_balanced_digraph(5, 2, s) for s in range(2)]
        schedule = SwitchingSchedule(graphs, Signal("periodic", block=7))
        for cost in (random_quadratic(5, 2, 1), small_svm(5)):
            cfg = dict(alpha=0.8, eta=0.02, T=3000, record_stride=250)
            a = run(SimConfig(**cfg, backend="numpy"), schedule, cost, 0.0, with_bounds=False)
            b = run(SimConfig(**cfg, backend="compiled"), schedule, cost, 0.0, with_bounds=False)
            assert [r.k for r in a.trace] == [r.k for r in b.trace]
            np.testing.assert_allclose(b.final_state.x, a.final_state.x, rtol=1e-12, atol=1e-12)
            np.testing.assert_allclose(b.final_state.y, a.final_state.y, rtol=1e-12, atol=1e-12)

    def test_trace_layout(self):
        cost = random_quadratic(5, 1, 0)
        res = run(SimConfig(alpha=0.1, eta=0.1, T=95, record_stride=10), ring_schedule(), cost, 0.0)
        assert [r.k for r in res.trace] == [0, 10, 20, 30, 40, 50, 60, 70, 80, 90, 95]

    def test_deterministic(self):
        cost = small_svm(5, seed=2)
        cfg = SimConfig(alpha=1.0, eta=0.01, T=2000, record_stride=100)
        a = run(cfg, ring_schedule(), cost, 0.0)
        b = run(cfg, ring_schedule(), cost, 0.0)
        assert [(r.residual, r.disagreement) for r in a.trace] == [(r.residual, r.disagreement) for r in b.trace]

    @pytest.mark.parametrize("backend", ["numpy", "compiled"])
    def test_stop_on_converge(self, backend):
        cost = random_quadratic(5, 1, 3)
        fstar = solve_quadratic_closed_form(cost).F_star
        cfg = SimConfig(alpha=0.2, eta=0.2, T=400_000, record_stride=100, stop_on_converge=True, backend=backend)
        res = run(cfg, ring_schedule(), cost, fstar)
        assert res.summary.verdict == "converged"
        assert res.summary.steps_run < cfg.T
        assert res.trace[-1].k == res.summary.steps_run

    def test_gamma_audit_warns(self):
        ds = generate_ring_dataset(30, 1.0, 2.0, 0.0, 0)
        cost = SvmCost.from_dataset(ds, partition_dataset(ds, 5, 0.8, 0), gamma=0.5)
        with pytest.warns(RuntimeWarning, match="re-estimated"):
            res = run(SimConfig(alpha=1.0, eta=0.01, T=200, record_stride=50), ring_schedule(), cost, 0.0)
        assert res.summary.gamma_reestimated == pytest.approx(1.05 * res.summary.gamma_audit_max)

    def test_no_audit_warning_for_quadratic(self):
        cost = random_quadratic(5, 1, 0)
        with warnings.catch_warnings():
            warnings.simplefilter("error")
            run(SimConfig(alpha=0.1, eta=0.1, T=100), ring_schedule(), cost, 0.0)

    def test_zero_init_reports_shifted_limit(self):
        cost = random_quadratic(5, 1, 6)
        cfg = SimConfig(alpha=0.2, eta=0.2, T=100_000, record_stride=1000, y_init_mode="zero")
        res = run(cfg, ring_schedule(), cost, solve_quadratic_closed_form(cost).F_star)
        # sum_i y_i = 0 at the limit, so sum_i grad f_i(xbar) keeps its initial value
        assert res.summary.shifted_stationarity_gap <= 1e-8
        g0 = cost.grads(initial_state(cfg, cost).x).sum(axis=0)
        if np.linalg.norm(g0) > 1e-3:
            assert res.summary.verdict == "timed-out"

    def test_schedule_bounds_use_given_values(self):
        cost = random_quadratic(5, 1, 0)
        per, alpha, eta = schedule_bounds([ring_schedule().graphs[0]], cost, alpha=0.05, eta=0.01)
        assert (alpha, eta) == (0.05, 0.01)
        assert len(per) == 1

    def test_node_count_mismatch(self):
        with pytest.raises(ValueError):
            run(SimConfig(alpha=1, eta=1), ring_schedule(4), random_quadratic(5, 1, 0), 0.0)


class TestReference:
    def test_fixed_point_is_stationary(self):
        cost = random_quadratic(4, 1, 2)
        schedule = SwitchingSchedule.constant(random_weight_balanced_digraph(4, 2, 2))
        x0 = np.full((4, 1), 1.5)
        traj = ct_reference(x0, np.zeros((4, 1)), schedule, cost, 0.5, 1e-4, 0.5, sample_every=1000)
        np.testing.assert_allclose(traj.x, np.broadcast_to(x0, traj.x.shape), rtol=0, atol=1e-14)
        np.testing.assert_allclose(traj.y, 0.0, atol=1e-14)

    def test_cycle_approaches_mean(self):
        centers = np.array([[1.0], [-2.0], [4.0]])
        cost = QuadraticCost.homogeneous(centers)
        graph = WeightedDigraph.from_single(cycle_layer(3, 0.5))
        schedule = SwitchingSchedule.constant(graph)
        alpha = 0.9 * lambda2_abs_real(graph.laplacian_w) / cost.gamma
        x0 = np.zeros((3, 1))
        traj = ct_reference(x0, cost.grads(x0), schedule, cost, alpha, 5e-4, 60.0, sample_every=2000)
        np.testing.assert_allclose(traj.x[-1], np.full((3, 1), 1.0), atol=1e-4)
        assert traj.times[-1] == pytest.approx(60.0)

    def test_rejects_large_dt(self):
        cost = random_quadratic(3, 1, 0)
        schedule = SwitchingSchedule.constant(WeightedDigraph.from_single(cycle_layer(3, 0.5)))
        with pytest.raises(ValueError):
            ct_reference(np.zeros((3, 1)), np.zeros((3, 1)), schedule, cost, 0.5, 0.1, 1.0)
