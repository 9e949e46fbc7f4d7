import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import margin_ring
from gtdyn.costs import QuadraticCost, SvmCost, generate_ring_dataset, partition_dataset
from gtdyn.errors import NonFiniteCostError, OracleTimeoutError
from gtdyn.oracle import OracleResult, solve_centralized, solve_quadratic_closed_form


def optimality_ok(cost, res):
    return np.linalg.norm(cost.total_grad(res.x_star)) <= 1e-10 * (1 + abs(res.F_star))


class TestClosedForm:
    def test_two_nodes(self):
        res = solve_quadratic_closed_form(QuadraticCost([[0.0], [2.0]], [1.0, 1.0]))
        assert res.x_star[0] == pytest.approx(1.0, abs=1e-15)
        assert res.F_star == pytest.approx(1.0, rel=1e-15)
        assert res.method == "closed-form"

    def test_identity_curvature_gives_mean(self):
        centers = np.array([[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]])
        res = solve_quadratic_closed_form(QuadraticCost(centers, [1.0, 1.0, 1.0]))
        np.testing.assert_allclose(res.x_star, centers.mean(axis=0), atol=1e-15)
        assert res.F_star == pytest.approx(0.5 * np.sum((centers - centers.mean(axis=0)) ** 2), rel=1e-14)

    def test_matches_direct_solve(self, rng):
        curv = []
        for _ in range(4):
            b = rng.normal(size=(3, 3))
            curv.append(b @ b.T + 0.2 * np.eye(3))
        centers = rng.normal(size=(4, 3))
        res = solve_quadratic_closed_form(QuadraticCost(centers, curv))
        direct = np.linalg.solve(sum(curv), sum(q @ c for q, c in zip(curv, centers)))
        np.testing.assert_allclose(res.x_star, direct, rtol=1e-12, atol=1e-12)

    def test_to_dict(self):
        d = solve_quadratic_closed_form(QuadraticCost([[0.0], [2.0]], [1.0, 1.0])).to_dict()
        assert set(d) == {"x_star", "F_star", "grad_norm_at_solution", "iterations", "method"}
        assert isinstance(d["x_star"], list)


class TestNewton:
    def test_homogeneous_quadratic(self):
        centers = np.random.default_rng(0).normal(size=(5, 2))
        res = solve_centralized(QuadraticCost.homogeneous(centers))
        np.testing.assert_allclose(res.x_star, centers.mean(axis=0), atol=1e-12)
        assert res.method == "newton"

    def test_svm_first_order_optimality(self):
        ds = generate_ring_dataset(50, 1.0, 2.0, 0.0, 3)
        cost = SvmCost.from_dataset(ds, partition_dataset(ds, 5, 0.8, 1), gamma=1.0)
        res = solve_centralized(cost)
        assert optimality_ok(cost, res)
        assert np.linalg.norm(cost.total_grad(res.x_star)) <= 1e-8
        assert res.grad_norm_at_solution <= 1e-10 * (1 + abs(res.F_star))

    @pytest.mark.parametrize("seed", range(5))
    def test_svm_separates_margin_ring(self, seed):
        ds = margin_ring(seed)
        cost = SvmCost.from_dataset(ds, partition_dataset(ds, 4, 0.8, seed), mu=3.0, c=1.5, gamma=1.0)
        res = solve_centralized(cost)
        assert cost.accuracy(res.x_star, ds.mapped, ds.labels) == 1.0

    @pytest.mark.parametrize("seed", range(6))
    def test_svm_on_touching_ring_is_mostly_right(self, seed):
        # disk and annulus share a boundary, so the soft-margin optimum may
        # give up a few points next to it
        ds = generate_ring_dataset(50, 1.0, 2.0, 0.0, seed)
        cost = SvmCost.from_dataset(ds, partition_dataset(ds, 5, 0.8, 0), gamma=1.0)
        res = solve_centralized(cost)
        assert cost.accuracy(res.x_star, ds.mapped, ds.labels) >= 0.9

    def test_start_point_only_changes_iterations(self):
        ds = generate_ring_dataset(40, 1.0, 2.0, 0.0, 1)
        cost = SvmCost.from_dataset(ds, partition_dataset(ds, 3, 0.8, 0), gamma=1.0)
        a = solve_centralized(cost)
        b = solve_centralized(cost, x0=[2.0, -1.0, 0.5, 3.0])
        np.testing.assert_allclose(a.x_star, b.x_star, atol=1e-8)

    def test_timeout(self):
        ds = generate_ring_dataset(40, 1.0, 2.0, 0.0, 1)
        cost = SvmCost.from_dataset(ds, partition_dataset(ds, 3, 0.8, 0), gamma=1.0)
        with pytest.raises(OracleTimeoutError):
            solve_centralized(cost, max_iter=1)

    def test_non_finite_start(self):
        cost = QuadraticCost.homogeneous(np.zeros((2, 1)))
        with pytest.raises(NonFiniteCostError):
            solve_centralized(cost, x0=[np.inf])


@given(seed=st.integers(0, 100_000), n=st.integers(1, 6), m=st.integers(1, 4))
def test_solvers_agree_on_quadratics(seed, n, m):
    rng = np.random.default_rng(seed)
    curv = []
    for _ in range(n):
        b = rng.normal(size=(m, m))
        curv.append(b @ b.T + 0.5 * np.eye(m))
    cost = QuadraticCost(rng.normal(size=(n, m)), curv)
    exact = solve_quadratic_closed_form(cost)
    newton = solve_centralized(cost)
    np.testing.assert_allclose(newton.x_star, exact.x_star, rtol=0, atol=1e-9)
    assert abs(newton.F_star - exact.F_star) <= 1e-12 * max(1.0, abs(exact.F_star))
    assert optimality_ok(cost, newton)
    assert isinstance(exact, OracleResult)
