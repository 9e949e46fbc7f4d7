"""Centralized reference solutions for ``min_x sum_i f_i(x)``."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .costs import CostModel, QuadraticCost
from .errors import NonFiniteCostError, OracleTimeoutError

__all__ = ["OracleResult", "solve_centralized", "solve_quadratic_closed_form"]

ARMIJO = 1e-4
COND_LIMIT = 1e12
MAX_ITER = 100_000


@dataclass(frozen=True)
class OracleResult:
    x_star: np.ndarray
    F_star: float
    grad_norm_at_solution: float
    iterations: int
    method: str

    def to_dict(self) -> dict:
        d = asdict(self)
        d["x_star"] = [float(v) for v in self.x_star]
        return d


def _stop_tol(fx):
    return 1e-10 * (1.0 + abs(fx))


def solve_centralized(cost: CostModel, x0=None, max_iter: int = MAX_ITER) -> OracleResult:
    """Minimise the aggregate cost with damped Newton steps.

    Each iteration backtracks (halving) until the Armijo condition with constant
    ``1e-4`` holds. When the aggregate Hessian has condition number above
    ``1e12`` the step falls back to the negative gradient. Stops once
    ``||grad F|| <= 1e-10 (1 + |F|)``.

    Raises
    ------
    OracleTimeoutError
        After ``max_iter`` iterations without meeting the tolerance.
    NonFiniteCostError
        If the objective evaluates to a non-finite number.
    """
    x = np.zeros(cost.m) if x0 is None else np.asarray(x0, dtype=float).copy()
    fx = cost.total(x)
    used_gd = False
    for it in range(max_iter + 1):
        if not np.isfinite(fx):
            raise NonFiniteCostError(f"objective is {fx} at iteration {it}")
        g = cost.total_grad(x)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= _stop_tol(fx):
            return OracleResult(x, fx, gnorm, it, "gradient-descent" if used_gd else "newton")
        if it == max_iter:
            break
        h = cost.total_hessian(x)
        direction = None
        if np.linalg.cond(h) <= COND_LIMIT:
            direction = -np.linalg.solve(h, g)
            if direction @ g >= 0:
                direction = None
        if direction is None:
            used_gd = True
            direction = -g
        slope = float(direction @ g)
        slack = 8 * np.finfo(float).eps * (1.0 + abs(fx))
        step = 1.0
        while True:
            x_new = x + step * direction
            f_new = cost.total(x_new)
            if np.isfinite(f_new) and f_new <= fx + ARMIJO * step * slope + slack:
                break
            step *= 0.5
            if step < 1e-20:
                raise OracleTimeoutError(f"line search stalled at |grad| = {gnorm:.3e}")
        x, fx = x_new, f_new
    raise OracleTimeoutError(f"no convergence after {max_iter} iterations (|grad| = {gnorm:.3e})")


def solve_quadratic_closed_form(cost: QuadraticCost) -> OracleResult:
    """Solve ``(sum Q_i) x = sum Q_i c_i`` directly."""
    q_sum = cost.curvatures.sum(axis=0)
    rhs = np.einsum("nij,nj->i", cost.curvatures, cost.centers)
    try:
        x = np.linalg.solve(q_sum, rhs)
    except np.linalg.LinAlgError as exc:
        raise ValueError("aggregate curvature is singular") from exc
    fx = cost.total(x)
    gnorm = float(np.linalg.norm(cost.total_grad(x)))
    return OracleResult(x, fx, gnorm, 0, "closed-form")
