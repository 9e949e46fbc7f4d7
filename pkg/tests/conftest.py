import numpy as np
import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def cycle_layer(n, weight):
    w = np.zeros((n, n))
    for i in range(n):
        w[i, (i + 1) % n] = weight
    return w


def complete_layer(n, weight):
    return weight * (np.ones((n, n)) - np.eye(n))


def fd_grad(fun, x, h=1e-5):
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return out


def fd_jacobian(fun, x, h=1e-5):
    """Central-difference Jacobian of a vector function (rows are outputs)."""
    x = np.asarray(x, dtype=float)
    cols = []
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        cols.append((fun(x + e) - fun(x - e)) / (2 * h))
    return np.column_stack(cols)


def rel_err(approx, exact):
    approx, exact = np.asarray(approx, dtype=float), np.asarray(exact, dtype=float)
    return float(np.linalg.norm(approx - exact) / max(1.0, np.linalg.norm(exact)))


def margin_ring(rng_seed, n_points=50, inner=0.7, outer=1.4, edge=2.0):
    """Ring data with an empty band between the classes (radii ``inner`` to ``outer``)."""
    from gtdyn.costs import LabeledDataset

    rng = np.random.default_rng(rng_seed)
    half = n_points // 2
    r = np.concatenate([rng.uniform(0, inner, half), rng.uniform(outer, edge, n_points - half)])
    t = rng.uniform(0, 2 * np.pi, n_points)
    return LabeledDataset(np.c_[r * np.cos(t), r * np.sin(t)], np.r_[np.ones(half), -np.ones(n_points - half)])


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
