"""Per-node cost models and the D-SVM dataset helpers.

Every cost exposes ``value``, ``grad`` and ``hessian`` for a single node plus
stacked versions over all nodes (rows of an ``n x m`` state matrix), and a
gradient-Lipschitz constant ``gamma``.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import block_diag
from scipy.special import expit

from .io import atomic_write_text

__all__ = [
    "CostModel",
    "QuadraticCost",
    "SvmCost",
    "LabeledDataset",
    "quadratic_eval",
    "svm_eval",
    "estimate_gamma",
    "quadratic_feature_map",
    "generate_ring_dataset",
    "partition_dataset",
    "read_dataset_csv",
    "write_dataset_csv",
    "cost_from_spec",
]


class CostModel:
    """Interface for separable costs ``F(x) = sum_i f_i(x_i)``.

    Subclasses implement the stacked methods ``values``, ``grads`` and
    ``hessians``; per-node accessors and aggregate helpers derive from them.
    """

    n: int
    m: int

    @property
    def gamma(self) -> float:
        raise NotImplementedError

    def values(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def grads(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def hessians(self, xs: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _single(self, i, x):
        xs = np.zeros((self.n, self.m))
        xs[i] = x
        return xs

    def value(self, i: int, x) -> float:
        return float(self.values(self._single(i, x))[i])

    def grad(self, i: int, x) -> np.ndarray:
        return self.grads(self._single(i, x))[i]

    def hessian(self, i: int, x) -> np.ndarray:
        return self.hessians(self._single(i, x))[i]

    def evaluate(self, i: int, x):
        """``(value, gradient, hessian)`` of node ``i`` at ``x``."""
        xs = self._single(i, x)
        return float(self.values(xs)[i]), self.grads(xs)[i], self.hessians(xs)[i]

    def hessian_stack(self, xs) -> np.ndarray:
        """Block-diagonal ``nm x nm`` matrix of the node Hessians."""
        return block_diag(*self.hessians(np.asarray(xs, dtype=float)))

    def _tile(self, x):
        return np.tile(np.asarray(x, dtype=float).reshape(1, self.m), (self.n, 1))

    def total(self, x) -> float:
        """``sum_i f_i(x)`` at a shared point."""
        return float(self.values(self._tile(x)).sum())

    def total_grad(self, x) -> np.ndarray:
        return self.grads(self._tile(x)).sum(axis=0)

    def total_hessian(self, x) -> np.ndarray:
        return self.hessians(self._tile(x)).sum(axis=0)


class QuadraticCost(CostModel):
    """``f_i(x) = 0.5 (x - c_i)^T Q_i (x - c_i)`` with symmetric positive-definite ``Q_i``."""

    def __init__(self, centers, curvatures):
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        if centers.ndim != 2:
            raise ValueError("centers must be an n x m array")
        n, m = centers.shape
        curv = np.asarray(curvatures, dtype=float)
        if curv.ndim == 1:
            curv = curv[:, None, None] * np.eye(m)
        if curv.shape != (n, m, m):
            raise ValueError(f"curvatures must have shape {(n, m, m)}, got {curv.shape}")
        if not np.allclose(curv, np.swapaxes(curv, 1, 2), atol=1e-12):
            raise ValueError("curvatures must be symmetric")
        if np.linalg.eigvalsh(curv).min() <= 0:
            raise ValueError("curvatures must be positive definite")
        self.centers = centers
        self.curvatures = curv
        self.n, self.m = n, m
        self._gamma = float(max(np.linalg.norm(q, 2) for q in curv))

    @classmethod
    def homogeneous(cls, centers, gamma: float = 1.0) -> "QuadraticCost":
        centers = np.atleast_2d(np.asarray(centers, dtype=float))
        return cls(centers, np.full(centers.shape[0], float(gamma)))

    @property
    def gamma(self) -> float:
        return self._gamma

    def values(self, xs):
        d = np.asarray(xs, dtype=float) - self.centers
        return 0.5 * np.einsum("ni,nij,nj->n", d, self.curvatures, d)

    def grads(self, xs):
        d = np.asarray(xs, dtype=float) - self.centers
        return np.einsum("nij,nj->ni", self.curvatures, d)

    def hessians(self, xs):
        return self.curvatures.copy()

    def to_spec(self) -> dict:
        return {
            "kind": "quadratic",
            "centers": self.centers.tolist(),
            "curvatures": self.curvatures.tolist(),
        }


def quadratic_eval(cost: QuadraticCost, i: int, x):
    return cost.evaluate(i, x)


def quadratic_feature_map(points) -> np.ndarray:
    """``[x1**2, x2**2, sqrt(2) x1 x2]``; turns circles into planes."""
    p = np.asarray(points, dtype=float)
    return np.column_stack([p[:, 0] ** 2, p[:, 1] ** 2, np.sqrt(2.0) * p[:, 0] * p[:, 1]])


@dataclass(frozen=True)
class LabeledDataset:
    points: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        lab = np.asarray(self.labels, dtype=float)
        if pts.ndim != 2 or pts.shape[1] != 2 or lab.shape != (pts.shape[0],):
            raise ValueError("points must be N x 2 and labels length N")
        if not np.all(np.isin(lab, (-1.0, 1.0))):
            raise ValueError("labels must be -1 or +1")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "labels", lab)

    def __len__(self):
        return self.points.shape[0]

    @property
    def mapped(self) -> np.ndarray:
        return quadratic_feature_map(self.points)


class SvmCost(CostModel):
    """Smoothed hinge-loss SVM cost on the quadratic feature map.

    With ``x_i = [w; nu]`` and per-point ``z_j = 1 - l_j (w . phi_j - nu)``::

        f_i(x_i) = w.w + C * sum_j (1/mu) log(1 + exp(mu z_j))

    The softplus is evaluated as ``max(z, 0) + log1p(exp(-mu |z|)) / mu`` so it
    stays finite for large ``mu z``. ``ridge_nu`` adds ``ridge_nu * nu**2 / 2``
    to keep the offset direction strictly convex on degenerate subsets.
    """

    def __init__(self, features, labels, mu: float = 3.0, c: float = 1.5, ridge_nu: float = 0.0, gamma=None):
        if mu <= 0:
            raise ValueError("mu must be positive")
        if c < 0:
            raise ValueError("C must be non-negative")
        feats = [np.asarray(f, dtype=float).reshape(-1, 3) for f in features]
        labs = [np.asarray(lab, dtype=float).ravel() for lab in labels]
        if len(feats) != len(labs):
            raise ValueError("one label vector per node required")
        self.n, self.m = len(feats), 4
        self.mu, self.c, self.ridge_nu = float(mu), float(c), float(ridge_nu)
        self.features, self.labels = feats, labs
        width = max(1, max(len(f) for f in feats))
        # padded per-node arrays; mask zeroes the padding
        self._g = np.zeros((self.n, width, 4))
        self._mask = np.zeros((self.n, width))
        for i, (f, lab) in enumerate(zip(feats, labs)):
            k = len(f)
            self._g[i, :k, :3] = -lab[:, None] * f
            self._g[i, :k, 3] = lab
            self._mask[i, :k] = 1.0
        self._gamma = None if gamma is None else float(gamma)

    @classmethod
    def from_dataset(cls, ds: LabeledDataset, subsets, **kwargs) -> "SvmCost":
        mapped = ds.mapped
        return cls([mapped[s] for s in subsets], [ds.labels[s] for s in subsets], **kwargs)

    @property
    def gamma(self) -> float:
        if self._gamma is None:
            self._gamma = estimate_gamma(self)
        return self._gamma

    def _z(self, xs):
        return 1.0 + np.einsum("njk,nk->nj", self._g, np.asarray(xs, dtype=float))

    def values(self, xs):
        xs = np.asarray(xs, dtype=float)
        z = self._z(xs)
        mz = self.mu * z
        soft = np.maximum(z, 0.0) + np.log1p(np.exp(-np.abs(mz))) / self.mu
        reg = np.sum(xs[:, :3] ** 2, axis=1) + 0.5 * self.ridge_nu * xs[:, 3] ** 2
        return reg + self.c * np.sum(self._mask * soft, axis=1)

    def grads(self, xs):
        xs = np.asarray(xs, dtype=float)
        s = expit(self.mu * self._z(xs)) * self._mask
        out = self.c * np.einsum("nj,njk->nk", s, self._g)
        out[:, :3] += 2.0 * xs[:, :3]
        out[:, 3] += self.ridge_nu * xs[:, 3]
        return out

    def hessians(self, xs):
        s = expit(self.mu * self._z(xs))
        weight = self.c * self.mu * s * (1.0 - s) * self._mask
        out = np.einsum("nj,njk,njl->nkl", weight, self._g, self._g)
        out += np.diag([2.0, 2.0, 2.0, self.ridge_nu])
        return out

    def accuracy(self, x, features=None, labels=None) -> float:
        """Fraction of points with ``sign(w . phi - nu) == label`` (pooled node data by default)."""
        if features is None:
            features = np.vstack(self.features)
            labels = np.concatenate(self.labels)
        x = np.asarray(x, dtype=float)
        score = np.asarray(features) @ x[:3] - x[3]
        return float(np.mean(np.sign(score) == np.asarray(labels)))


def svm_eval(cost: SvmCost, i: int, x):
    return cost.evaluate(i, x)


def estimate_gamma(cost: CostModel, sample_box=(-5.0, 5.0), n_samples: int = 200, rng_seed: int = 0) -> float:
    """``1.05 * max ||hessian_i(x)||_2`` over uniform samples from a box and all nodes."""
    rng = np.random.default_rng(rng_seed)
    lo, hi = sample_box
    best = 0.0
    for _ in range(n_samples):
        xs = rng.uniform(lo, hi, size=(cost.n, cost.m))
        h = cost.hessians(xs)
        best = max(best, float(np.linalg.norm(h, 2, axis=(1, 2)).max()))
    return 1.05 * best


def generate_ring_dataset(
    n_points: int = 50,
    inner_radius: float = 1.0,
    outer_radius: float = 2.0,
    noise: float = 0.0,
    rng_seed: int = 0,
) -> LabeledDataset:
    """Concentric-ring binary classification data.

    The first half of the points is uniform in the disk of ``inner_radius``
    (label +1); the rest is uniform in the annulus out to ``outer_radius``
    (label -1). Gaussian noise of scale ``noise`` perturbs each radius.
    """
    if not 0 < inner_radius < outer_radius:
        raise ValueError("need 0 < inner_radius < outer_radius")
    rng = np.random.default_rng(rng_seed)
    n_in = n_points // 2
    n_out = n_points - n_in
    r_in = inner_radius * np.sqrt(rng.uniform(size=n_in))
    r_out = np.sqrt(rng.uniform(inner_radius**2, outer_radius**2, size=n_out))
    radii = np.concatenate([r_in, r_out])
    if noise > 0:
        radii = np.abs(radii + noise * rng.normal(size=n_points))
    theta = rng.uniform(0.0, 2.0 * np.pi, size=n_points)
    points = np.column_stack([radii * np.cos(theta), radii * np.sin(theta)])
    labels = np.concatenate([np.ones(n_in), -np.ones(n_out)])
    return LabeledDataset(points, labels)


def partition_dataset(ds: LabeledDataset, n_nodes: int, fraction: float = 0.8, rng_seed: int = 0) -> list[np.ndarray]:
    """Independent uniform subsets of size ``round(fraction * N)``, one per node (overlap allowed)."""
    if not 0 < fraction <= 1:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    rng = np.random.default_rng(rng_seed)
    size = int(round(fraction * len(ds)))
    return [np.sort(rng.choice(len(ds), size=size, replace=False)) for _ in range(n_nodes)]


def write_dataset_csv(ds: LabeledDataset, path) -> None:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["x1", "x2", "label"])
    for (x1, x2), lab in zip(ds.points, ds.labels):
        writer.writerow([repr(float(x1)), repr(float(x2)), int(lab)])
    atomic_write_text(path, buf.getvalue())


def read_dataset_csv(path) -> LabeledDataset:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    points = [[float(r["x1"]), float(r["x2"])] for r in rows]
    labels = [float(r["label"]) for r in rows]
    return LabeledDataset(np.array(points).reshape(-1, 2), np.array(labels))


def _dataset_from_spec(spec, base_dir: Path) -> LabeledDataset:
    if "file" in spec:
        path = Path(spec["file"])
        return read_dataset_csv(path if path.is_absolute() else base_dir / path)
    if "points" in spec:
        return LabeledDataset(np.array(spec["points"], dtype=float), np.array(spec["labels"], dtype=float))
    gen = spec.get("generate", spec)
    return generate_ring_dataset(
        n_points=int(gen.get("n_points", 50)),
        inner_radius=float(gen.get("inner_radius", 1.0)),
        outer_radius=float(gen.get("outer_radius", 2.0)),
        noise=float(gen.get("noise", 0.0)),
        rng_seed=int(gen.get("seed", 0)),
    )


def cost_from_spec(spec: dict, n: int, base_dir=None) -> CostModel:
    """Build a cost model from its config dict for an ``n``-node network."""
    base = Path(base_dir) if base_dir is not None else Path.cwd()
    kind = spec.get("kind")
    if kind == "quadratic":
        centers = np.array(spec["centers"], dtype=float)
        if centers.ndim == 1:
            centers = centers[:, None]
        curv = spec.get("curvatures", [1.0] * centers.shape[0])
        cost = QuadraticCost(centers, curv)
    elif kind == "svm":
        ds = _dataset_from_spec(spec.get("dataset", {}), base)
        subsets = partition_dataset(ds, n, float(spec.get("fraction", 0.8)), int(spec.get("seed", 0)))
        cost = SvmCost.from_dataset(
            ds,
            subsets,
            mu=float(spec.get("mu", 3.0)),
            c=float(spec.get("c", 1.5)),
            ridge_nu=float(spec.get("ridge_nu", 0.0)),
            gamma=spec.get("gamma"),
        )
    else:
        raise ValueError(f"unknown cost kind {kind!r}")
    if cost.n != n:
        raise ValueError(f"cost has {cost.n} nodes but the network has {n}")
    return cost
