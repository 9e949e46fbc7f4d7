"""Spectra of Laplacians and stacked system matrices, and step-size bounds.

The continuous-time gradient-tracking system is ``d/dt [x; y] = M(alpha) [x; y]``
with::

    M(alpha) = [[ Lw (x) I_m,        -alpha I       ],
                [ H (Lw (x) I_m),     La (x) I_m - alpha H ]]

which splits as ``M0 + alpha * M1``. The forward-Euler map is
``I + eta * M(alpha)``. The bounds below give admissible ranges for the
tracking gain ``alpha``, the sampling step ``eta`` and their product, each
computed from eigenvalues or operator norms of these matrices.

All functions are pure.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields

import numpy as np

from .errors import DegenerateSpectrumError, NotStronglyConnectedError, NumericFailureError

__all__ = [
    "Spectrum",
    "SystemMatrix",
    "SpectrumReport",
    "StepSizeBounds",
    "eigenvalues",
    "operator_norm",
    "default_tol_zero",
    "gershgorin_radius",
    "lambda2_abs_real",
    "alpha_bound_spectral_gap",
    "alpha_bound_matching",
    "alpha_eta_bound_spectral",
    "alpha_eta_bound_matching",
    "eta_bound_gershgorin",
    "eta_bound_perturbation",
    "split_system_matrix",
    "build_system_matrix",
    "euler_matrix",
    "check_continuous_spectrum",
    "check_discrete_spectrum",
    "check_euler_consensus_matrix",
    "compute_bounds",
    "min_bounds",
]

BACKWARD_ERROR_FACTOR = 1e-8
TOL_CONJ = 1e-9


@dataclass(frozen=True)
class Spectrum:
    """Eigenvalues sorted by real part, then imaginary part.

    ``residual_bound`` is the largest ``||M v - lambda v||`` over the returned
    eigenpairs with unit ``v``.
    """

    values: np.ndarray
    residual_bound: float

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    @property
    def moduli(self) -> np.ndarray:
        return np.abs(self.values)

    def has_conjugate_pairs(self, tol: float = TOL_CONJ) -> bool:
        vals = self.values
        scale = 1.0 + (np.abs(vals).max() if len(vals) else 0.0)
        for lam in vals:
            if np.min(np.abs(vals - np.conj(lam))) > tol * scale:
                return False
        return True


def operator_norm(matrix) -> float:
    """Largest singular value."""
    return float(np.linalg.norm(np.asarray(matrix, dtype=float), 2))


def default_tol_zero(matrix) -> float:
    """Threshold for calling an eigenvalue structurally zero (or one, after shifting)."""
    return 1e-7 * (1.0 + operator_norm(matrix))


def eigenvalues(matrix) -> Spectrum:
    """Eigenvalues of a dense real square matrix with a backward-error check.

    Raises
    ------
    NumericFailureError
        If LAPACK does not converge, the input is not finite, or some
        eigenpair residual exceeds ``1e-8 * (1 + ||M||)``. The offending
        matrix is attached to the exception.
    """
    a = np.asarray(matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"matrix must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NumericFailureError("matrix has non-finite entries", matrix=a)
    try:
        vals, vecs = np.linalg.eig(a)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(f"eigenvalue iteration failed: {exc}", matrix=a) from exc
    if a.shape[0] == 0:
        return Spectrum(np.zeros(0, dtype=complex), 0.0)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    resid = np.linalg.norm(a @ vecs - vecs * vals, axis=0)
    bound = float(resid.max())
    if bound > BACKWARD_ERROR_FACTOR * (1.0 + operator_norm(a)):
        raise NumericFailureError(f"eigenpair residual {bound:.3e} too large", matrix=a)
    vals = vals.astype(complex)
    order = np.lexsort((vals.imag, vals.real))
    return Spectrum(vals[order], bound)


def _values(spectrum) -> np.ndarray:
    if isinstance(spectrum, Spectrum):
        return spectrum.values
    return np.asarray(spectrum, dtype=complex)


def gershgorin_radius(lap) -> float:
    """Largest absolute diagonal entry of a Laplacian.

    Every eigenvalue lies in the disk of this radius centred at ``-radius``.
    """
    lap = np.asarray(lap, dtype=float)
    if lap.size == 0:
        return 0.0
    return float(np.abs(np.diag(lap)).max())


def lambda2_abs_real(lap, tol_zero: float | None = None) -> float:
    """Smallest ``|Re lambda|`` over the non-zero eigenvalues of a Laplacian.

    Raises
    ------
    DegenerateSpectrumError
        If every eigenvalue is within ``tol_zero`` of zero.
    NotStronglyConnectedError
        If more than one eigenvalue is within ``tol_zero`` of zero.
    """
    if tol_zero is None:
        tol_zero = default_tol_zero(lap)
    vals = eigenvalues(lap).values
    near_zero = np.abs(vals) <= tol_zero
    if near_zero.all():
        raise DegenerateSpectrumError("all Laplacian eigenvalues are zero")
    if near_zero.sum() > 1:
        raise NotStronglyConnectedError(
            f"{int(near_zero.sum())} zero eigenvalues; the layer is not strongly connected"
        )
    rest = vals[~near_zero]
    return float(np.abs(rest.real).min())


def alpha_bound_spectral_gap(lap_w, lap_a, gamma: float) -> float:
    """Tracking-gain bound ``min(|Re l2(Lw)|, |Re l2(La)|) / gamma``."""
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    return min(lambda2_abs_real(lap_w), lambda2_abs_real(lap_a)) / gamma


def alpha_bound_matching(m0_spectrum, n: int, m: int, gamma: float) -> float:
    """Tracking-gain bound from the optimal matching distance of ``M0``'s spectrum.

    Returns ``lo**nm / (4**nm * (2*hi + lo)**(nm - 1) * max(1, gamma))`` where
    ``lo`` is the smallest non-zero and ``hi`` the largest eigenvalue modulus.
    Evaluated in log space; for large ``nm`` the result underflows towards 0.
    """
    mods = np.abs(_values(m0_spectrum))
    tol = 1e-7 * (1.0 + (mods.max() if mods.size else 0.0))
    nonzero = mods[mods > tol]
    if nonzero.size == 0:
        raise DegenerateSpectrumError("spectrum has no non-zero eigenvalue")
    lo, hi = float(nonzero.min()), float(mods.max())
    if lo <= 0:
        raise DegenerateSpectrumError("smallest non-zero eigenvalue modulus is not positive")
    nm = n * m
    log_b = (
        nm * math.log(lo)
        - nm * math.log(4.0)
        - (nm - 1) * math.log(2.0 * hi + lo)
        - math.log(max(1.0, gamma))
    )
    return math.exp(log_b)


def _lambda_max_inside(vals, tol_one: float, by: str = "modulus") -> float:
    vals = np.asarray(vals, dtype=complex)
    rest = vals[np.abs(vals - 1.0) > tol_one]
    if rest.size == 0:
        raise DegenerateSpectrumError("no eigenvalue strictly inside the unit circle")
    if by == "modulus":
        return float(np.abs(rest).max())
    if by == "real":
        return float(rest.real.max())
    raise ValueError(f"unknown convention {by!r}")


def alpha_eta_bound_spectral(lap_w, lap_a, eta: float, gamma: float, convention: str = "modulus") -> float:
    """Bound on ``alpha * eta``: ``min(1 - lmax(I + eta La), 1 - lmax(I + eta Lw)) / gamma``.

    ``lmax`` is the largest eigenvalue strictly inside the unit circle, measured
    by modulus (default) or by real part (``convention="real"``).
    """
    if gamma <= 0:
        raise ValueError("gamma must be positive")
    margins = []
    for lap in (lap_w, lap_a):
        lap = np.asarray(lap, dtype=float)
        p = np.eye(lap.shape[0]) + eta * lap
        tol = default_tol_zero(p) * 1e-1 if eta > 0 else 1e-8
        margins.append(1.0 - _lambda_max_inside(eigenvalues(p).values, tol, convention))
    return min(margins) / gamma


def alpha_eta_bound_matching(md0_spectrum, n: int, m: int, gamma: float, tol_one: float = 1e-8) -> float:
    """Bound on ``alpha * eta`` from the spectrum of ``I + eta M0``.

    ``(1 - lmax)**nm / (4**nm * (3 - lmax)**(nm - 1) * max(1, gamma))`` with
    ``lmax`` the largest modulus among eigenvalues not within ``tol_one`` of 1.
    """
    lmax = _lambda_max_inside(_values(md0_spectrum), tol_one)
    if lmax >= 1.0:
        raise DegenerateSpectrumError(f"largest inner eigenvalue modulus {lmax} is not < 1")
    nm = n * m
    log_b = (
        nm * math.log(1.0 - lmax)
        - nm * math.log(4.0)
        - (nm - 1) * math.log(3.0 - lmax)
        - math.log(max(1.0, gamma))
    )
    return math.exp(log_b)


def eta_bound_gershgorin(lap_w, lap_a) -> float:
    """Sampling-step bound ``1 / max(r_w, r_a)`` from the Gershgorin radii.

    Below it, ``I + eta L`` is non-negative and row-stochastic for both layers.
    """
    r = max(gershgorin_radius(lap_w), gershgorin_radius(lap_a))
    if r == 0:
        raise DegenerateSpectrumError("both Laplacians are zero")
    return 1.0 / r


def eta_bound_perturbation(m0, m_alpha, m1, alpha: float, n: int, m: int, w_max: float, a_max: float) -> float:
    """Sampling-step bound accounting for the ``alpha * M1`` perturbation.

    ``1 / (max(w_max, a_max) + 2 (||M0|| + ||M(alpha)||)**(1 - 1/(2nm)) * ||alpha M1||**(1/(2nm)))``
    with operator norms. Reduces to the Gershgorin bound at ``alpha = 0``.
    """
    p = 1.0 / (2 * n * m)
    pert = operator_norm(alpha * np.asarray(m1, dtype=float))
    base = operator_norm(m0) + operator_norm(m_alpha)
    extra = 2.0 * base ** (1.0 - p) * pert**p if pert > 0 else 0.0
    return 1.0 / (max(w_max, a_max) + extra)


@dataclass(frozen=True)
class SystemMatrix:
    """``M(alpha)`` (``eta is None``) or its Euler map ``I + eta M(alpha)``."""

    entries: np.ndarray
    alpha: float
    m: int
    eta: float | None = None

    @property
    def n(self) -> int:
        return self.entries.shape[0] // (2 * self.m)


def _check_dims(lap_w, lap_a, hess, m):
    lap_w = np.asarray(lap_w, dtype=float)
    lap_a = np.asarray(lap_a, dtype=float)
    hess = np.asarray(hess, dtype=float)
    n = lap_w.shape[0]
    if lap_w.shape != (n, n) or lap_a.shape != (n, n):
        raise ValueError(f"Laplacian shapes {lap_w.shape}, {lap_a.shape} disagree")
    if hess.shape != (n * m, n * m):
        raise ValueError(f"Hessian stack must be {n * m}x{n * m}, got {hess.shape}")
    return lap_w, lap_a, hess, n


def split_system_matrix(lap_w, lap_a, hess, m: int = 1) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(M0, M1)`` with ``M(alpha) = M0 + alpha * M1``."""
    lap_w, lap_a, hess, n = _check_dims(lap_w, lap_a, hess, m)
    eye_m = np.eye(m)
    lw = np.kron(lap_w, eye_m)
    la = np.kron(lap_a, eye_m)
    nm = n * m
    m0 = np.zeros((2 * nm, 2 * nm))
    m0[:nm, :nm] = lw
    m0[nm:, :nm] = hess @ lw
    m0[nm:, nm:] = la
    m1 = np.zeros_like(m0)
    m1[:nm, nm:] = -np.eye(nm)
    m1[nm:, nm:] = -hess
    return m0, m1


def build_system_matrix(lap_w, lap_a, hess, alpha: float, m: int = 1) -> SystemMatrix:
    """Assemble ``M(alpha)`` from the Laplacians and block-diagonal Hessian stack."""
    m0, m1 = split_system_matrix(lap_w, lap_a, hess, m)
    return SystemMatrix(m0 + alpha * m1, float(alpha), m)


def euler_matrix(system: SystemMatrix, eta: float) -> SystemMatrix:
    """Forward-Euler map ``I + eta * M(alpha)``."""
    if system.eta is not None:
        raise ValueError("matrix is already discrete")
    entries = np.eye(system.entries.shape[0]) + eta * system.entries
    return SystemMatrix(entries, system.alpha, system.m, float(eta))


@dataclass(frozen=True)
class SpectrumReport:
    """Outcome of a structural spectrum check.

    ``n_structural`` counts eigenvalues at the structural point (0 for the
    continuous matrix, 1 for the Euler map). ``worst_rest`` is the largest real
    part (continuous) or modulus (discrete) among the remaining eigenvalues.
    """

    n_structural: int
    expected: int
    worst_rest: float
    passed: bool


def _matrix(system):
    return system.entries if isinstance(system, SystemMatrix) else np.asarray(system, dtype=float)


def check_continuous_spectrum(system, m: int, tol_zero: float | None = None) -> SpectrumReport:
    """Check for exactly ``m`` zero eigenvalues and strictly negative real parts elsewhere."""
    mat = _matrix(system)
    if tol_zero is None:
        tol_zero = default_tol_zero(mat)
    vals = eigenvalues(mat).values
    zero = np.abs(vals) <= tol_zero
    rest = vals[~zero]
    worst = float(rest.real.max()) if rest.size else -math.inf
    passed = int(zero.sum()) == m and worst < 0
    return SpectrumReport(int(zero.sum()), m, worst, bool(passed))


def check_discrete_spectrum(system, m: int, tol_one: float = 1e-7, margin: float = 0.0) -> SpectrumReport:
    """Check for exactly ``m`` eigenvalues within ``tol_one`` of 1, the rest of modulus ``< 1 - margin``."""
    mat = _matrix(system)
    vals = eigenvalues(mat).values
    one = np.abs(vals - 1.0) <= tol_one
    rest = vals[~one]
    worst = float(np.abs(rest).max()) if rest.size else 0.0
    passed = int(one.sum()) == m and worst < 1.0 - margin
    return SpectrumReport(int(one.sum()), m, worst, bool(passed))


def check_euler_consensus_matrix(lap, eta: float, tol_one: float | None = None) -> dict:
    """Properties of ``P = I + eta L`` expected for ``0 < eta < 1 / r``.

    Returns a dict with ``nonnegative``, ``row_stochastic``, ``n_unit``
    (eigenvalues of modulus ``>= 1 - tol_one``), ``unit_is_one`` and ``passed``.
    """
    lap = np.asarray(lap, dtype=float)
    p = np.eye(lap.shape[0]) + eta * lap
    if tol_one is None:
        tol_one = default_tol_zero(p)
    vals = eigenvalues(p).values
    outer = vals[np.abs(vals) >= 1.0 - tol_one]
    report = {
        "nonnegative": bool(np.all(p >= 0)),
        "row_stochastic": bool(np.all(np.abs(p.sum(axis=1) - 1.0) <= 1e-12)),
        "n_unit": int(outer.size),
        "unit_is_one": bool(outer.size == 1 and abs(outer[0] - 1.0) <= tol_one),
    }
    report["passed"] = all((report["nonnegative"], report["row_stochastic"], report["unit_is_one"]))
    return report


@dataclass(frozen=True)
class StepSizeBounds:
    """Admissible step-size ranges for one topology snapshot.

    ``alpha_max_gap``
        ``min |Re l2| / gamma`` over both Laplacians.
    ``alpha_max_matching``
        matching-distance bound on ``alpha`` from the spectrum of ``M0``.
    ``alpha_eta_max_spectral`` / ``alpha_eta_max_spectral_real``
        bound on ``alpha * eta`` from ``I + eta L`` using the modulus or the
        real part of the largest inner eigenvalue.
    ``alpha_eta_max_matching``
        matching-distance bound on ``alpha * eta`` from ``I + eta M0``.
    ``eta_max_gershgorin`` / ``eta_max_perturbation``
        sampling-step bounds without / with the ``alpha M1`` perturbation.

    ``alpha_ref`` and ``eta_ref`` record the values at which the
    alpha-dependent and eta-dependent bounds were evaluated.
    """

    alpha_max_gap: float
    alpha_max_matching: float
    alpha_eta_max_spectral: float
    alpha_eta_max_spectral_real: float
    alpha_eta_max_matching: float
    eta_max_gershgorin: float
    eta_max_perturbation: float
    gamma_used: float
    lambda2_w: float
    lambda2_a: float
    alpha_ref: float
    eta_ref: float

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "StepSizeBounds":
        return cls(**{f.name: float(data[f.name]) for f in fields(cls)})

    @property
    def auto_alpha(self) -> float:
        return 0.9 * self.alpha_max_gap

    @property
    def auto_eta(self) -> float:
        return 0.9 * min(self.eta_max_gershgorin, self.eta_max_perturbation)


def compute_bounds(
    lap_w,
    lap_a,
    hess,
    gamma: float,
    m: int = 1,
    alpha: float | None = None,
    eta: float | None = None,
) -> StepSizeBounds:
    """Evaluate every step-size bound for one snapshot.

    ``alpha`` defaults to 0.9 of the spectral-gap bound and ``eta`` to 0.9 of
    the smaller sampling-step bound; the product bounds are evaluated at that
    ``eta``.
    """
    lap_w = np.asarray(lap_w, dtype=float)
    lap_a = np.asarray(lap_a, dtype=float)
    n = lap_w.shape[0]
    l2w = lambda2_abs_real(lap_w)
    l2a = lambda2_abs_real(lap_a)
    a_gap = min(l2w, l2a) / gamma
    m0, m1 = split_system_matrix(lap_w, lap_a, hess, m)
    a_match = alpha_bound_matching(eigenvalues(m0), n, m, gamma)
    e_gersh = eta_bound_gershgorin(lap_w, lap_a)
    a_ref = 0.9 * a_gap if alpha is None else float(alpha)
    e_pert = eta_bound_perturbation(
        m0, m0 + a_ref * m1, m1, a_ref, n, m, gershgorin_radius(lap_w), gershgorin_radius(lap_a)
    )
    e_ref = 0.9 * min(e_gersh, e_pert) if eta is None else float(eta)
    ae_spec = alpha_eta_bound_spectral(lap_w, lap_a, e_ref, gamma)
    ae_real = alpha_eta_bound_spectral(lap_w, lap_a, e_ref, gamma, convention="real")
    md0 = np.eye(m0.shape[0]) + e_ref * m0
    ae_match = alpha_eta_bound_matching(eigenvalues(md0), n, m, gamma, tol_one=default_tol_zero(md0) * 1e-1)
    return StepSizeBounds(
        alpha_max_gap=a_gap,
        alpha_max_matching=a_match,
        alpha_eta_max_spectral=ae_spec,
        alpha_eta_max_spectral_real=ae_real,
        alpha_eta_max_matching=ae_match,
        eta_max_gershgorin=e_gersh,
        eta_max_perturbation=e_pert,
        gamma_used=float(gamma),
        lambda2_w=l2w,
        lambda2_a=l2a,
        alpha_ref=a_ref,
        eta_ref=e_ref,
    )


def min_bounds(bounds) -> StepSizeBounds:
    """Field-wise minimum over a collection of per-snapshot bounds."""
    bounds = list(bounds)
    if not bounds:
        raise ValueError("no bounds to combine")
    return StepSizeBounds(
        **{f.name: min(getattr(b, f.name) for b in bounds) for f in fields(StepSizeBounds)}
    )
