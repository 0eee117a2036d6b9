"""Dense symmetric-definite eigen solves and the one-dimensional oracle."""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Literal, Protocol

import numpy as np
from scipy.linalg import LinAlgError, cholesky, eigh, null_space, solve_triangular, svd
from scipy.optimize import brentq

from ..config import Settings, get_settings
from ..constants import DEFAULT_DEGREE
from ..logging import get_logger
from .forms import energy_factor_1d
from .spline import clamped_space

__all__ = [
    "IndefiniteFormError",
    "IndefiniteMassError",
    "OracleRootCountError",
    "Spectrum",
    "galerkin_eigen_1d",
    "oracle_eigen_1d",
    "solve",
    "solve_factored",
    "solve_pencil",
]

logger = get_logger(__name__)

Family1D = Literal["wbc", "sbc", "dbc"]


class IndefiniteMassError(RuntimeError):
    """Raised when the mass matrix has no Cholesky factor."""


class IndefiniteFormError(RuntimeError):
    """Raised when the energy form has no Cholesky factor."""


class OracleRootCountError(RuntimeError):
    """Raised when the determinant scan finds fewer roots than requested."""


class _Pencil(Protocol):
    Q: np.ndarray
    M: np.ndarray


@dataclass(frozen=True)
class Spectrum:
    """Smallest eigenpairs of ``Qu = λMu`` in ascending order.

    ``residuals`` are ``‖Qu − λMu‖ / ‖Qu‖``; ``scaled_residuals`` use
    ``‖Q‖_F ‖u‖`` as the scale. ``clusters`` labels eigenvalues that agree
    within the clustering tolerance.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    residuals: np.ndarray
    scaled_residuals: np.ndarray
    clusters: tuple[int, ...]
    warnings: tuple[str, ...] = field(default=())

    def __len__(self) -> int:
        return len(self.eigenvalues)

    def cluster_means(self) -> np.ndarray:
        """Each eigenvalue replaced by the mean of its multiplicity cluster."""
        labels = np.asarray(self.clusters, dtype=int)
        means = np.empty_like(self.eigenvalues)
        for label in np.unique(labels):
            members = labels == label
            means[members] = self.eigenvalues[members].mean()
        return means


def _cluster_labels(values: np.ndarray, rtol: float) -> tuple[int, ...]:
    labels: list[int] = []
    current = -1
    for index, value in enumerate(values):
        if index == 0 or value - values[index - 1] > rtol * max(abs(value), 1.0):
            current += 1
        labels.append(current)
    return tuple(labels)


def _check_count(size: int, count: int) -> Spectrum | None:
    if count > size:
        raise ValueError(f"count {count} exceeds pencil dimension {size}")
    if count <= 0:
        empty = np.zeros(0)
        return Spectrum(empty, np.zeros((size, 0)), empty, empty, ())
    return None


def _mass_factor(M: np.ndarray) -> np.ndarray:
    try:
        return cholesky(M, lower=True)
    except LinAlgError as exc:
        raise IndefiniteMassError(f"indefinite_mass: {exc}") from exc


def _spectrum(
    values: np.ndarray,
    vectors: np.ndarray,
    applied: np.ndarray,
    M: np.ndarray,
    q_norm: float,
    settings: Settings,
) -> Spectrum:
    residual = applied - (M @ vectors) * values[None, :]
    residual_norm = np.linalg.norm(residual, axis=0)
    residuals = residual_norm / np.maximum(np.linalg.norm(applied, axis=0), np.finfo(float).tiny)
    scaled = residual_norm / (q_norm * np.linalg.norm(vectors, axis=0))

    warnings: list[str] = []
    for j, value in enumerate(residuals):
        if value > settings.RESIDUAL_TOL:
            warnings.append(f"residual_above_tolerance:j={j + 1}:{value:.3e}")
            logger.warning("eigenpair %d residual %.3e exceeds %.1e", j + 1, value, settings.RESIDUAL_TOL)
    return Spectrum(
        eigenvalues=values,
        eigenvectors=vectors,
        residuals=residuals,
        scaled_residuals=scaled,
        clusters=_cluster_labels(values, settings.CLUSTER_RTOL),
        warnings=tuple(warnings),
    )


def solve_pencil(Q: np.ndarray, M: np.ndarray, count: int, *, settings: Settings | None = None) -> Spectrum:
    """Smallest eigenpairs of ``Qu = λMu`` through the inverted pencil.

    With ``Q = LLᵀ`` the largest eigenvalues μ of ``L⁻¹ M L⁻ᵀ`` give λ = 1/μ.
    The mass matrix is still factored to reject an indefinite ``M``.
    """
    settings = settings or get_settings()
    Q = np.asarray(Q, dtype=float)
    M = np.asarray(M, dtype=float)
    size = Q.shape[0]
    empty = _check_count(size, count)
    if empty is not None:
        return empty

    started = time.perf_counter()
    _mass_factor(M)
    try:
        lower = cholesky(Q, lower=True)
    except LinAlgError as exc:
        raise IndefiniteFormError(f"indefinite_form: {exc}") from exc

    half = solve_triangular(lower, M, lower=True)
    reduced = solve_triangular(lower, half.T, lower=True)
    reduced = 0.5 * (reduced + reduced.T)
    mu, z = eigh(reduced, subset_by_index=[size - count, size - 1])
    mu, z = mu[::-1], z[:, ::-1]
    vectors = solve_triangular(lower.T, z, lower=False) / np.sqrt(mu)[None, :]
    values = 1.0 / mu

    spectrum = _spectrum(values, vectors, Q @ vectors, M, float(np.linalg.norm(Q)), settings)
    logger.info("solved %d eigenpairs of a %d-dim pencil in %.2fs", count, size, time.perf_counter() - started)
    return spectrum


def solve_factored(F: np.ndarray, M: np.ndarray, count: int, *, settings: Settings | None = None) -> Spectrum:
    """Smallest eigenpairs of ``(FᵀF + M)u = λMu`` without forming ``FᵀF``.

    With ``M = LLᵀ`` the eigenvalues are ``1 + σ²`` for the singular values σ
    of ``F L⁻ᵀ``, so an exact kernel of ``F`` returns λ = 1 to rounding.
    """
    settings = settings or get_settings()
    F = np.asarray(F, dtype=float)
    M = np.asarray(M, dtype=float)
    size = M.shape[0]
    empty = _check_count(size, count)
    if empty is not None:
        return empty

    started = time.perf_counter()
    lower = _mass_factor(M)
    reduced = solve_triangular(lower, F.T, lower=True).T
    if reduced.shape[0] < size:
        reduced = np.vstack([reduced, np.zeros((size - reduced.shape[0], size))])
    _, sigma, vt = svd(reduced, full_matrices=False)
    sigma, z = sigma[::-1][:count], vt[::-1][:count].T
    vectors = solve_triangular(lower.T, z, lower=False)
    values = 1.0 + sigma**2

    applied = F.T @ (F @ vectors) + M @ vectors
    q_norm = float(np.linalg.norm(F) ** 2 + np.linalg.norm(M))
    spectrum = _spectrum(values, vectors, applied, M, q_norm, settings)
    logger.info("solved %d eigenpairs of a %d-dim factored pencil in %.2fs", count, size, time.perf_counter() - started)
    return spectrum


def solve(pencil: _Pencil, count: int, *, settings: Settings | None = None) -> Spectrum:
    """Smallest ``count`` eigenpairs of an assembled pencil."""

    return solve_pencil(pencil.Q, pencil.M, count, settings=settings)


def galerkin_eigen_1d(
    bc_family: Family1D,
    count: int,
    *,
    elements: int = 64,
    degree: int = DEFAULT_DEGREE,
    settings: Settings | None = None,
) -> Spectrum:
    """Spline-Galerkin eigenvalues of the interval problem on (−1, 0)."""

    factor, mass = energy_factor_1d(clamped_space(elements, degree), bc_family)
    return solve_factored(factor, mass, count, settings=settings)


# One-dimensional oracle.
#
# On (−1, 0) the form ∫ u‴v‴ + uv = λ ∫ uv integrates by parts to
#
#     ∫ u‴v‴ = −∫ u⁽⁶⁾ v + [u‴v″ − u⁗v′ + u⁽⁵⁾v] from −1 to 0,
#
# so eigenfunctions solve u⁽⁶⁾ = (1 − λ) u and every trace of v left free by
# the form domain forces its partner in the bracket to vanish:
#
#     wbc: v = 0 essential, v′ and v″ free  ->  u = u‴ = u⁗ = 0
#     sbc: v = v′ = 0 essential, v″ free    ->  u = u′ = u‴ = 0
#     dbc: v = v′ = v″ = 0 essential        ->  u = u′ = u″ = 0
#
# at both ends. For λ > 1 write λ − 1 = r⁶; the exponents μ with μ⁶ = −r⁶ are
# r·e^{iθ}, θ = π/6 + kπ/3, and the real solutions are e^{ax}cos(bx) and
# e^{ax}sin(bx) with (a, b) = r(cos θ, sin θ), θ ∈ {π/6, π/2, 5π/6}.

_BC_ORDERS: dict[str, tuple[int, int, int]] = {
    "wbc": (0, 3, 4),
    "sbc": (0, 1, 3),
    "dbc": (0, 1, 2),
}
_ANGLES = (math.pi / 6.0, math.pi / 2.0, 5.0 * math.pi / 6.0)
_SCAN_START = 0.5
_SCAN_STEP = 0.01
_SCAN_STOP = 200.0


def _condition_matrix(r: float, orders: tuple[int, ...]) -> np.ndarray:
    rows = []
    for end in (-1.0, 0.0):
        for order in orders:
            row = []
            for theta in _ANGLES:
                mu = r * complex(math.cos(theta), math.sin(theta))
                # exponentials are anchored at the end where they are largest
                anchor = 0.0 if mu.real >= 0.0 else -1.0
                value = mu**order * np.exp(mu * (end - anchor))
                row.extend([value.real, value.imag])
            rows.append(row)
    matrix = np.asarray(rows)
    scale = np.max(np.abs(matrix), axis=0)
    return matrix / np.where(scale > 0.0, scale, 1.0)


def _determinant(r: float, orders: tuple[int, ...]) -> float:
    return float(np.linalg.det(_condition_matrix(r, orders)))


def _kernel_dimension(bc_family: str) -> int:
    """Dimension of the quadratics admissible for ``bc_family`` (λ = 1 modes)."""
    essential = {"wbc": (0,), "sbc": (0, 1), "dbc": (0, 1, 2)}[bc_family]
    rows = []
    for end in (-1.0, 0.0):
        for order in essential:
            row = [
                math.factorial(k) / math.factorial(k - order) * end ** (k - order) if k >= order else 0.0
                for k in range(3)
            ]
            rows.append(row)
    return int(null_space(np.asarray(rows)).shape[1])


def oracle_eigen_1d(bc_family: Family1D, count: int, *, r_max: float = _SCAN_STOP) -> list[float]:
    """Smallest ``count`` eigenvalues of the interval problem from the determinant roots."""

    if bc_family not in _BC_ORDERS:
        raise ValueError(f"unknown boundary family {bc_family!r}")
    orders = _BC_ORDERS[bc_family]
    eigenvalues = [1.0] * _kernel_dimension(bc_family)

    r_prev = _SCAN_START
    d_prev = _determinant(r_prev, orders)
    while len(eigenvalues) < count and r_prev < r_max:
        r_next = r_prev + _SCAN_STEP
        d_next = _determinant(r_next, orders)
        if d_prev == 0.0:
            eigenvalues.append(1.0 + r_prev**6)
        elif d_prev * d_next < 0.0:
            root = brentq(_determinant, r_prev, r_next, args=(orders,), xtol=1e-13, rtol=4 * np.finfo(float).eps)
            eigenvalues.append(1.0 + root**6)
            logger.debug("oracle %s root r=%.12f", bc_family, root)
        r_prev, d_prev = r_next, d_next

    if len(eigenvalues) < count:
        raise OracleRootCountError(f"root_count_mismatch: found {len(eigenvalues)} of {count} below r={r_max}")
    return eigenvalues[:count]
