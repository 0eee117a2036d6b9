"""Periodic half-strip cell problem and the strange-term constant K1.

The cell unknown ``V`` lives on ``Y × (−L, 0)`` with ``Y = (−1/2, 1/2)``,
is Y-periodic in ȳ and has trace ``b`` at ``y_N = 0``. It is written as
``V = φ_h + w`` where ``φ_h = b_h(ȳ)(1 + y_N)⁴₊`` is the lifting (``b_h`` is
the L² projection of ``b`` onto the periodic factor) and ``w`` vanishes on
the top side. ``w`` minimises ``∫ |D³(φ_h + w)|²``.
"""
from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Literal

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field
from scipy.linalg import LinAlgError, solve

from ..constants import CELL_ELEMENTS_PER_FREQUENCY, DEFAULT_DEGREE
from ..logging import get_logger
from .forms import energy_matrices
from .geometry import Box, PeriodicProfile, UnsupportedOrderError
from .spline import (
    TensorSplineSpace,
    build_quadrature,
    clamped_space,
    constrain,
    evaluate,
    periodic_space,
    project_1d,
    tensor_space,
)

__all__ = [
    "CellProblem",
    "CellSolution",
    "CellSolveError",
    "UnresolvedProfileError",
    "cell_space",
    "default_k1",
    "k1_flux_diagnostic",
    "k1_pairing",
    "solve_cell",
]

logger = get_logger(__name__)

DEFAULT_ELEMENTS_PER_FREQUENCY = 16
_Y_POINTS = 64
_KKT_RESIDUAL_TOL = 1e-8


class UnresolvedProfileError(ValueError):
    """Raised when the lateral mesh under-resolves the profile."""


class CellSolveError(RuntimeError):
    """Raised when the constrained minimisation cannot be solved."""


class CellProblem(BaseModel):
    """Discretisation and truncation settings of one cell solve."""

    model_config = ConfigDict(frozen=True)

    profile: PeriodicProfile
    depth: float = Field(default=4.0, gt=1.0)
    bottom: Literal["free", "clamped"] = "free"
    degree: int = Field(default=DEFAULT_DEGREE, ge=3)
    elements_per_period: int | None = Field(default=None, ge=1)
    elements_top: int = Field(default=16, ge=4)
    elements_per_depth: int = Field(default=4, ge=1)
    quad_points: int | None = Field(default=None, ge=1)

    @property
    def lateral_elements(self) -> int:
        if self.elements_per_period is not None:
            return self.elements_per_period
        frequency = max(self.profile.max_frequency, 1)
        return max(DEFAULT_ELEMENTS_PER_FREQUENCY * frequency, self.degree + 1)

    @property
    def lower_elements(self) -> int:
        return max(1, math.ceil(self.elements_per_depth * (self.depth - 1.0)))

    def with_changes(self, **changes: object) -> "CellProblem":
        return self.model_copy(update=changes)


def cell_space(problem: CellProblem) -> TensorSplineSpace:
    """Periodic ȳ factor times a clamped y_N factor with a breakpoint at −1.

    The breakpoint at y_N = −1 has continuity C³ so that ``(1 + y_N)⁴₊`` is
    a member of the y_N factor.
    """
    p = problem.degree
    sx = periodic_space(problem.lateral_elements, p)
    split = (problem.depth - 1.0) / problem.depth
    lower = np.linspace(0.0, split, problem.lower_elements + 1)
    upper = np.linspace(split, 1.0, problem.elements_top + 1)
    breakpoints = np.concatenate([lower, upper[1:]])
    overrides = {problem.lower_elements: min(3, p - 1)}
    sy = clamped_space(degree=p, breakpoints=breakpoints, continuity_overrides=overrides)
    return tensor_space(sx, sy)


def _lifting(problem: CellProblem, space: TensorSplineSpace) -> np.ndarray:
    depth = problem.depth
    trace = project_1d(space.sx, lambda s: problem.profile.evaluate(s - 0.5))
    shape = project_1d(space.sy, lambda t: np.maximum(1.0 + depth * (t - 1.0), 0.0) ** 4)
    return np.outer(trace, shape).ravel()


def _gauge_rows(problem: CellProblem, space: TensorSplineSpace) -> np.ndarray:
    """Strip integrals of ∂_y w and ∂²_y w; together they fix the span{y, y²} kernel."""
    quad = build_quadrature(space, problem.quad_points)
    ty = quad.y.points.ravel()
    wy = quad.y.weights.ravel()
    sx_integrals = space.sx.basis(quad.x.points.ravel()).T @ quad.x.weights.ravel()
    rows = []
    for order in (1, 2):
        # ∂_y = ∂_t / L and dy = L dt
        factor = problem.depth ** (1 - order)
        sy_integrals = space.sy.basis(ty, order).T @ wy
        rows.append(factor * np.outer(sx_integrals, sy_integrals).ravel())
    return np.asarray(rows)


@dataclass(frozen=True)
class CellSolution:
    """Discrete cell minimiser and the K1 values derived from it."""

    problem: CellProblem
    space: TensorSplineSpace
    V_coefficients: np.ndarray
    K1_energy: float
    K1_pairing: float
    K1_flux: float | None
    truncation_gap: float | None = None
    depth_sensitivity: float | None = None
    K1_other_bottom: float | None = None
    K1_deep: float | None = None
    natural_residuals: dict[str, float] = field(default_factory=dict)

    @property
    def recommended_k1(self) -> float:
        """Energy value at the largest computed depth."""
        return self.K1_deep if self.K1_deep is not None else self.K1_energy


def _minimise(problem: CellProblem, space: TensorSplineSpace, stiffness: np.ndarray, lifting: np.ndarray) -> np.ndarray:
    free = space.free_dofs
    block = stiffness[np.ix_(free, free)]
    rhs = -(stiffness @ lifting)[free]
    try:
        if problem.bottom == "clamped":
            correction = solve(block, rhs, assume_a="pos")
        else:
            gauge = _gauge_rows(problem, space)[:, free]
            size = len(free)
            kkt = np.zeros((size + 2, size + 2))
            kkt[:size, :size] = block
            kkt[size:, :size] = gauge
            kkt[:size, size:] = gauge.T
            solution = solve(kkt, np.concatenate([rhs, np.zeros(2)]), assume_a="sym")
            correction = solution[:size]
            residual = np.linalg.norm(kkt @ solution - np.concatenate([rhs, np.zeros(2)]))
            if residual > _KKT_RESIDUAL_TOL * max(1.0, np.linalg.norm(rhs)):
                raise CellSolveError(f"singular_cell_system: residual {residual:.3e}")
    except LinAlgError as exc:
        raise CellSolveError(f"singular_cell_system: {exc}") from exc
    full = lifting.copy()
    full[free] += correction
    return full


def _solve_single(problem: CellProblem) -> CellSolution:
    frequency = problem.profile.max_frequency
    if problem.lateral_elements < CELL_ELEMENTS_PER_FREQUENCY * frequency:
        raise UnresolvedProfileError(
            f"unresolved_profile: {problem.lateral_elements} elements for frequency {frequency}"
        )
    started = time.perf_counter()
    space = constrain(cell_space(problem), "top", 1)
    if problem.bottom == "clamped":
        space = constrain(space, "bottom", 3)
    domain = Box(x_range=(-0.5, 0.5), y_range=(-problem.depth, 0.0))
    stiffness, _ = energy_matrices(space, domain, build_quadrature(space, problem.quad_points))
    lifting = _lifting(problem, space)
    coefficients = _minimise(problem, space, stiffness, lifting)
    energy = float(coefficients @ stiffness @ coefficients)

    partial = CellSolution(
        problem=problem,
        space=space,
        V_coefficients=coefficients,
        K1_energy=max(energy, 0.0),
        K1_pairing=float("nan"),
        K1_flux=None,
    )
    flux = k1_flux_diagnostic(partial, problem) if problem.degree >= 5 else None
    solution = CellSolution(
        problem=problem,
        space=space,
        V_coefficients=coefficients,
        K1_energy=max(energy, 0.0),
        K1_pairing=k1_pairing(partial, problem),
        K1_flux=flux,
        natural_residuals=natural_residuals(partial, problem),
    )
    logger.info(
        "cell solve L=%.2f bottom=%s: %d free dofs, K1=%.10g in %.2fs",
        problem.depth,
        problem.bottom,
        space.n_free,
        solution.K1_energy,
        time.perf_counter() - started,
    )
    return solution


def solve_cell(problem: CellProblem, *, brackets: bool = True) -> CellSolution:
    """Solve the cell problem; with ``brackets`` also the other bottom mode and depth 2L."""

    base = _solve_single(problem)
    if not brackets:
        return base
    other_mode = "clamped" if problem.bottom == "free" else "free"
    other = _solve_single(problem.with_changes(bottom=other_mode))
    deep = _solve_single(problem.with_changes(depth=2.0 * problem.depth))
    return CellSolution(
        problem=base.problem,
        space=base.space,
        V_coefficients=base.V_coefficients,
        K1_energy=base.K1_energy,
        K1_pairing=base.K1_pairing,
        K1_flux=base.K1_flux,
        truncation_gap=abs(base.K1_energy - other.K1_energy),
        depth_sensitivity=abs(base.K1_energy - deep.K1_energy),
        K1_other_bottom=other.K1_energy,
        K1_deep=deep.K1_energy,
        natural_residuals=base.natural_residuals,
    )


def default_k1(problem: CellProblem) -> float:
    """K1 handed to the limit problems: free-mode energy at depth 2L."""

    return solve_cell(problem.with_changes(bottom="free", depth=2.0 * problem.depth), brackets=False).K1_energy


def _partial(solution: CellSolution, st: np.ndarray, d_ybar: int, d_y: int) -> np.ndarray:
    value = evaluate(solution.space, solution.V_coefficients, st, (d_ybar, d_y))
    return value / solution.problem.depth**d_y


def _top_grid(problem: CellProblem, points: int = _Y_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Gauss grid on Y × {0} in reference coordinates and its weights."""
    nodes, weights = leggauss(points)
    s = 0.5 * (nodes + 1.0)
    return np.stack([s, np.ones_like(s)], axis=-1), 0.5 * weights


def k1_pairing(solution: CellSolution, problem: CellProblem) -> float:
    """∫_{Y×(−1,0)} D³V : D³(b_h(ȳ)(1 + y_N)⁴).

    ``b_h`` is the projected trace carried by the lifting, so the pairing
    agrees with the energy up to the accuracy of the linear solve.
    """
    space = solution.space
    first_top = problem.lower_elements
    quad = build_quadrature(space, problem.quad_points)
    trace = project_1d(space.sx, lambda s: problem.profile.evaluate(s - 0.5))
    total = 0.0
    for ex in range(space.sx.n_elements):
        for ey in range(first_top, space.sy.n_elements):
            points, weights = quad.element(ex, ey)
            y = problem.depth * (points[:, 1] - 1.0)
            lift = 1.0 + y
            dx = weights * problem.depth
            contraction = np.zeros(len(weights))
            for d_ybar, multiplicity in ((3, 1), (2, 3), (1, 3), (0, 1)):
                d_y = 3 - d_ybar
                power = math.factorial(4) / math.factorial(4 - d_y)
                lifted = (space.sx.basis(points[:, 0], d_ybar) @ trace) * power * lift ** (4 - d_y)
                contraction += multiplicity * _partial(solution, points, d_ybar, d_y) * lifted
            total += float(np.sum(contraction * dx))
    return total


def k1_flux_diagnostic(solution: CellSolution, problem: CellProblem) -> float:
    """∫_Y (3V_{ȳ⁴y} + 3V_{ȳ²y³} + V_{y⁵}) b dȳ at y_N = 0.

    ``V_{y⁵}`` is constant on each element, so it is taken at the midpoints of
    the two top elements and extrapolated linearly to ``y_N = 0``. Needs
    degree at least five.
    """
    if problem.degree < 5:
        raise UnsupportedOrderError(f"unsupported_order:degree {problem.degree} < 5")
    st, weights = _top_grid(problem)
    step = 1.0 / (problem.depth * problem.elements_top)
    near, far = st.copy(), st.copy()
    near[:, 1] = 1.0 - 0.5 * step
    far[:, 1] = 1.0 - 1.5 * step
    fifth = 1.5 * _partial(solution, near, 0, 5) - 0.5 * _partial(solution, far, 0, 5)
    flux = 3.0 * _partial(solution, st, 4, 1) + 3.0 * _partial(solution, st, 2, 3) + fifth
    return float(np.sum(weights * flux * problem.profile.evaluate(st[:, 0] - 0.5)))


def natural_residuals(solution: CellSolution, problem: CellProblem) -> dict[str, float]:
    """L²(Y) norms at y_N = 0 of the natural conditions of the minimiser.

    Each norm is divided by ``‖∂²V/∂ȳ²(·, 0)‖`` (or by one for a constant
    profile). ``laplacian_plus`` and ``laplacian_minus`` are the two printed
    sign variants of the second condition.
    """
    st, weights = _top_grid(problem)
    scale = math.sqrt(float(np.sum(weights * _partial(solution, st, 2, 0) ** 2)))
    scale = scale if scale > 1e-12 else 1.0

    def norm(values: np.ndarray) -> float:
        return math.sqrt(float(np.sum(weights * values**2))) / scale

    mixed = _partial(solution, st, 2, 2)
    fourth = _partial(solution, st, 0, 4) if problem.degree >= 4 else np.zeros(len(weights))
    return {
        "third_normal": norm(_partial(solution, st, 0, 3)),
        "laplacian_plus": norm(3.0 * mixed + fourth),
        "laplacian_minus": norm(mixed - fourth),
    }
