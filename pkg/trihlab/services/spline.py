"""Tensor-product spline spaces on the unit square.

Two kinds of univariate factor are supported: clamped (open knot vector,
first and last knot repeated ``p + 1`` times) and periodic (uniform extended
knots wrapped onto ``m`` functions). Basis functions are evaluated through
``scipy.interpolate.BSpline`` with an identity coefficient matrix, so every
derivative is exact for the piecewise polynomials involved.

Coefficients are stored on the *extracted* level: a clamped factor is its
own B-spline basis, a periodic factor combines the raw functions through an
extraction matrix ``E`` (raw → periodic). Tensor coefficients are flattened
in C order, ``index = ix * ny + iy``.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Iterator, Mapping, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from scipy import sparse
from scipy.interpolate import BSpline
from scipy.linalg import cho_factor, cho_solve

from ..constants import DEFAULT_DEGREE, MIN_DEGREE
from ..logging import get_logger

__all__ = [
    "BasisTable",
    "ConstraintError",
    "QuadratureRule",
    "QuadratureRule1D",
    "SIDES",
    "SplineSpace1D",
    "TensorSplineSpace",
    "build_quadrature",
    "clamped_space",
    "constrain",
    "element_tables",
    "eval_basis",
    "evaluate",
    "gauss_rule_1d",
    "periodic_space",
    "project",
    "project_1d",
    "tensor_space",
]

logger = get_logger(__name__)

SIDES = ("left", "right", "bottom", "top")
MAX_LAYERS = 3
MAX_BASIS_ORDER = 3


class ConstraintError(ValueError):
    """Raised for an invalid side or layer count in ``constrain``."""


@dataclass(frozen=True)
class SplineSpace1D:
    degree: int
    knots: np.ndarray
    breakpoints: np.ndarray
    periodic: bool
    extraction: np.ndarray

    @property
    def raw_dim(self) -> int:
        return len(self.knots) - self.degree - 1

    @property
    def dim(self) -> int:
        return int(self.extraction.shape[1])

    @property
    def n_elements(self) -> int:
        return len(self.breakpoints) - 1

    def element_of(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        index = np.searchsorted(self.breakpoints, x, side="right") - 1
        return np.clip(index, 0, self.n_elements - 1)

    def support(self, element: int) -> np.ndarray:
        """Raw indices of the ``p + 1`` functions nonzero on ``element``."""
        left = self.breakpoints[element]
        span = int(np.searchsorted(self.knots, left, side="right")) - 1
        return np.arange(span - self.degree, span + 1)

    def basis_raw(self, x: np.ndarray, nu: int = 0) -> np.ndarray:
        """Raw B-splines at ``x``.

        Derivatives above the smoothness at a breakpoint are the one-sided
        values from the element to the right.
        """
        x = np.asarray(x, dtype=float)
        spline = BSpline(self.knots, np.eye(self.raw_dim), self.degree, extrapolate=True)
        return np.atleast_2d(spline(x.ravel(), nu=nu)).reshape(x.shape + (self.raw_dim,))

    def basis(self, x: np.ndarray, nu: int = 0) -> np.ndarray:
        """All extracted basis functions (or their ``nu``-th derivative) at ``x``."""
        return self.basis_raw(x, nu) @ self.extraction


def _check_degree(degree: int) -> None:
    if degree < MIN_DEGREE:
        raise ValueError(f"degree must be at least {MIN_DEGREE} for H3 conformity, got {degree}")


def clamped_space(
    elements: int | None = None,
    degree: int = DEFAULT_DEGREE,
    continuity: int | None = None,
    *,
    breakpoints: Sequence[float] | None = None,
    continuity_overrides: Mapping[int, int] | None = None,
) -> SplineSpace1D:
    """Clamped space on [0, 1].

    Either ``elements`` (uniform breakpoints) or explicit ``breakpoints`` are
    given. ``continuity`` defaults to the maximal ``p − 1``;
    ``continuity_overrides`` maps interior breakpoint indices (1-based,
    counted from the left end) to a lower continuity there.
    """
    _check_degree(degree)
    if breakpoints is None:
        if elements is None or elements < 1:
            raise ValueError("elements must be a positive integer")
        points = np.linspace(0.0, 1.0, elements + 1)
    else:
        points = np.asarray(breakpoints, dtype=float)
        if points[0] != 0.0 or points[-1] != 1.0 or np.any(np.diff(points) <= 0.0):
            raise ValueError("breakpoints must increase strictly from 0 to 1")
    continuity = degree - 1 if continuity is None else continuity
    overrides = dict(continuity_overrides or {})
    interior: list[float] = []
    for index, point in enumerate(points[1:-1], start=1):
        smoothness = overrides.get(index, continuity)
        if smoothness < 2 or smoothness > degree - 1:
            raise ValueError(f"continuity must lie in [2, {degree - 1}], got {smoothness}")
        interior.extend([float(point)] * (degree - smoothness))
    knots = np.concatenate([np.zeros(degree + 1), interior, np.ones(degree + 1)])
    n = len(knots) - degree - 1
    return SplineSpace1D(degree=degree, knots=knots, breakpoints=points, periodic=False, extraction=np.eye(n))


def periodic_space(elements: int, degree: int = DEFAULT_DEGREE) -> SplineSpace1D:
    """Uniform periodic space of maximal smoothness with ``elements`` functions.

    The extended knot vector carries ``elements + p`` raw functions; raw
    function ``j`` and ``j + elements`` are translates by one period and are
    merged into periodic function ``j mod elements``.
    """
    _check_degree(degree)
    if elements <= degree:
        raise ValueError(f"periodic space needs more than {degree} elements, got {elements}")
    knots = np.arange(-degree, elements + degree + 1, dtype=float) / elements
    raw = elements + degree
    extraction = np.zeros((raw, elements))
    extraction[np.arange(raw), np.arange(raw) % elements] = 1.0
    return SplineSpace1D(
        degree=degree,
        knots=knots,
        breakpoints=np.linspace(0.0, 1.0, elements + 1),
        periodic=True,
        extraction=extraction,
    )


@dataclass(frozen=True)
class TensorSplineSpace:
    """Tensor product ``sx ⊗ sy`` with a per-coefficient constraint mask."""

    sx: SplineSpace1D
    sy: SplineSpace1D
    mask: np.ndarray
    side_layers: tuple[tuple[str, int], ...] = ()
    bc_tag: str = "none"

    @property
    def shape(self) -> tuple[int, int]:
        return self.sx.dim, self.sy.dim

    @property
    def degree(self) -> int:
        return max(self.sx.degree, self.sy.degree)

    @property
    def n_dofs(self) -> int:
        return self.sx.dim * self.sy.dim

    @property
    def free_dofs(self) -> np.ndarray:
        return np.flatnonzero(~self.mask.ravel())

    @property
    def n_free(self) -> int:
        return int(np.count_nonzero(~self.mask))

    def layers_on(self, side: str) -> int:
        return dict(self.side_layers).get(side, 0)

    def extraction(self) -> sparse.csr_matrix:
        """Raw tensor functions → extracted coefficients, C-ordered on both sides."""
        return sparse.kron(
            sparse.csr_matrix(self.sx.extraction), sparse.csr_matrix(self.sy.extraction), format="csr"
        )

    def elements(self) -> Iterator[tuple[int, int]]:
        for ex in range(self.sx.n_elements):
            for ey in range(self.sy.n_elements):
                yield ex, ey

    def with_tag(self, tag: str) -> "TensorSplineSpace":
        return replace(self, bc_tag=tag)


def tensor_space(sx: SplineSpace1D, sy: SplineSpace1D) -> TensorSplineSpace:
    mask = np.zeros((sx.dim, sy.dim), dtype=bool)
    mask.setflags(write=False)
    return TensorSplineSpace(sx=sx, sy=sy, mask=mask)


def constrain(space: TensorSplineSpace, side: str, layers: int) -> TensorSplineSpace:
    """Zero the first ``layers`` coefficient layers next to ``side``.

    ``top`` is the side ``t = 1``; on graph domains this is Γ (or the
    oscillating boundary). Masks only grow, so repeated application keeps
    the largest layer count and corners take the maximum of both sides.
    """
    if side not in SIDES:
        raise ConstraintError(f"unknown_side:{side}")
    if layers < 1 or layers > MAX_LAYERS:
        raise ConstraintError(f"layers_out_of_range:{layers}")
    factor = space.sx if side in ("left", "right") else space.sy
    if factor.periodic:
        raise ConstraintError(f"periodic_side:{side}")
    if layers > factor.dim:
        raise ConstraintError(f"layers_exceed_dimension:{layers}")

    mask = space.mask.copy()
    if side == "left":
        mask[:layers, :] = True
    elif side == "right":
        mask[-layers:, :] = True
    elif side == "bottom":
        mask[:, :layers] = True
    else:
        mask[:, -layers:] = True
    mask.setflags(write=False)

    recorded = dict(space.side_layers)
    recorded[side] = max(layers, recorded.get(side, 0))
    return replace(space, mask=mask, side_layers=tuple(sorted(recorded.items())))


@dataclass(frozen=True, slots=True)
class QuadratureRule1D:
    points: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, slots=True)
class QuadratureRule:
    """Gauss–Legendre points per breakpoint span in each direction."""

    x: QuadratureRule1D
    y: QuadratureRule1D

    @property
    def points_per_element(self) -> int:
        return self.x.points.shape[1] * self.y.points.shape[1]

    def element(self, ex: int, ey: int) -> tuple[np.ndarray, np.ndarray]:
        s, t = np.meshgrid(self.x.points[ex], self.y.points[ey], indexing="ij")
        weights = np.outer(self.x.weights[ex], self.y.weights[ey]).ravel()
        return np.stack([s.ravel(), t.ravel()], axis=-1), weights

    def element_weight_sums(self) -> np.ndarray:
        return np.outer(self.x.weights.sum(axis=1), self.y.weights.sum(axis=1))


def gauss_rule_1d(breakpoints: np.ndarray, points_per_span: int) -> QuadratureRule1D:
    if points_per_span < 1:
        raise ValueError("points_per_span must be at least 1")
    nodes, weights = leggauss(points_per_span)
    left, right = breakpoints[:-1, None], breakpoints[1:, None]
    half = 0.5 * (right - left)
    return QuadratureRule1D(points=left + half * (nodes[None, :] + 1.0), weights=half * weights[None, :])


def build_quadrature(space: TensorSplineSpace, points_per_span: int | None = None) -> QuadratureRule:
    """Gauss rule on every span; exact to degree ``2·points_per_span − 1`` per direction."""

    count = points_per_span if points_per_span is not None else space.degree + 3
    return QuadratureRule(
        x=gauss_rule_1d(space.sx.breakpoints, count),
        y=gauss_rule_1d(space.sy.breakpoints, count),
    )


def element_tables(
    space: SplineSpace1D, rule: QuadratureRule1D, max_order: int = MAX_BASIS_ORDER
) -> tuple[np.ndarray, np.ndarray]:
    """Raw support indices ``(n_el, p+1)`` and values ``(order, n_el, q, p+1)``."""

    supports = np.stack([space.support(e) for e in range(space.n_elements)])
    values = np.empty((max_order + 1,) + rule.points.shape + (space.degree + 1,))
    for nu in range(max_order + 1):
        full = space.basis_raw(rule.points, nu)
        values[nu] = np.take_along_axis(full, supports[:, None, :], axis=2)
    return supports, values


@dataclass(frozen=True, slots=True)
class BasisTable:
    """Nonzero extracted basis functions at one point and their partials.

    ``values[(a, b)][k]`` is ∂^a_s ∂^b_t of basis function ``indices[k]``.
    """

    indices: np.ndarray
    values: dict[tuple[int, int], np.ndarray]


def _nonzero_columns(space: SplineSpace1D, x: float) -> np.ndarray:
    raw = space.support(int(space.element_of(np.array(x))))
    return np.flatnonzero(np.any(space.extraction[raw] != 0.0, axis=0))


def eval_basis(space: TensorSplineSpace, point: Sequence[float], max_order: int = MAX_BASIS_ORDER) -> BasisTable:
    """Basis functions whose support contains ``point`` with all partials to ``max_order``."""

    if max_order < 0 or max_order > MAX_BASIS_ORDER:
        raise ValueError(f"max_order must lie in [0, {MAX_BASIS_ORDER}]")
    s, t = float(point[0]), float(point[1])
    cols_x = _nonzero_columns(space.sx, s)
    cols_y = _nonzero_columns(space.sy, t)
    bx = [space.sx.basis(np.array(s), nu)[cols_x] for nu in range(max_order + 1)]
    by = [space.sy.basis(np.array(t), nu)[cols_y] for nu in range(max_order + 1)]
    indices = (cols_x[:, None] * space.sy.dim + cols_y[None, :]).ravel()
    values = {
        (a, b): np.outer(bx[a], by[b]).ravel()
        for a in range(max_order + 1)
        for b in range(max_order + 1 - a)
    }
    return BasisTable(indices=indices, values=values)


def evaluate(space: TensorSplineSpace, coefficients: np.ndarray, st: np.ndarray, order: tuple[int, int] = (0, 0)) -> np.ndarray:
    """∂^a_s ∂^b_t of the spline with full (extracted) ``coefficients`` at ``st``."""

    st = np.asarray(st, dtype=float)
    flat = st.reshape(-1, 2)
    bx = space.sx.basis(flat[:, 0], order[0])
    by = space.sy.basis(flat[:, 1], order[1])
    grid = np.asarray(coefficients, dtype=float).reshape(space.shape)
    values = np.einsum("pi,ij,pj->p", bx, grid, by)
    return values.reshape(st.shape[:-1])


def _reference_mass_1d(space: SplineSpace1D, rule: QuadratureRule1D) -> np.ndarray:
    basis = space.basis(rule.points.ravel())
    return basis.T @ (rule.weights.ravel()[:, None] * basis)


def project_1d(
    space: SplineSpace1D, func: Callable[[np.ndarray], np.ndarray], points_per_span: int | None = None
) -> np.ndarray:
    """L² projection of ``func`` on [0, 1] onto ``space``."""

    rule = gauss_rule_1d(space.breakpoints, points_per_span or space.degree + 3)
    nodes = rule.points.ravel()
    basis = space.basis(nodes)
    rhs = basis.T @ (rule.weights.ravel() * func(nodes))
    return cho_solve(cho_factor(_reference_mass_1d(space, rule)), rhs)


def project(
    space: TensorSplineSpace,
    func: Callable[[np.ndarray, np.ndarray], np.ndarray],
    quad: QuadratureRule | None = None,
) -> np.ndarray:
    """L² projection of ``func(s, t)`` onto the unconstrained tensor space.

    The tensor mass matrix factorises into the two univariate ones, so the
    projection is two Cholesky solves.
    """
    quad = quad or build_quadrature(space)
    nodes_x = quad.x.points.ravel()
    nodes_y = quad.y.points.ravel()
    bx = space.sx.basis(nodes_x)
    by = space.sy.basis(nodes_y)
    s, t = np.meshgrid(nodes_x, nodes_y, indexing="ij")
    weighted = func(s, t) * np.outer(quad.x.weights.ravel(), quad.y.weights.ravel())
    rhs = bx.T @ weighted @ by
    mass_x = cho_factor(_reference_mass_1d(space.sx, quad.x))
    mass_y = cho_factor(_reference_mass_1d(space.sy, quad.y))
    coefficients = cho_solve(mass_x, cho_solve(mass_y, rhs.T).T)
    logger.debug("projected onto %d coefficients", coefficients.size)
    return coefficients.ravel()
