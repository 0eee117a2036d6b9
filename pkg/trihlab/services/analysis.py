"""Unfolding, averaging, polynomial defects and Green-formula checks.

Unfolded fields are sampled rather than stored symbolically: an
``UnfoldedField`` keeps a sampler ``(ȳ, y_N, a, b) ↦ ∂^a_ȳ ∂^b_{y_N} û`` on
every whole cell, which is exactly what the defect projector and the trace
diagnostics need.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Literal, Sequence

import numpy as np
from numpy.polynomial.legendre import leggauss
from pydantic import BaseModel, ConfigDict, Field as PydanticField

from ..constants import CRITICAL_ALPHA
from ..logging import get_logger
from .fields import Factor, Field
from .geometry import Box, OscillatingDomain, PeriodicProfile, whole_cells

__all__ = [
    "AverageReport",
    "GreenCheck",
    "IntegrationCheck",
    "MissingDerivativeError",
    "NoWholeCellError",
    "PeriodicStrip",
    "TraceReport",
    "UnfoldedField",
    "average_convergence",
    "check_exact_integration",
    "defect_norm",
    "local_average",
    "polynomial_defect",
    "trace_identity_diagnostic",
    "unfold",
    "verify_green",
    "verify_green_1d",
]

logger = get_logger(__name__)

UnfoldKind = Literal["anisotropic", "alpha_scaled"]
Sampler = Callable[[np.ndarray, np.ndarray, int, int], np.ndarray]

DEFAULT_GRID = (16, 32)
_BETAS = ((2, 0), (1, 1), (0, 2), (1, 0), (0, 1), (0, 0))


class NoWholeCellError(ValueError):
    """Raised when no cell εk + εY fits inside W."""


class MissingDerivativeError(ValueError):
    """Raised when a field cannot supply the derivative order an operation needs."""


def _gauss(lo: float, hi: float, points: int, panels: int = 1) -> tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(points)
    edges = np.linspace(lo, hi, panels + 1)
    half = 0.5 * np.diff(edges)[:, None]
    mid = 0.5 * (edges[:-1] + edges[1:])[:, None]
    return (mid + half * nodes).ravel(), (half * weights).ravel()


def _require(field_: Field, order: int) -> None:
    if getattr(field_, "max_order", 0) < order:
        raise MissingDerivativeError(f"missing_derivatives: need order {order}, field has {field_.max_order}")


@dataclass(frozen=True)
class UnfoldedField:
    """A field rearranged over the whole cells C^k_ε of W.

    ``ybar``/``ybar_weights`` is a Gauss rule on Y; ``yn``/``yn_weights`` has
    shape ``(len(ybar), n)`` since the α-scaled kind has a ȳ-dependent range.
    """

    kind: UnfoldKind
    epsilon: float
    cells: np.ndarray
    ybar: np.ndarray
    ybar_weights: np.ndarray
    yn: np.ndarray
    yn_weights: np.ndarray
    sampler: Sampler

    def derivative(self, a: int = 0, b: int = 0, ybar: np.ndarray | None = None, yn: np.ndarray | None = None) -> np.ndarray:
        """Samples of ∂^a_ȳ ∂^b_{y_N} û with shape ``(cells,) + grid``."""
        if ybar is None:
            ybar = np.broadcast_to(self.ybar[:, None], self.yn.shape)
            yn = self.yn
        return self.sampler(np.asarray(ybar, dtype=float), np.asarray(yn, dtype=float), a, b)

    @property
    def values(self) -> np.ndarray:
        return self.derivative()

    def integrate(self, samples: np.ndarray) -> float:
        """Σ_k ε ∫ samples dȳ dy_N, the measure of Ŵ_ε × (cell grid)."""
        weights = self.ybar_weights[:, None] * self.yn_weights
        return float(self.epsilon * np.sum(samples * weights[None, ...]))


def unfold(
    field_: Field,
    epsilon: float,
    kind: UnfoldKind = "anisotropic",
    *,
    width: tuple[float, float] = (0.0, 1.0),
    a: float = -1.0,
    alpha: float | None = None,
    profile: PeriodicProfile | None = None,
    grid: tuple[int, int] = DEFAULT_GRID,
) -> UnfoldedField:
    """Unfold ``field_`` on the whole cells of W.

    anisotropic: û(k, ȳ, y_N) = u(εk + εȳ, εy_N) with y_N ∈ (a/ε, 0).
    alpha_scaled: û(k, ȳ, y_N) = u(εk + εȳ, ε^α y_N) with y_N ∈ (−1, b(ȳ)).
    """
    cells = whole_cells(width, epsilon)
    if len(cells) == 0:
        raise NoWholeCellError(f"no_whole_cell: epsilon={epsilon} width={width}")
    ybar, ybar_w = _gauss(-0.5, 0.5, grid[0])
    nodes, weights = leggauss(grid[1])
    if kind == "anisotropic":
        normal_scale = epsilon
        lo, hi = a / epsilon, 0.0
        yn = np.broadcast_to(lo + (hi - lo) * 0.5 * (nodes + 1.0), (len(ybar), grid[1])).copy()
        yn_w = np.broadcast_to(0.5 * (hi - lo) * weights, (len(ybar), grid[1])).copy()
    elif kind == "alpha_scaled":
        if alpha is None or profile is None:
            raise ValueError("alpha_scaled unfolding needs alpha and profile")
        normal_scale = epsilon**alpha
        top = profile.evaluate(ybar)[:, None]
        yn = -1.0 + (top + 1.0) * 0.5 * (nodes[None, :] + 1.0)
        yn_w = 0.5 * (top + 1.0) * weights[None, :]
    else:
        raise ValueError(f"unknown unfolding kind {kind!r}")

    shape_cells = cells.astype(float)

    def sampler(ybar_pts: np.ndarray, yn_pts: np.ndarray, da: int, db: int) -> np.ndarray:
        _require(field_, da + db)
        k = shape_cells.reshape((-1,) + (1,) * ybar_pts.ndim)
        xbar = epsilon * (k + ybar_pts[None, ...])
        xn = np.broadcast_to(normal_scale * yn_pts[None, ...], xbar.shape)
        points = np.stack([xbar, xn], axis=-1)
        return epsilon**da * normal_scale**db * field_.derivative(points, da, db)

    return UnfoldedField(
        kind=kind,
        epsilon=epsilon,
        cells=cells,
        ybar=ybar,
        ybar_weights=ybar_w,
        yn=yn,
        yn_weights=yn_w,
        sampler=sampler,
    )


@dataclass(frozen=True, slots=True)
class IntegrationCheck:
    lhs: float
    rhs: float
    residual: float


def check_exact_integration(
    field_: Field,
    epsilon: float,
    a: float = -1.0,
    *,
    width: tuple[float, float] = (0.0, 1.0),
    derivative: tuple[int, int] | None = None,
    points: int = 20,
    grid: tuple[int, int] = DEFAULT_GRID,
) -> IntegrationCheck:
    """Compare ∫_{Ŵ_ε×(a,0)} u with ε ∫_{Ŵ_ε×Y×(a/ε,0)} û.

    With ``derivative = (i, j)`` the integrand is |∂^i_x̄ ∂^j_{x_N} u|² and the
    right side carries the factor ε^{1−2l}, l = i + j.
    """
    if not -1.0 <= a < 0.0:
        raise ValueError("a must lie in [-1, 0)")
    unfolded = unfold(field_, epsilon, "anisotropic", width=width, a=a, grid=grid)
    order = derivative or (0, 0)
    level = sum(order)

    lhs = 0.0
    magnitude = 0.0
    xn, wn = _gauss(a, 0.0, points)
    for k in unfolded.cells:
        xb, wb = _gauss(epsilon * (k - 0.5), epsilon * (k + 0.5), points)
        grid_x, grid_n = np.meshgrid(xb, xn, indexing="ij")
        values = field_.derivative(np.stack([grid_x, grid_n], axis=-1), *order)
        integrand = values**2 if derivative else values
        lhs += float(np.sum(integrand * np.outer(wb, wn)))
        magnitude += float(np.sum(np.abs(integrand) * np.outer(wb, wn)))

    samples = unfolded.derivative(*order)
    integrand = samples**2 if derivative else samples
    rhs = epsilon ** (1 - 2 * level) * unfolded.integrate(integrand)
    residual = abs(lhs - rhs) / magnitude if magnitude > 0.0 else abs(lhs - rhs)
    return IntegrationCheck(lhs=lhs, rhs=rhs, residual=residual)


def local_average(field_: Field, epsilon: float, points: int = 8) -> Callable[[np.ndarray], np.ndarray]:
    """``x ↦ ε^{-2} ∫_{x + εY²} v`` with a tensor Gauss rule on the cube."""

    offsets, weights = _gauss(-0.5 * epsilon, 0.5 * epsilon, points)
    dx, dy = np.meshgrid(offsets, offsets, indexing="ij")
    shifts = np.stack([dx.ravel(), dy.ravel()], axis=-1)
    cube_weights = np.outer(weights, weights).ravel() / epsilon**2

    def averaged(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        samples = field_(x[..., None, :] + shifts)
        return np.sum(samples * cube_weights, axis=-1)

    return averaged


@dataclass(frozen=True)
class AverageReport:
    epsilons: tuple[float, ...]
    errors: tuple[float, ...]
    ratios: tuple[float, ...]

    @property
    def monotone(self) -> bool:
        return all(b < a for a, b in zip(self.errors, self.errors[1:]))


def average_convergence(
    field_: Field,
    epsilons: Sequence[float],
    region: Box = Box(x_range=(0.0, 1.0), y_range=(-1.0, 0.0)),
    points: int = 64,
) -> AverageReport:
    """‖v̄_ε − v‖ over a shrinking ε sequence.

    Errors are measured on the points of ``region`` whose largest cube
    stays inside it, the same set for every ε of the sequence.
    """
    margin = 0.5 * max(epsilons)
    (x0, x1), (y0, y1) = region.x_range, region.y_range
    xs, wx = _gauss(x0 + margin, x1 - margin, points)
    ys, wy = _gauss(y0 + margin, y1 - margin, points)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx, gy], axis=-1)
    exact = field_(pts)
    errors = []
    for eps in epsilons:
        diff = local_average(field_, eps)(pts) - exact
        errors.append(math.sqrt(float(np.sum(diff**2 * np.outer(wx, wy)))))
    ratios = tuple(a / b if b > 0.0 else math.inf for a, b in zip(errors, errors[1:]))
    return AverageReport(epsilons=tuple(epsilons), errors=tuple(errors), ratios=ratios)


def _y_averages(unfolded: UnfoldedField, a: int, b: int) -> np.ndarray:
    """⟨∂^a_ȳ ∂^b_{y_N} û(k, ·, 0)⟩_Y per cell."""
    samples = unfolded.derivative(a, b, unfolded.ybar, np.zeros_like(unfolded.ybar))
    return samples @ unfolded.ybar_weights


def _quadratic_sampler(coefficients: dict[tuple[int, int], np.ndarray]) -> Sampler:
    """Σ_β c_β(k) y^β / β! as a sampler with exact partials."""

    def sampler(ybar: np.ndarray, yn: np.ndarray, da: int, db: int) -> np.ndarray:
        total = None
        for (px, py), coeff in coefficients.items():
            if da > px or db > py:
                continue
            term_x = ybar ** (px - da) / math.factorial(px - da)
            term_y = yn ** (py - db) / math.factorial(py - db)
            piece = coeff.reshape((-1,) + (1,) * ybar.ndim) * (term_x * term_y)[None, ...]
            total = piece if total is None else total + piece
        if total is None:
            first = next(iter(coefficients.values()))
            return np.zeros((len(first),) + np.broadcast(ybar, yn).shape)
        return total

    return sampler


def _difference(base: Sampler, other: Sampler) -> Sampler:
    def sampler(ybar: np.ndarray, yn: np.ndarray, da: int, db: int) -> np.ndarray:
        return base(ybar, yn, da, db) - other(ybar, yn, da, db)

    return sampler


def polynomial_defect(unfolded: UnfoldedField) -> UnfoldedField:
    """û − 𝒫û with 𝒫 = Q₀ + Q₁ + Q₂ built from Y-averaged traces at y_N = 0.

    Q₂ = P₂, Q₁ = P₁(I − Q₂), Q₀ = P₀(I − Q₁ − Q₂), where P_l keeps the
    degree-l Taylor monomials with coefficients ⟨D^β û(·, 0)⟩_Y, |β| = l.
    """
    zeros = np.zeros(len(unfolded.cells))
    coefficients = {beta: zeros for beta in _BETAS}
    for beta in ((2, 0), (1, 1), (0, 2)):
        coefficients[beta] = _y_averages(unfolded, *beta)
    quadratic = replace(unfolded, sampler=_quadratic_sampler(dict(coefficients)))
    for beta in ((1, 0), (0, 1)):
        coefficients[beta] = _y_averages(unfolded, *beta) - _y_averages(quadratic, *beta)
    partial = replace(unfolded, sampler=_quadratic_sampler(dict(coefficients)))
    coefficients[(0, 0)] = _y_averages(unfolded, 0, 0) - _y_averages(partial, 0, 0)
    projector = _quadratic_sampler(coefficients)
    return replace(unfolded, sampler=_difference(unfolded.sampler, projector))


def defect_norm(defect: UnfoldedField, order: int = 2) -> float:
    """(Σ_k ε ∫ |D^order_y V|²)^{1/2} over the defect's grid."""

    total = np.zeros(defect.yn.shape)[None, ...]
    for a in range(order + 1):
        total = total + math.comb(order, a) * defect.derivative(a, order - a) ** 2
    return math.sqrt(defect.integrate(total))


@dataclass(frozen=True)
class TraceReport:
    alpha: float
    epsilons: tuple[float, ...]
    first_normal: tuple[float, ...]
    second_normal: tuple[float, ...]
    identity_residuals: tuple[float, ...] = field(default=())

    @property
    def first_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.first_normal, self.first_normal[1:]))

    @property
    def second_decreasing(self) -> bool:
        return all(b < a for a, b in zip(self.second_normal, self.second_normal[1:]))


def _trace_norm(field_: Field, width: tuple[float, float], order: int, points: int = 8, panels: int = 64) -> float:
    xs, ws = _gauss(width[0], width[1], points, panels)
    values = field_.derivative(np.stack([xs, np.zeros_like(xs)], axis=-1), 0, order)
    return math.sqrt(float(np.sum(ws * values**2)))


def _identity_residual(field_: Field, domain: OscillatingDomain) -> float:
    eps = domain.epsilon
    defect = polynomial_defect(unfold(field_, eps, "anisotropic", width=domain.width, a=-eps))
    ybar = defect.ybar
    curvature = defect.derivative(2, 0, ybar, np.zeros_like(ybar)) / eps**CRITICAL_ALPHA
    centres = np.stack([eps * defect.cells.astype(float), np.zeros(len(defect.cells))], axis=-1)
    normal = field_.derivative(centres, 0, 1)
    predicted = -normal[:, None] * domain.profile.evaluate(ybar, 2)[None, :]
    weights = eps * defect.ybar_weights[None, :]
    scale = math.sqrt(float(np.sum(weights * predicted**2)))
    residual = math.sqrt(float(np.sum(weights * (curvature - predicted) ** 2)))
    return residual / scale if scale > 0.0 else residual


def trace_identity_diagnostic(
    samples: Sequence[tuple[OscillatingDomain, Field]], alpha: float
) -> TraceReport:
    """Normal-trace norms on x_N = 0 over a decreasing ε family.

    ``samples`` pairs each domain with an eigenfield on it. At the critical
    exponent the residual of ε^{−5/2} ∂²_ȳ(defect) = −∂_N u · b'' is added.
    """
    ordered = sorted(samples, key=lambda item: -item[0].epsilon)
    first = tuple(_trace_norm(f, d.width, 1) for d, f in ordered)
    second = tuple(_trace_norm(f, d.width, 2) for d, f in ordered)
    identity: tuple[float, ...] = ()
    if math.isclose(alpha, CRITICAL_ALPHA):
        identity = tuple(_identity_residual(f, d) for d, f in ordered)
    report = TraceReport(
        alpha=alpha,
        epsilons=tuple(d.epsilon for d, _ in ordered),
        first_normal=first,
        second_normal=second,
        identity_residuals=identity,
    )
    logger.info("trace diagnostic alpha=%.3g first=%s second=%s", alpha, first, second)
    return report


class PeriodicStrip(BaseModel):
    """Y × (bottom, 0) with Y-periodic lateral sides."""

    model_config = ConfigDict(frozen=True)

    bottom: float = PydanticField(default=-1.0, lt=0.0)


@dataclass(frozen=True)
class GreenCheck:
    """Both sides of the Green identity ∫ D³f : D³φ = −∫ Δ³f φ + boundary."""

    lhs: float
    rhs: float
    residual: float
    volume: float
    boundary: dict[str, float]


def _d(field_: Field, x: np.ndarray, indices: Sequence[int]) -> np.ndarray:
    b = sum(indices)
    return field_.derivative(x, len(indices) - b, b)


def _lap(field_: Field, x: np.ndarray, indices: Sequence[int], times: int = 1) -> np.ndarray:
    """∂^indices Δ^times f in two dimensions."""
    if times == 0:
        return _d(field_, x, indices)
    return _lap(field_, x, tuple(indices) + (0, 0), times - 1) + _lap(field_, x, tuple(indices) + (1, 1), times - 1)


def _triple_contraction(f: Field, phi: Field, x: np.ndarray) -> np.ndarray:
    total = np.zeros(x.shape[:-1])
    for a in range(4):
        total = total + math.comb(3, a) * f.derivative(x, a, 3 - a) * phi.derivative(x, a, 3 - a)
    return total


def _box_face_term(f: Field, phi: Field, x: np.ndarray, axis: int, sign: float) -> np.ndarray:
    """n_k f_ijk φ_ij − n_j (Δf)_ij φ_i + n_i (Δ²f)_i φ with n = sign·e_axis."""
    total = np.zeros(x.shape[:-1])
    for i in range(2):
        for j in range(2):
            total = total + sign * _d(f, x, (i, j, axis)) * _d(phi, x, (i, j))
        total = total - sign * _lap(f, x, (i, axis)) * _d(phi, x, (i,))
    return total + sign * _lap(f, x, (axis,), 2) * phi(x)


def _strip_face_term(f: Field, phi: Field, x: np.ndarray, sign: float) -> np.ndarray:
    """Flat-face form of the boundary terms with tangential parts integrated by parts.

    A = f_nnn φ_nn, B = (−(Δf)_nn − 2∂_τ² f_nn) φ_n and
    C = (∂_τ⁴ f_n + (Δ²f)_n + ∂_τ²(Δf)_n) φ, where n = sign·e_N.
    """
    term_a = sign**3 * _d(f, x, (1, 1, 1)) * _d(phi, x, (1, 1))
    term_b = sign**3 * (-_lap(f, x, (1, 1)) - 2.0 * _d(f, x, (0, 0, 1, 1))) * _d(phi, x, (1,))
    term_c = sign * (
        _d(f, x, (0, 0, 0, 0, 1)) + _lap(f, x, (1,), 2) + _lap(f, x, (0, 0, 1))
    ) * phi(x)
    return term_a + term_b + term_c


def verify_green(
    f: Field,
    phi: Field,
    domain: Box | PeriodicStrip,
    *,
    points: int = 10,
    panels: int = 8,
) -> GreenCheck:
    """Evaluate both sides of the triharmonic Green identity by quadrature."""

    _require(f, 6)
    _require(phi, 3)
    if isinstance(domain, PeriodicStrip):
        (x0, x1), (y0, y1) = (-0.5, 0.5), (domain.bottom, 0.0)
    else:
        (x0, x1), (y0, y1) = domain.x_range, domain.y_range
    xs, wx = _gauss(x0, x1, points, panels)
    ys, wy = _gauss(y0, y1, points, panels)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([gx, gy], axis=-1)
    weights = np.outer(wx, wy)
    lhs = float(np.sum(weights * _triple_contraction(f, phi, pts)))
    volume = -float(np.sum(weights * _lap(f, pts, (), 3) * phi(pts)))

    boundary: dict[str, float] = {}
    if isinstance(domain, PeriodicStrip):
        for name, level, sign in (("top", y1, 1.0), ("bottom", y0, -1.0)):
            face = np.stack([xs, np.full_like(xs, level)], axis=-1)
            boundary[name] = float(np.sum(wx * _strip_face_term(f, phi, face, sign)))
    else:
        faces = (
            ("left", 0, x0, -1.0),
            ("right", 0, x1, 1.0),
            ("bottom", 1, y0, -1.0),
            ("top", 1, y1, 1.0),
        )
        for name, axis, level, sign in faces:
            along, w_along = (ys, wy) if axis == 0 else (xs, wx)
            face = np.empty(along.shape + (2,))
            face[:, axis] = level
            face[:, 1 - axis] = along
            boundary[name] = float(np.sum(w_along * _box_face_term(f, phi, face, axis, sign)))

    rhs = volume + sum(boundary.values())
    scale = max(1.0, abs(lhs), abs(volume), sum(abs(v) for v in boundary.values()))
    return GreenCheck(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs) / scale, volume=volume, boundary=boundary)


def verify_green_1d(f: Factor, phi: Factor, interval: tuple[float, float] = (-1.0, 0.0), points: int = 64) -> GreenCheck:
    """∫ f‴φ‴ = −∫ f⁽⁶⁾φ + [f‴φ″ − f⁗φ′ + f⁽⁵⁾φ] on an interval."""

    xs, ws = _gauss(interval[0], interval[1], points)
    lhs = float(np.sum(ws * f(xs, 3) * phi(xs, 3)))
    volume = -float(np.sum(ws * f(xs, 6) * phi(xs)))

    def bracket(x: float) -> float:
        point = np.array([x])
        value = f(point, 3) * phi(point, 2) - f(point, 4) * phi(point, 1) + f(point, 5) * phi(point)
        return float(value[0])

    boundary = {"right": bracket(interval[1]), "left": -bracket(interval[0])}
    rhs = volume + boundary["right"] + boundary["left"]
    scale = max(1.0, abs(lhs), abs(volume), abs(boundary["right"]) + abs(boundary["left"]))
    return GreenCheck(lhs=lhs, rhs=rhs, residual=abs(lhs - rhs) / scale, volume=volume, boundary=boundary)
