"""Quadratic forms of the triharmonic problem and their spline assembly.

The form is ``Q(u, v) = ∫ D³u : D³v + uv`` (plus ``K1 ∫_Γ ∂_N u ∂_N v`` for
the strange-term family) and the mass form is ``M(u, v) = ∫ uv``. Both are
assembled element by element in reference coordinates through the domain's
graph chart, so the same code serves Ω, Ω_ε and rectangles.
"""
from __future__ import annotations

import itertools
import time
from dataclasses import dataclass
from typing import Callable, Literal, Mapping

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator
from scipy import sparse

from ..config import Settings, get_settings
from ..logging import get_logger
from .geometry import ChartDomain, MapJet3, OscillatingDomain, eval_phi
from .spline import (
    MAX_BASIS_ORDER,
    QuadratureRule,
    SplineSpace1D,
    TensorSplineSpace,
    build_quadrature,
    constrain,
    element_tables,
    evaluate,
    gauss_rule_1d,
)

__all__ = [
    "AssembledPencil",
    "BC_TOP_LAYERS",
    "DegenerateChartError",
    "FormSpec",
    "InconsistentMaskError",
    "PhysicalDerivatives",
    "ProblemTooLargeError",
    "PullbackResult",
    "assemble",
    "assemble_1d",
    "constrained_space",
    "energy_factor_1d",
    "energy_matrices",
    "physical_jets",
    "physical_third_derivatives",
    "pullback_T",
    "spline_sampler",
]

logger = get_logger(__name__)

BCFamily = Literal["wbc", "sbc", "dbc", "strange"]

BC_TOP_LAYERS: dict[str, int] = {"wbc": 1, "sbc": 2, "dbc": 3, "strange": 1}
"""Essential coefficient layers on the top side for each family."""

_DET_TOL = 1e-13
_ILL_CONDITIONED = 1e12


class DegenerateChartError(RuntimeError):
    """Raised when a chart jacobian is (numerically) singular."""


class InconsistentMaskError(ValueError):
    """Raised when a space's constraint mask does not match the form spec."""


class ProblemTooLargeError(ValueError):
    """Raised when the free dimension exceeds the dense-solver cap."""


class FormSpec(BaseModel):
    """Which form to assemble and which boundary family it carries.

    Lateral and bottom sides always carry ``side_layers`` constrained layers;
    the top side (Γ on Ω, the oscillating graph on Ω_ε) carries the family's
    layer count.
    """

    model_config = ConfigDict(frozen=True)

    domain_kind: Literal["flat", "oscillating"] = "flat"
    bc_family: BCFamily = "wbc"
    k1: float = Field(default=0.0, ge=0.0)
    side_layers: int = Field(default=1, ge=1, le=3)

    @model_validator(mode="after")
    def _strange_is_flat(self) -> "FormSpec":
        if self.bc_family == "strange" and self.domain_kind != "flat":
            raise ValueError("strange boundary term is only defined on the flat domain")
        return self

    @property
    def top_layers(self) -> int:
        return BC_TOP_LAYERS[self.bc_family]

    def expected_layers(self) -> dict[str, int]:
        return {
            "left": self.side_layers,
            "right": self.side_layers,
            "bottom": self.side_layers,
            "top": self.top_layers,
        }


def constrained_space(space: TensorSplineSpace, spec: FormSpec) -> TensorSplineSpace:
    """Apply the layer pattern of ``spec`` to an unconstrained space."""

    for side, layers in spec.expected_layers().items():
        space = constrain(space, side, layers)
    return space.with_tag(spec.bc_family)


def _check_mask(space: TensorSplineSpace, spec: FormSpec) -> None:
    recorded = dict(space.side_layers)
    expected = spec.expected_layers()
    if recorded != expected or space.bc_tag != spec.bc_family:
        raise InconsistentMaskError(
            f"mask_mismatch: space={recorded} tag={space.bc_tag} expected={expected} tag={spec.bc_family}"
        )


def _check_domain_kind(domain: ChartDomain, spec: FormSpec) -> None:
    oscillating = isinstance(domain, OscillatingDomain)
    if oscillating != (spec.domain_kind == "oscillating"):
        raise InconsistentMaskError(f"domain_kind_mismatch:{spec.domain_kind}")


@dataclass(frozen=True, slots=True)
class PhysicalDerivatives:
    """Physical partials of a set of functions at a set of points.

    Shapes: ``value (P, F)``, ``gradient (P, F, 2)``, ``hessian (P, F, 2, 2)``
    and ``third (P, F, 2, 2, 2)``.
    """

    value: np.ndarray
    gradient: np.ndarray
    hessian: np.ndarray
    third: np.ndarray


def _reference_tensor(ref: Mapping[tuple[int, int], np.ndarray], order: int) -> np.ndarray:
    sample = ref[(0, 0)]
    out = np.empty(sample.shape + (2,) * order)
    for idx in itertools.product(range(2), repeat=order):
        b = sum(idx)
        out[(Ellipsis,) + idx] = ref[(order - b, b)]
    return out


def physical_third_derivatives(ref: Mapping[tuple[int, int], np.ndarray], jet: MapJet3) -> PhysicalDerivatives:
    """Push reference partials through a chart to physical partials.

    ``ref[(a, b)]`` holds ∂^a_s ∂^b_t of every function at every point with
    shape ``(P, F)``. With ``K = J⁻¹`` the expansion is

        ∇u   = Kᵀ ∇̂û
        D²u  = Kᵀ (∂̂²û − ∂_i u H_i) K
        D³u  = K⊗K⊗K : (∂̂³û − Σ_sym D²u_ij H_i J_j − ∂_i u T_i)

    where ``H`` and ``T`` are the second and third jets of the chart and the
    symmetric sum runs over the three ways to split the index triple.
    """
    jacobian, hessian, third = jet.jacobian, jet.hessian, jet.third
    det = np.linalg.det(jacobian)
    scale = np.max(np.abs(jacobian), axis=(-2, -1)) ** 2
    if np.any(np.abs(det) <= _DET_TOL * np.maximum(scale, 1.0)):
        raise DegenerateChartError("degenerate_chart: singular jacobian")
    inverse = np.linalg.inv(jacobian)

    g1 = _reference_tensor(ref, 1)
    g2 = _reference_tensor(ref, 2)
    g3 = _reference_tensor(ref, 3)

    grad = np.einsum("pai,pfa->pfi", inverse, g1)
    second_ref = g2 - np.einsum("pfi,piab->pfab", grad, hessian)
    hess = np.einsum("pai,pbj,pfab->pfij", inverse, inverse, second_ref, optimize=True)

    cross = np.einsum("pfij,piab,pjc->pfabc", hess, hessian, jacobian, optimize=True)
    third_ref = (
        g3
        - cross
        - np.transpose(cross, (0, 1, 2, 4, 3))
        - np.transpose(cross, (0, 1, 4, 2, 3))
        - np.einsum("pfi,piabc->pfabc", grad, third)
    )
    third_phys = np.einsum(
        "pai,pbj,pck,pfabc->pfijk", inverse, inverse, inverse, third_ref, optimize=True
    )
    return PhysicalDerivatives(value=np.asarray(ref[(0, 0)]), gradient=grad, hessian=hess, third=third_phys)


@dataclass(frozen=True)
class AssembledPencil:
    """Form and mass matrices restricted to the free coefficients of ``space``."""

    Q: np.ndarray
    M: np.ndarray
    dof_map: np.ndarray
    space: TensorSplineSpace
    spec: FormSpec

    @property
    def size(self) -> int:
        return int(self.Q.shape[0])

    def expand(self, free_vector: np.ndarray) -> np.ndarray:
        """Scatter a free-coefficient vector to the full coefficient layout."""
        full = np.zeros(self.space.n_dofs)
        full[self.dof_map] = free_vector
        return full


def _tensor_reference(tab_x: np.ndarray, tab_y: np.ndarray, ex: int, ey: int) -> dict[tuple[int, int], np.ndarray]:
    nq = tab_x.shape[2] * tab_y.shape[2]
    ref = {}
    for a in range(MAX_BASIS_ORDER + 1):
        for b in range(MAX_BASIS_ORDER + 1 - a):
            block = np.einsum("ip,jq->ijpq", tab_x[a, ex], tab_y[b, ey])
            ref[(a, b)] = block.reshape(nq, -1)
    return ref


def _scatter(rows: list[np.ndarray], cols: list[np.ndarray], vals: list[np.ndarray], size: int) -> sparse.csr_matrix:
    if not vals:
        return sparse.csr_matrix((size, size))
    return sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(size, size)
    ).tocsr()


def _boundary_normal_term(
    space: TensorSplineSpace, domain: ChartDomain, quad: QuadratureRule, k1: float
) -> sparse.csr_matrix:
    """K1 ∫_Γ ∂_N u ∂_N v on the top side t = 1, one Gauss rule per x-span."""

    sup_x, tab_x = element_tables(space.sx, quad.x, 1)
    top = space.sy.basis_raw(np.array([1.0]), 0)[0]
    dtop = space.sy.basis_raw(np.array([1.0]), 1)[0]
    active_y = np.flatnonzero((top != 0.0) | (dtop != 0.0))
    raw_ny = space.sy.raw_dim
    rows, cols, vals = [], [], []
    for ex in range(space.sx.n_elements):
        s = quad.x.points[ex]
        points = np.stack([s, np.ones_like(s)], axis=-1)
        jet = domain.chart(points)
        ref = {
            (1, 0): np.einsum("qf,g->qfg", tab_x[1, ex], top[active_y]).reshape(len(s), -1),
            (0, 1): np.einsum("qf,g->qfg", tab_x[0, ex], dtop[active_y]).reshape(len(s), -1),
        }
        inverse = np.linalg.inv(jet.jacobian)
        grad = np.einsum("pai,pfa->pfi", inverse, np.stack([ref[(1, 0)], ref[(0, 1)]], axis=-1))
        normal = grad[..., 1]
        line = quad.x.weights[ex] * np.linalg.norm(jet.jacobian[..., :, 0], axis=-1)
        local = k1 * np.einsum("pf,pg,p->fg", normal, normal, line)
        idx = (sup_x[ex][:, None] * raw_ny + active_y[None, :]).ravel()
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        vals.append(local.ravel())
    return _scatter(rows, cols, vals, space.sx.raw_dim * raw_ny)


def energy_matrices(
    space: TensorSplineSpace, domain: ChartDomain, quad: QuadratureRule | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Unconstrained ``∫ D³u : D³v`` and ``∫ uv`` on the full coefficient layout.

    Elements are visited in a fixed (x-major) order and their contributions
    are summed through one COO matrix, so repeated runs are bit-identical.
    """
    quad = quad or build_quadrature(space)
    sup_x, tab_x = element_tables(space.sx, quad.x)
    sup_y, tab_y = element_tables(space.sy, quad.y)
    raw_ny = space.sy.raw_dim
    raw_size = space.sx.raw_dim * raw_ny

    rows: list[np.ndarray] = []
    cols: list[np.ndarray] = []
    stiff: list[np.ndarray] = []
    mass: list[np.ndarray] = []
    for ex, ey in space.elements():
        points, weights = quad.element(ex, ey)
        jet = domain.chart(points)
        ref = _tensor_reference(tab_x, tab_y, ex, ey)
        phys = physical_third_derivatives(ref, jet)
        dx = weights * np.abs(jet.determinant())
        d3 = phys.third.reshape(phys.third.shape[:2] + (-1,))
        local_s = np.einsum("qfk,qgk,q->fg", d3, d3, dx, optimize=True)
        local_m = np.einsum("qf,qg,q->fg", phys.value, phys.value, dx)
        idx = (sup_x[ex][:, None] * raw_ny + sup_y[ey][None, :]).ravel()
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        stiff.append(local_s.ravel())
        mass.append(local_m.ravel())

    extraction = space.extraction()
    stiffness = (extraction.T @ _scatter(rows, cols, stiff, raw_size) @ extraction).toarray()
    mass_full = (extraction.T @ _scatter(rows, cols, mass, raw_size) @ extraction).toarray()
    return 0.5 * (stiffness + stiffness.T), 0.5 * (mass_full + mass_full.T)


def assemble(
    space: TensorSplineSpace,
    domain: ChartDomain,
    spec: FormSpec,
    quad: QuadratureRule | None = None,
    *,
    settings: Settings | None = None,
) -> AssembledPencil:
    """Assemble ``Q`` and ``M`` over the free coefficients of ``space``."""

    settings = settings or get_settings()
    _check_mask(space, spec)
    _check_domain_kind(domain, spec)
    if space.n_free > settings.MAX_FREE_DOFS:
        raise ProblemTooLargeError(f"too_many_dofs:{space.n_free}>{settings.MAX_FREE_DOFS}")

    started = time.perf_counter()
    quad = quad or build_quadrature(space)
    stiffness, mass = energy_matrices(space, domain, quad)
    if spec.bc_family == "strange" and spec.k1 > 0.0:
        extraction = space.extraction()
        boundary = (extraction.T @ _boundary_normal_term(space, domain, quad, spec.k1) @ extraction).toarray()
        stiffness = stiffness + 0.5 * (boundary + boundary.T)

    free = space.free_dofs
    form = stiffness[np.ix_(free, free)] + mass[np.ix_(free, free)]
    logger.info(
        "assembled %s/%s pencil: %d free dofs, %d elements in %.2fs",
        spec.domain_kind,
        spec.bc_family,
        len(free),
        space.sx.n_elements * space.sy.n_elements,
        time.perf_counter() - started,
    )
    return AssembledPencil(Q=form, M=mass[np.ix_(free, free)], dof_map=free, space=space, spec=spec)


def energy_factor_1d(
    space: SplineSpace1D,
    bc_family: Literal["wbc", "sbc", "dbc"],
    interval: tuple[float, float] = (-1.0, 0.0),
    points_per_span: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Quadrature factor ``F`` with ``FᵀF = ∫ u‴v‴`` and the mass ``∫ uv``.

    Rows of ``F`` are third derivatives at the Gauss points weighted by the
    square roots of the quadrature weights. Both ends carry the family's
    layer count (1, 2 or 3 layers); columns are the free functions.
    """
    layers = BC_TOP_LAYERS[bc_family]
    length = interval[1] - interval[0]
    rule = gauss_rule_1d(space.breakpoints, points_per_span or space.degree + 3)
    points = rule.points.ravel()
    root = np.sqrt(rule.weights.ravel() * length)[:, None]
    free = np.arange(layers, space.dim - layers)
    factor = root * space.basis(points, 3)[:, free] / length**3
    values = root * space.basis(points)[:, free]
    mass = values.T @ values
    return factor, 0.5 * (mass + mass.T)


def assemble_1d(
    space: SplineSpace1D,
    bc_family: Literal["wbc", "sbc", "dbc"],
    interval: tuple[float, float] = (-1.0, 0.0),
    points_per_span: int | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """``∫ u‴v‴ + uv`` and ``∫ uv`` on an interval, constrained at both ends."""

    factor, mass = energy_factor_1d(space, bc_family, interval, points_per_span)
    form = factor.T @ factor + mass
    return 0.5 * (form + form.T), mass


def physical_jets(domain: ChartDomain, space: TensorSplineSpace, coefficients: np.ndarray, x: np.ndarray) -> PhysicalDerivatives:
    """Physical partials (to order three) of a spline field at physical points ``x``."""

    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, 2)
    st = np.clip(domain.inverse_chart(flat), 0.0, 1.0)
    ref = {
        (a, b): evaluate(space, coefficients, st, (a, b))[:, None]
        for a in range(MAX_BASIS_ORDER + 1)
        for b in range(MAX_BASIS_ORDER + 1 - a)
    }
    phys = physical_third_derivatives(ref, domain.chart(st))
    return PhysicalDerivatives(
        value=phys.value[:, 0].reshape(x.shape[:-1]),
        gradient=phys.gradient[:, 0].reshape(x.shape[:-1] + (2,)),
        hessian=phys.hessian[:, 0].reshape(x.shape[:-1] + (2, 2)),
        third=phys.third[:, 0].reshape(x.shape[:-1] + (2, 2, 2)),
    )


def spline_sampler(domain: ChartDomain, space: TensorSplineSpace, coefficients: np.ndarray) -> Callable[[np.ndarray], np.ndarray]:
    """Callable ``x ↦ u(x)`` for a spline field given by full coefficients."""

    def sample(x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        st = np.clip(domain.inverse_chart(x.reshape(-1, 2)), 0.0, 1.0)
        return evaluate(space, coefficients, st).reshape(x.shape[:-1])

    return sample


@dataclass(frozen=True, slots=True)
class PullbackResult:
    coefficients: np.ndarray
    condition: float
    well_conditioned: bool


def pullback_T(
    domain: OscillatingDomain,
    flat_field: Callable[[np.ndarray], np.ndarray],
    target: TensorSplineSpace,
    quad: QuadratureRule | None = None,
) -> PullbackResult:
    """L² projection of ``u ∘ Φ_ε`` onto the free coefficients of ``target``.

    ``flat_field`` samples ``u`` at points of Ω̄ (shape ``(..., 2)``); the
    returned coefficients are full-layout (constrained entries zero).
    """
    quad = quad or build_quadrature(target)
    sup_x, tab_x = element_tables(target.sx, quad.x, 0)
    sup_y, tab_y = element_tables(target.sy, quad.y, 0)
    raw_ny = target.sy.raw_dim
    raw_size = target.sx.raw_dim * raw_ny
    rows, cols, mass = [], [], []
    rhs_raw = np.zeros(raw_size)
    for ex, ey in target.elements():
        points, weights = quad.element(ex, ey)
        jet = domain.chart(points)
        dx = weights * np.abs(jet.determinant())
        phi = eval_phi(domain, jet.value).value
        phi[..., 1] = np.minimum(phi[..., 1], 0.0)
        sampled = flat_field(phi)
        values = np.einsum("ip,jq->ijpq", tab_x[0, ex], tab_y[0, ey]).reshape(len(dx), -1)
        idx = (sup_x[ex][:, None] * raw_ny + sup_y[ey][None, :]).ravel()
        rows.append(np.repeat(idx, len(idx)))
        cols.append(np.tile(idx, len(idx)))
        mass.append(np.einsum("qf,qg,q->fg", values, values, dx).ravel())
        np.add.at(rhs_raw, idx, values.T @ (dx * sampled))

    extraction = target.extraction()
    free = target.free_dofs
    mass_free = (extraction.T @ _scatter(rows, cols, mass, raw_size) @ extraction).toarray()[np.ix_(free, free)]
    rhs = (extraction.T @ rhs_raw)[free]
    condition = float(np.linalg.cond(mass_free))
    well_conditioned = condition < _ILL_CONDITIONED
    if not well_conditioned:
        logger.warning("pullback projection ill-conditioned: cond=%.3e", condition)
    coefficients = np.zeros(target.n_dofs)
    coefficients[free] = np.linalg.solve(mass_free, rhs)
    return PullbackResult(coefficients=coefficients, condition=condition, well_conditioned=well_conditioned)

