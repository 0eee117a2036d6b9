"""Boundary profiles, oscillating domains and the maps between them.

All domains are two dimensional. The oscillating domain is

    Ω_ε = {(x̄, x_N) : x̄ ∈ W, −1 < x_N < g_ε(x̄)},   g_ε(x̄) = ε^α b(x̄/ε),

and the flat limit domain Ω = W × (−1, 0) is the same graph with g ≡ 0.
Every evaluation below is vectorised over leading array axes and pure.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Protocol, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from ..constants import MAX_JET_ORDER, POSITIVITY_MARGIN, POSITIVITY_SAMPLES

__all__ = [
    "Box",
    "ChartDomain",
    "FlatDomain",
    "MapJet3",
    "OscillatingDomain",
    "OutsideDomainError",
    "PeriodicProfile",
    "UnsupportedOrderError",
    "chart",
    "eval_g",
    "eval_h",
    "eval_phi",
    "eval_profile",
    "h_derivative_maxima",
    "inverse_chart",
    "whole_cells",
]

_TOL = 1e-12
_MAX_PROFILE_ORDER = 4


class UnsupportedOrderError(ValueError):
    """Raised when a derivative order beyond the supported range is requested."""


class OutsideDomainError(ValueError):
    """Raised when a point lies outside the closure of the evaluated domain."""


class PeriodicProfile(BaseModel):
    """Positive trigonometric polynomial with period Y = (−1/2, 1/2).

    ``b(ȳ) = offset + Σ a_k cos(2πkȳ) + c_k sin(2πkȳ)`` with ``modes`` holding
    ``(k, a_k, c_k)`` triples.
    """

    model_config = ConfigDict(frozen=True)

    offset: float = 0.0
    modes: tuple[tuple[int, float, float], ...] = Field(default_factory=tuple)

    @field_validator("modes", mode="before")
    @classmethod
    def _coerce_modes(cls, value: Any) -> Any:
        if value is None:
            return ()
        items = []
        for entry in value:
            frequency, cos_amp, sin_amp = entry
            if float(frequency) != int(frequency) or int(frequency) < 0:
                raise ValueError(f"mode frequency must be a non-negative integer, got {frequency!r}")
            items.append((int(frequency), float(cos_amp), float(sin_amp)))
        return tuple(items)

    @model_validator(mode="after")
    def _check_positive(self) -> "PeriodicProfile":
        samples = np.linspace(-0.5, 0.5, POSITIVITY_SAMPLES, endpoint=False)
        minimum = float(np.min(self.evaluate(samples)))
        if minimum <= POSITIVITY_MARGIN:
            raise ValueError(f"profile_not_positive: sampled minimum {minimum:.3e}")
        return self

    @classmethod
    def constant(cls, value: float) -> "PeriodicProfile":
        return cls(offset=value, modes=())

    @classmethod
    def figure_profile(cls) -> "PeriodicProfile":
        """b(y) = 10 + 2 sin(2πy), the unit-period form of 10 + 2 sin(πy/5)."""
        return cls(offset=10.0, modes=((1, 0.0, 2.0),))

    @property
    def max_frequency(self) -> int:
        active = [k for k, a, c in self.modes if k > 0 and (a != 0.0 or c != 0.0)]
        return max(active, default=0)

    @property
    def is_constant(self) -> bool:
        return self.max_frequency == 0

    def evaluate(self, ybar: Any, order: int = 0) -> np.ndarray:
        ybar = np.asarray(ybar, dtype=float)
        result = np.full(ybar.shape, self.offset if order == 0 else 0.0)
        shift = order * math.pi / 2.0
        for frequency, cos_amp, sin_amp in self.modes:
            omega = 2.0 * math.pi * frequency
            scale = omega**order
            if scale == 0.0:
                continue
            phase = omega * ybar + shift
            result = result + scale * (cos_amp * np.cos(phase) + sin_amp * np.sin(phase))
        return result

    def scaled(self, factor: float) -> "PeriodicProfile":
        return PeriodicProfile(
            offset=factor * self.offset,
            modes=tuple((k, factor * a, factor * c) for k, a, c in self.modes),
        )

    def shifted(self, shift: float) -> "PeriodicProfile":
        """Return ȳ ↦ b(ȳ + shift)."""
        modes = []
        for k, a, c in self.modes:
            angle = 2.0 * math.pi * k * shift
            cos_s, sin_s = math.cos(angle), math.sin(angle)
            modes.append((k, a * cos_s + c * sin_s, c * cos_s - a * sin_s))
        return PeriodicProfile(offset=self.offset, modes=tuple(modes))


def eval_profile(profile: PeriodicProfile, ybar: Any, order: int = 0) -> np.ndarray:
    """Return the ``order``-th derivative of ``b`` at ``ybar``."""

    if order < 0 or order > _MAX_PROFILE_ORDER:
        raise UnsupportedOrderError(f"unsupported_order:{order}")
    return profile.evaluate(ybar, order)


@dataclass(frozen=True, slots=True)
class MapJet3:
    """Value and derivatives to order three of a planar map.

    ``jacobian[..., i, a] = ∂x_i/∂ξ_a``; higher jets follow the same layout
    with the component index first.
    """

    value: np.ndarray
    jacobian: np.ndarray
    hessian: np.ndarray
    third: np.ndarray

    def determinant(self) -> np.ndarray:
        return np.linalg.det(self.jacobian)


class ChartDomain(Protocol):
    """Anything the assembler can integrate over through a unit-square chart."""

    def chart(self, st: np.ndarray) -> MapJet3: ...

    def inverse_chart(self, x: np.ndarray) -> np.ndarray: ...


def _graph_chart(width: tuple[float, float], top_jets: Sequence[np.ndarray], st: np.ndarray) -> MapJet3:
    s, t = st[..., 0], st[..., 1]
    w0, w1 = width
    length = w1 - w0
    g0, g1, g2, g3 = top_jets
    shape = s.shape

    value = np.stack([w0 + s * length, -1.0 + t * (g0 + 1.0)], axis=-1)

    jacobian = np.zeros(shape + (2, 2))
    jacobian[..., 0, 0] = length
    jacobian[..., 1, 0] = t * g1 * length
    jacobian[..., 1, 1] = g0 + 1.0

    hessian = np.zeros(shape + (2, 2, 2))
    hessian[..., 1, 0, 0] = t * g2 * length**2
    hessian[..., 1, 0, 1] = g1 * length
    hessian[..., 1, 1, 0] = g1 * length

    third = np.zeros(shape + (2, 2, 2, 2))
    third[..., 1, 0, 0, 0] = t * g3 * length**3
    for idx in ((0, 0, 1), (0, 1, 0), (1, 0, 0)):
        third[(Ellipsis, 1) + idx] = g2 * length**2
    return MapJet3(value=value, jacobian=jacobian, hessian=hessian, third=third)


def _check_unit_square(st: np.ndarray) -> None:
    if np.any(st < -_TOL) or np.any(st > 1.0 + _TOL):
        raise OutsideDomainError("reference_point_outside_unit_square")


class _GraphDomain(BaseModel):
    """Shared graph-chart behaviour for Ω and Ω_ε."""

    model_config = ConfigDict(frozen=True)

    width: tuple[float, float] = (0.0, 1.0)

    @field_validator("width")
    @classmethod
    def _ordered(cls, value: tuple[float, float]) -> tuple[float, float]:
        if not value[1] > value[0]:
            raise ValueError("width interval must satisfy w0 < w1")
        return value

    def top(self, xbar: Any, order: int = 0) -> np.ndarray:
        raise NotImplementedError

    def check_xbar(self, xbar: np.ndarray) -> None:
        w0, w1 = self.width
        if np.any(xbar < w0 - _TOL) or np.any(xbar > w1 + _TOL):
            raise OutsideDomainError("xbar_outside_W")

    def check_point(self, x: np.ndarray) -> None:
        xbar, xn = x[..., 0], x[..., 1]
        self.check_xbar(xbar)
        upper = self.top(xbar)
        if np.any(xn < -1.0 - _TOL) or np.any(xn > upper + _TOL):
            raise OutsideDomainError("point_outside_domain")

    def chart(self, st: Any) -> MapJet3:
        st = np.asarray(st, dtype=float)
        _check_unit_square(st)
        w0, w1 = self.width
        xbar = w0 + st[..., 0] * (w1 - w0)
        jets = [self.top(xbar, order) for order in range(4)]
        return _graph_chart(self.width, jets, st)

    def inverse_chart(self, x: Any) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        w0, w1 = self.width
        s = (x[..., 0] - w0) / (w1 - w0)
        t = (x[..., 1] + 1.0) / (self.top(np.clip(x[..., 0], w0, w1)) + 1.0)
        return np.stack([s, t], axis=-1)


class FlatDomain(_GraphDomain):
    """The limit domain Ω = W × (−1, 0); its top side is Γ."""

    def top(self, xbar: Any, order: int = 0) -> np.ndarray:
        return np.zeros(np.shape(xbar))


class OscillatingDomain(_GraphDomain):
    """Ω_ε with top boundary x_N = ε^α b(x̄/ε)."""

    alpha: float = Field(gt=0.0)
    epsilon: float = Field(gt=0.0, le=1.0)
    profile: PeriodicProfile

    def top(self, xbar: Any, order: int = 0) -> np.ndarray:
        eps = self.epsilon
        scale = eps ** (self.alpha - order)
        return scale * self.profile.evaluate(np.asarray(xbar, dtype=float) / eps, order)

    def flat(self) -> FlatDomain:
        return FlatDomain(width=self.width)

    def whole_cells(self) -> np.ndarray:
        return whole_cells(self.width, self.epsilon)


class Box(BaseModel):
    """Axis-aligned rectangle with an affine unit-square chart."""

    model_config = ConfigDict(frozen=True)

    x_range: tuple[float, float]
    y_range: tuple[float, float]

    def chart(self, st: Any) -> MapJet3:
        st = np.asarray(st, dtype=float)
        _check_unit_square(st)
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        shape = st.shape[:-1]
        value = np.stack([x0 + st[..., 0] * (x1 - x0), y0 + st[..., 1] * (y1 - y0)], axis=-1)
        jacobian = np.zeros(shape + (2, 2))
        jacobian[..., 0, 0] = x1 - x0
        jacobian[..., 1, 1] = y1 - y0
        return MapJet3(
            value=value,
            jacobian=jacobian,
            hessian=np.zeros(shape + (2, 2, 2)),
            third=np.zeros(shape + (2, 2, 2, 2)),
        )

    def inverse_chart(self, x: Any) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        (x0, x1), (y0, y1) = self.x_range, self.y_range
        return np.stack([(x[..., 0] - x0) / (x1 - x0), (x[..., 1] - y0) / (y1 - y0)], axis=-1)


def chart(domain: ChartDomain, st: Any) -> MapJet3:
    """Reference-to-physical chart of ``domain`` with jets to order three."""

    return domain.chart(np.asarray(st, dtype=float))


def inverse_chart(domain: ChartDomain, x: Any) -> np.ndarray:
    return domain.inverse_chart(np.asarray(x, dtype=float))


def eval_g(domain: _GraphDomain, xbar: Any, order: int = 0) -> np.ndarray:
    """Top boundary height g_ε(x̄) (or its ``order``-th derivative)."""

    xbar = np.asarray(xbar, dtype=float)
    domain.check_xbar(xbar)
    return domain.top(xbar, order)


def _h_partials(domain: _GraphDomain, xbar: np.ndarray, xn: np.ndarray, order: int) -> dict[tuple[int, int], np.ndarray]:
    """Mixed partials ∂^a_x̄ ∂^b_{x_N} h_ε for a + b ≤ order.

    Above x_N = −ε, h_ε = F(x̄)·s⁴ with s = x_N + ε and F = f∘g, f(g) = g/(g+ε)⁴,
    so the partials separate into derivatives of F times derivatives of s⁴.
    """
    eps = getattr(domain, "epsilon", 0.0)
    g = [domain.top(xbar, k) for k in range(order + 1)] + [np.zeros_like(xbar)] * (3 - order)
    denom = g[0] + eps
    f = [
        g[0] / denom**4,
        (eps - 3.0 * g[0]) / denom**5,
        (12.0 * g[0] - 8.0 * eps) / denom**6,
        60.0 * (eps - g[0]) / denom**7,
    ]
    composed = [
        f[0],
        f[1] * g[1],
        f[2] * g[1] ** 2 + f[1] * g[2],
        f[3] * g[1] ** 3 + 3.0 * f[2] * g[1] * g[2] + f[1] * g[3],
    ]
    s = np.maximum(xn + eps, 0.0)
    powers = [s**4, 4.0 * s**3, 12.0 * s**2, 24.0 * s]
    partials: dict[tuple[int, int], np.ndarray] = {}
    for a in range(order + 1):
        for b in range(order + 1 - a):
            partials[(a, b)] = composed[a] * powers[b]
    return partials


def _symmetric_tensor(partials: dict[tuple[int, int], np.ndarray], order: int, shape: tuple[int, ...]) -> np.ndarray:
    out = np.zeros(shape + (2,) * order)
    for idx in itertools.product(range(2), repeat=order):
        b = sum(idx)
        out[(Ellipsis,) + idx] = partials[(order - b, b)]
    return out


def eval_h(domain: OscillatingDomain, x: Any, order: int = 0) -> np.ndarray:
    """The ``order``-th derivative tensor of h_ε at ``x`` (shape ``(..., 2, ..., 2)``)."""

    if order < 0 or order > MAX_JET_ORDER:
        raise UnsupportedOrderError(f"unsupported_order:{order}")
    x = np.asarray(x, dtype=float)
    domain.check_point(x)
    partials = _h_partials(domain, x[..., 0], x[..., 1], order)
    return _symmetric_tensor(partials, order, x.shape[:-1])


def eval_phi(domain: OscillatingDomain, x: Any) -> MapJet3:
    """Φ_ε(x̄, x_N) = (x̄, x_N − h_ε(x̄, x_N)) with jets to order three."""

    x = np.asarray(x, dtype=float)
    domain.check_point(x)
    shape = x.shape[:-1]
    partials = _h_partials(domain, x[..., 0], x[..., 1], MAX_JET_ORDER)

    value = np.stack([x[..., 0], x[..., 1] - partials[(0, 0)]], axis=-1)
    jacobian = np.zeros(shape + (2, 2))
    jacobian[..., 0, 0] = 1.0
    jacobian[..., 1, 1] = 1.0
    jacobian[..., 1, :] -= _symmetric_tensor(partials, 1, shape)
    hessian = np.zeros(shape + (2, 2, 2))
    hessian[..., 1, :, :] = -_symmetric_tensor(partials, 2, shape)
    third = np.zeros(shape + (2, 2, 2, 2))
    third[..., 1, :, :, :] = -_symmetric_tensor(partials, 3, shape)
    return MapJet3(value=value, jacobian=jacobian, hessian=hessian, third=third)


def h_derivative_maxima(domain: OscillatingDomain, grid: int = 200) -> np.ndarray:
    """Grid maxima of the Frobenius norm of D^l h_ε, l = 0..3.

    The grid covers the support layer −ε ≤ x_N ≤ g_ε(x̄) with ``grid`` points
    in each direction.
    """
    w0, w1 = domain.width
    xbar = np.linspace(w0, w1, grid)
    tau = np.linspace(0.0, 1.0, grid)
    xb, tt = np.meshgrid(xbar, tau, indexing="ij")
    top = domain.top(xb)
    xn = -domain.epsilon + tt * (top + domain.epsilon)
    partials = _h_partials(domain, xb, xn, MAX_JET_ORDER)
    maxima = np.zeros(4)
    for order in range(4):
        tensor = _symmetric_tensor(partials, order, xb.shape)
        norms = np.sqrt(np.sum(tensor.reshape(xb.shape + (-1,)) ** 2, axis=-1))
        maxima[order] = float(np.max(norms))
    return maxima


def whole_cells(width: tuple[float, float], epsilon: float) -> np.ndarray:
    """Indices k whose cell C^k_ε = εk + εY lies inside W."""

    w0, w1 = width
    first = math.ceil(w0 / epsilon + 0.5 - _TOL)
    last = math.floor(w1 / epsilon - 0.5 + _TOL)
    return np.arange(first, last + 1)
