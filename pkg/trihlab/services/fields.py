"""Planar scalar fields with exact partial derivatives.

Separable products of trigonometric and polynomial factors differentiate
exactly to any order and are the test corpus for the Green formula, the
unfolding identities and the pullback. ``SplineField`` wraps a spline
coefficient vector on a charted domain and supplies partials to order three.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np
from numpy.polynomial import Polynomial

from .forms import physical_jets
from .geometry import ChartDomain
from .spline import TensorSplineSpace

__all__ = [
    "Field",
    "FieldSum",
    "Poly",
    "SeparableField",
    "SplineField",
    "Trig",
    "monomial",
]

UNLIMITED = 10**6


class Factor(Protocol):
    def __call__(self, x: np.ndarray, order: int = 0) -> np.ndarray: ...


class Field(Protocol):
    """A planar field that can report ∂^a_x̄ ∂^b_{x_N} at points ``(..., 2)``."""

    max_order: int

    def derivative(self, x: np.ndarray, a: int, b: int) -> np.ndarray: ...

    def __call__(self, x: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True)
class Trig:
    """``amplitude · cos(frequency · x + phase)``; use ``phase = −π/2`` for a sine."""

    frequency: float
    phase: float = 0.0
    amplitude: float = 1.0

    @classmethod
    def sin(cls, frequency: float, amplitude: float = 1.0) -> "Trig":
        return cls(frequency=frequency, phase=-math.pi / 2.0, amplitude=amplitude)

    def __call__(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        shift = self.phase + order * math.pi / 2.0
        return self.amplitude * self.frequency**order * np.cos(self.frequency * x + shift)


@dataclass(frozen=True)
class Poly:
    """Polynomial factor from ascending coefficients."""

    coefficients: tuple[float, ...]

    def __call__(self, x: np.ndarray, order: int = 0) -> np.ndarray:
        poly = Polynomial(self.coefficients)
        if order:
            poly = poly.deriv(order)
        return poly(np.asarray(x, dtype=float))


@dataclass(frozen=True)
class SeparableField:
    """``scale · fx(x̄) · fy(x_N)``."""

    fx: Factor
    fy: Factor
    scale: float = 1.0
    max_order: int = UNLIMITED

    def derivative(self, x: np.ndarray, a: int, b: int) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return self.scale * self.fx(x[..., 0], a) * self.fy(x[..., 1], b)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.derivative(x, 0, 0)

    def __add__(self, other: "Field") -> "FieldSum":
        return FieldSum((self, other))


@dataclass(frozen=True)
class FieldSum:
    terms: tuple[Field, ...]

    @property
    def max_order(self) -> int:
        return min(term.max_order for term in self.terms)

    def derivative(self, x: np.ndarray, a: int, b: int) -> np.ndarray:
        return sum(term.derivative(x, a, b) for term in self.terms)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.derivative(x, 0, 0)

    def __add__(self, other: Field) -> "FieldSum":
        return FieldSum(self.terms + (other,))


def monomial(px: int, py: int, scale: float = 1.0) -> SeparableField:
    """``scale · x̄^px · x_N^py``."""

    fx = Poly(tuple([0.0] * px + [1.0]))
    fy = Poly(tuple([0.0] * py + [1.0]))
    return SeparableField(fx, fy, scale)


class SplineField:
    """Spline coefficients on a charted domain, sampled at physical points."""

    max_order = 3

    def __init__(self, domain: ChartDomain, space: TensorSplineSpace, coefficients: Sequence[float]) -> None:
        self.domain = domain
        self.space = space
        self.coefficients = np.asarray(coefficients, dtype=float)

    def derivative(self, x: np.ndarray, a: int, b: int) -> np.ndarray:
        if a + b > self.max_order:
            raise ValueError(f"spline fields carry partials up to order {self.max_order}")
        jets = physical_jets(self.domain, self.space, self.coefficients, x)
        order = a + b
        if order == 0:
            return jets.value
        tensor = (jets.gradient, jets.hessian, jets.third)[order - 1]
        index = (0,) * a + (1,) * b
        return tensor[(Ellipsis,) + index]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.derivative(x, 0, 0)
