"""Assembly of the triharmonic form and mass matrices."""
from __future__ import annotations

import itertools
from types import SimpleNamespace

import numpy as np
import pytest
from pydantic import ValidationError
from scipy.integrate import simpson

from trihlab.config import Settings
from trihlab.services import forms as forms_module
from trihlab.services.forms import (
    FormSpec,
    InconsistentMaskError,
    ProblemTooLargeError,
    assemble,
    assemble_1d,
    constrained_space,
    energy_factor_1d,
    energy_matrices,
    physical_third_derivatives,
    pullback_T,
    spline_sampler,
)
from trihlab.services.geometry import FlatDomain, MapJet3, OscillatingDomain, PeriodicProfile, eval_phi
from trihlab.services.spline import clamped_space, evaluate, project, tensor_space

FLAT = FlatDomain(width=(0.0, 1.0))


def _raw(elements: int = 4, degree: int = 5):
    return tensor_space(clamped_space(elements, degree), clamped_space(elements, degree))


def _oscillating(profile: PeriodicProfile, epsilon: float = 0.25) -> OscillatingDomain:
    return OscillatingDomain(width=(0.0, 1.0), alpha=2.5, epsilon=epsilon, profile=profile)


def test_energy_of_cubic_monomials_on_the_flat_domain() -> None:
    space = _raw()
    stiffness, mass = energy_matrices(space, FLAT)

    cubic = project(space, lambda s, t: s**3)
    assert cubic @ stiffness @ cubic == pytest.approx(36.0, rel=1e-10)
    assert cubic @ mass @ cubic == pytest.approx(1.0 / 7.0, rel=1e-10)

    # x²y: the mixed partial appears three times in D³u.
    mixed = project(space, lambda s, t: s**2 * (t - 1.0))
    assert mixed @ stiffness @ mixed == pytest.approx(12.0, rel=1e-10)
    assert mixed @ mass @ mixed == pytest.approx(1.0 / 15.0, rel=1e-10)


def test_oscillating_mass_of_one_is_the_area() -> None:
    profile = PeriodicProfile.constant(1.5)
    domain = _oscillating(profile)
    space = _raw(elements=8)
    stiffness, mass = energy_matrices(space, domain)
    ones = np.ones(space.n_dofs)
    area = 1.0 + domain.epsilon**domain.alpha * 1.5
    assert ones @ mass @ ones == pytest.approx(area, rel=1e-12)
    assert abs(ones @ stiffness @ ones) <= 1e-12 * np.abs(stiffness).sum()


def test_matrices_are_symmetric_and_mass_is_positive_definite() -> None:
    spec = FormSpec(domain_kind="oscillating", bc_family="sbc")
    domain = _oscillating(PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)]))
    pencil = assemble(constrained_space(_raw(elements=8), spec), domain, spec)
    assert np.array_equal(pencil.Q, pencil.Q.T)
    assert np.array_equal(pencil.M, pencil.M.T)
    assert np.all(np.linalg.eigvalsh(pencil.M) > 0.0)
    assert pencil.size == pencil.space.n_free


def test_mask_and_domain_kind_must_match() -> None:
    wbc = FormSpec(bc_family="wbc")
    sbc = FormSpec(bc_family="sbc")
    space = constrained_space(_raw(), wbc)
    with pytest.raises(InconsistentMaskError):
        assemble(space, FLAT, sbc)
    with pytest.raises(InconsistentMaskError):
        assemble(space, _oscillating(PeriodicProfile.constant(1.5)), wbc)


def test_strange_term_is_flat_only() -> None:
    with pytest.raises(ValidationError):
        FormSpec(domain_kind="oscillating", bc_family="strange", k1=1.0)
    with pytest.raises(ValidationError):
        FormSpec(bc_family="strange", k1=-1.0)


def test_dof_cap_is_enforced() -> None:
    spec = FormSpec()
    with pytest.raises(ProblemTooLargeError, match="too_many_dofs"):
        assemble(constrained_space(_raw(), spec), FLAT, spec, settings=Settings(MAX_FREE_DOFS=10))


def test_strange_term_is_linear_in_k1() -> None:
    base = constrained_space(_raw(), FormSpec(bc_family="strange"))
    forms = {k1: assemble(base, FLAT, FormSpec(bc_family="strange", k1=k1)).Q for k1 in (0.0, 1.0, 2.0)}
    wbc = assemble(base.with_tag("wbc"), FLAT, FormSpec(bc_family="wbc")).Q
    assert np.array_equal(forms[0.0], wbc)
    penalty = forms[1.0] - forms[0.0]
    assert np.allclose(forms[2.0] - forms[0.0], 2.0 * penalty, atol=1e-10 * np.max(np.abs(penalty)))
    assert np.min(np.linalg.eigvalsh(penalty)) >= -1e-10 * np.max(np.abs(penalty))


def test_assembly_is_deterministic() -> None:
    spec = FormSpec(domain_kind="oscillating")
    domain = _oscillating(PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)]))
    space = constrained_space(_raw(elements=8), spec)
    first = assemble(space, domain, spec)
    second = assemble(space, domain, spec)
    assert np.array_equal(first.Q, second.Q) and np.array_equal(first.M, second.M)


def test_expand_scatters_to_the_free_layout() -> None:
    spec = FormSpec(bc_family="dbc")
    pencil = assemble(constrained_space(_raw(), spec), FLAT, spec)
    full = pencil.expand(np.arange(pencil.size, dtype=float) + 1.0)
    assert np.all(full[pencil.space.mask.ravel()] == 0.0)
    assert np.count_nonzero(full) == pencil.size


@pytest.mark.parametrize("family, layers", [("wbc", 1), ("sbc", 2), ("dbc", 3)])
def test_interval_forms_drop_layers_at_both_ends(family: str, layers: int) -> None:
    space = clamped_space(16, 5)
    form, mass = assemble_1d(space, family)  # type: ignore[arg-type]
    assert form.shape == (space.dim - 2 * layers,) * 2
    assert np.array_equal(form, form.T) and np.array_equal(mass, mass.T)


def test_pullback_reproduces_constants() -> None:
    domain = _oscillating(PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)]))
    target = _raw(elements=8)
    result = pullback_T(domain, lambda x: np.ones(x.shape[:-1]), target)
    assert result.well_conditioned
    rng = np.random.default_rng(11)
    st = rng.uniform(0.0, 1.0, (50, 2))
    assert np.max(np.abs(evaluate(target, result.coefficients, st) - 1.0)) <= 1e-10


def test_spline_sampler_matches_projected_field() -> None:
    space = _raw()
    coefficients = project(space, lambda s, t: s * (t - 1.0) ** 2)
    sample = spline_sampler(FLAT, space, coefficients)
    x = np.array([[0.25, -0.5], [0.8, -0.1]])
    assert np.allclose(sample(x), x[:, 0] * x[:, 1] ** 2, atol=1e-12)


def _wavy_chart(coeffs: np.ndarray, st: np.ndarray) -> MapJet3:
    """(s + a sin t + b s²t + e s³, t + c cos s + d s t² + f t³) with exact jets."""
    a, b, c, d, e, f = coeffs
    s, t = st[:, 0], st[:, 1]
    zero, one = np.zeros_like(s), np.ones_like(s)
    partials = [
        {
            (1, 0): 1.0 + 2.0 * b * s * t + 3.0 * e * s**2,
            (0, 1): a * np.cos(t) + b * s**2,
            (2, 0): 2.0 * b * t + 6.0 * e * s,
            (1, 1): 2.0 * b * s,
            (0, 2): -a * np.sin(t),
            (3, 0): 6.0 * e * one,
            (2, 1): 2.0 * b * one,
            (1, 2): zero,
            (0, 3): -a * np.cos(t),
        },
        {
            (1, 0): -c * np.sin(s) + d * t**2,
            (0, 1): 1.0 + 2.0 * d * s * t + 3.0 * f * t**2,
            (2, 0): -c * np.cos(s),
            (1, 1): 2.0 * d * t,
            (0, 2): 2.0 * d * s + 6.0 * f * t,
            (3, 0): c * np.sin(s),
            (2, 1): zero,
            (1, 2): 2.0 * d * one,
            (0, 3): 6.0 * f * one,
        },
    ]
    value = np.stack(
        [s + a * np.sin(t) + b * s**2 * t + e * s**3, t + c * np.cos(s) + d * s * t**2 + f * t**3], axis=-1
    )
    tensors = []
    for order in (1, 2, 3):
        out = np.zeros(s.shape + (2,) + (2,) * order)
        for i in range(2):
            for idx in itertools.product(range(2), repeat=order):
                out[(Ellipsis, i) + idx] = partials[i][(order - sum(idx), sum(idx))]
        tensors.append(out)
    return MapJet3(value=value, jacobian=tensors[0], hessian=tensors[1], third=tensors[2])


def _smooth_field(x: np.ndarray) -> np.ndarray:
    return np.sin(x[..., 0]) * np.exp(0.5 * x[..., 1]) + x[..., 0] ** 2 * x[..., 1]


def _smooth_field_third(x: np.ndarray) -> np.ndarray:
    sin, cos, grow = np.sin(x[:, 0]), np.cos(x[:, 0]), np.exp(0.5 * x[:, 1])
    by_y_count = [-cos * grow, -0.5 * sin * grow + 2.0, 0.25 * cos * grow, 0.125 * sin * grow]
    out = np.zeros((len(x), 2, 2, 2))
    for idx in itertools.product(range(2), repeat=3):
        out[(slice(None),) + idx] = by_y_count[sum(idx)]
    return out


# Central difference stencils for orders 0..3 as (offsets, weights).
_STENCILS = [
    (np.array([0.0]), np.array([1.0])),
    (np.array([-1.0, 1.0]), np.array([-0.5, 0.5])),
    (np.array([-1.0, 0.0, 1.0]), np.array([1.0, -2.0, 1.0])),
    (np.array([-2.0, -1.0, 1.0, 2.0]), np.array([-0.5, 1.0, -1.0, 0.5])),
]


def test_third_derivatives_through_a_curved_chart_match_finite_differences() -> None:
    rng = np.random.default_rng(5)
    coeffs = rng.uniform(-0.1, 0.1, 6)
    st = rng.uniform(0.2, 0.8, (20, 2))
    step = 1e-3

    def composed(points: np.ndarray) -> np.ndarray:
        return _smooth_field(_wavy_chart(coeffs, points).value)

    ref = {}
    for a in range(4):
        for b in range(4 - a):
            total = np.zeros(len(st))
            for ds, ws in zip(*_STENCILS[a]):
                for dt, wt in zip(*_STENCILS[b]):
                    total += ws * wt * composed(st + step * np.array([ds, dt]))
            ref[(a, b)] = (total / step ** (a + b))[:, None]

    jet = _wavy_chart(coeffs, st)
    third = physical_third_derivatives(ref, jet).third[:, 0]
    exact = _smooth_field_third(jet.value)
    scale = np.max(np.abs(exact), axis=(1, 2, 3))
    assert np.max(np.abs(third - exact).reshape(len(st), -1).max(axis=1) / scale) <= 1e-5


def test_pullback_of_zero_is_zero() -> None:
    domain = _oscillating(PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)]))
    result = pullback_T(domain, lambda x: np.zeros(x.shape[:-1]), _raw(elements=8))
    assert np.all(result.coefficients == 0.0)


def test_pullback_leaves_fields_below_the_layer_untouched(monkeypatch: pytest.MonkeyPatch) -> None:
    domain = _oscillating(PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)]))
    target = _raw(elements=8)

    def deep(x: np.ndarray) -> np.ndarray:
        return np.maximum(-domain.epsilon - x[..., 1], 0.0) ** 4 * (1.0 + x[..., 0])

    pulled = pullback_T(domain, deep, target)
    monkeypatch.setattr(forms_module, "eval_phi", lambda _domain, x: SimpleNamespace(value=np.array(x, copy=True)))
    plain = pullback_T(domain, deep, target)
    assert np.any(pulled.coefficients != 0.0)
    assert np.allclose(pulled.coefficients, plain.coefficients, rtol=0.0, atol=1e-13)


def test_pullback_keeps_a_zero_trace_on_the_oscillating_boundary() -> None:
    spec = FormSpec(domain_kind="oscillating")
    domain = _oscillating(PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)]))
    target = constrained_space(_raw(elements=8), spec)

    def bubble(x: np.ndarray) -> np.ndarray:
        return np.sin(np.pi * x[..., 0]) * x[..., 1] * (1.0 + x[..., 1])

    result = pullback_T(domain, bubble, target)
    top = np.stack([np.linspace(0.0, 1.0, 41), np.ones(41)], axis=-1)
    assert np.max(np.abs(evaluate(target, result.coefficients, top))) <= 1e-6 * 0.25

    rng = np.random.default_rng(2)
    st = rng.uniform(0.05, 0.95, (30, 2))
    phi = eval_phi(domain, domain.chart(st).value).value
    expected = bubble(np.stack([phi[:, 0], np.minimum(phi[:, 1], 0.0)], axis=-1))
    assert np.max(np.abs(evaluate(target, result.coefficients, st) - expected)) <= 5e-3 * 0.25


def test_interval_form_matches_composite_simpson() -> None:
    space = clamped_space(4, 5)
    form, mass = assemble_1d(space, "sbc")
    grid = np.linspace(0.0, 1.0, 4 * 128 + 1)
    free = np.arange(2, space.dim - 2)
    values = space.basis(grid)[:, free]
    third = space.basis(grid, 3)[:, free]
    integrand = values[:, :, None] * values[:, None, :] + third[:, :, None] * third[:, None, :]
    reference = simpson(integrand, x=grid, axis=0)
    assert np.max(np.abs(form - reference)) <= 1e-8 * np.max(np.abs(form))
    reference_mass = simpson(values[:, :, None] * values[:, None, :], x=grid, axis=0)
    assert np.max(np.abs(mass - reference_mass)) <= 1e-8 * np.max(np.abs(mass))


def test_form_dominates_the_mass() -> None:
    spec = FormSpec(domain_kind="oscillating")
    domain = _oscillating(PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)]))
    pencil = assemble(constrained_space(_raw(elements=8), spec), domain, spec)
    rng = np.random.default_rng(4)
    for _ in range(10):
        c = rng.normal(size=pencil.size)
        energy = c @ pencil.Q @ c
        assert energy - c @ pencil.M @ c >= -1e-10 * energy


def test_energy_factor_reproduces_the_interval_form() -> None:
    space = clamped_space(8, 5)
    factor, mass = energy_factor_1d(space, "wbc")
    form, same_mass = assemble_1d(space, "wbc")
    assert np.array_equal(mass, same_mass)
    assert factor.shape == (8 * (5 + 3), space.dim - 2)
    assert np.allclose(factor.T @ factor + mass, form, rtol=0.0, atol=1e-12 * np.max(np.abs(form)))
