"""Profiles, oscillating domains and the maps between them."""
from __future__ import annotations

import numpy as np
import pytest
from pydantic import ValidationError

from trihlab.services.geometry import (
    Box,
    FlatDomain,
    OscillatingDomain,
    OutsideDomainError,
    PeriodicProfile,
    UnsupportedOrderError,
    chart,
    eval_g,
    eval_h,
    eval_phi,
    eval_profile,
    h_derivative_maxima,
    whole_cells,
)

CANONICAL = PeriodicProfile(offset=1.5, modes=[(1, 1.0, 0.0)])


def _domain(epsilon: float = 0.25, alpha: float = 2.5, profile: PeriodicProfile = CANONICAL) -> OscillatingDomain:
    return OscillatingDomain(width=(0.0, 1.0), alpha=alpha, epsilon=epsilon, profile=profile)


def test_constant_profile_has_zero_derivative() -> None:
    profile = PeriodicProfile.constant(5.0)
    assert eval_profile(profile, 0.3, 1) == 0.0
    assert eval_profile(profile, -0.2) == pytest.approx(5.0)


def test_figure_profile_value_at_origin() -> None:
    assert eval_profile(PeriodicProfile.figure_profile(), 0.0) == pytest.approx(10.0)


def test_profile_second_derivative_matches_finite_differences() -> None:
    profile = CANONICAL
    step = 1e-4
    y = 0.1
    values = eval_profile(profile, np.array([y - step, y, y + step]))
    central = (values[0] - 2.0 * values[1] + values[2]) / step**2
    exact = eval_profile(profile, y, 2)
    assert abs(central - exact) <= 1e-6 * max(abs(exact), 1.0)


def test_profile_rejects_order_five() -> None:
    with pytest.raises(UnsupportedOrderError):
        eval_profile(CANONICAL, 0.0, 5)


def test_non_positive_profile_is_rejected() -> None:
    with pytest.raises(ValidationError):
        PeriodicProfile(offset=1.0, modes=[(1, 1.0, 0.0)])


def test_shifted_profile_translates() -> None:
    shifted = CANONICAL.shifted(0.3)
    y = np.linspace(-0.5, 0.5, 11)
    assert np.allclose(shifted.evaluate(y), CANONICAL.evaluate(y + 0.3), atol=1e-14)


def test_eval_g_examples() -> None:
    assert eval_g(_domain(epsilon=1.0, alpha=3.0, profile=PeriodicProfile.constant(2.0)), 0.4) == pytest.approx(2.0)
    assert eval_g(_domain(epsilon=0.25, profile=PeriodicProfile.constant(1.0)), 0.5) == pytest.approx(1.0 / 32.0)
    assert eval_g(_domain(epsilon=0.125, alpha=1.0), 1.0 / 16.0) == pytest.approx(0.0625)


def test_eval_g_outside_width() -> None:
    with pytest.raises(OutsideDomainError):
        eval_g(_domain(), 1.5)


def test_h_vanishes_to_third_order_below_the_layer() -> None:
    domain = _domain()
    x = np.array([[0.3, -domain.epsilon], [0.7, -0.9]])
    for order in range(4):
        assert np.all(eval_h(domain, x, order) == 0.0)


def test_h_equals_g_on_the_top_boundary() -> None:
    domain = _domain()
    xbar = np.linspace(0.0, 1.0, 17)
    top = np.stack([xbar, domain.top(xbar)], axis=-1)
    assert np.allclose(eval_h(domain, top), domain.top(xbar), rtol=1e-14)
    assert np.max(np.abs(eval_phi(domain, top).value[:, 1])) <= 1e-15


def test_h_rejects_order_four_and_outside_points() -> None:
    domain = _domain()
    with pytest.raises(UnsupportedOrderError):
        eval_h(domain, np.array([0.5, -0.5]), 4)
    with pytest.raises(OutsideDomainError):
        eval_h(domain, np.array([0.5, 0.5]))


def test_h_jets_match_finite_differences() -> None:
    domain = _domain(epsilon=0.25)
    rng = np.random.default_rng(7)
    xbar = rng.uniform(0.1, 0.9, 20)
    xn = -domain.epsilon + rng.uniform(0.2, 0.8, 20) * (domain.top(xbar) + domain.epsilon)
    x = np.stack([xbar, xn], axis=-1)
    step = 1e-5
    for order in range(3):
        nxt = eval_h(domain, x, order + 1)
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = step
            central = (eval_h(domain, x + shift, order) - eval_h(domain, x - shift, order)) / (2 * step)
            exact = nxt[..., axis]
            scale = max(np.max(np.abs(exact)), 1e-12)
            assert np.max(np.abs(central - exact)) <= 1e-6 * scale


def test_phi_is_identity_below_the_layer() -> None:
    domain = _domain()
    x = np.array([[0.2, -0.5], [0.9, -1.0]])
    jet = eval_phi(domain, x)
    assert np.array_equal(jet.value, x)
    assert np.array_equal(jet.jacobian, np.broadcast_to(np.eye(2), (2, 2, 2)))
    assert not np.any(jet.hessian) and not np.any(jet.third)


def test_phi_determinant_matches_finite_differences() -> None:
    domain = _domain(epsilon=0.25)
    x = np.array([[0.31, 0.01], [0.62, -0.1], [0.45, -0.2]])
    jet = eval_phi(domain, x)
    step = 1e-6
    for i, point in enumerate(x):
        columns = []
        for axis in range(2):
            shift = np.zeros(2)
            shift[axis] = step
            columns.append((eval_phi(domain, point + shift).value - eval_phi(domain, point - shift).value) / (2 * step))
        numeric = np.linalg.det(np.stack(columns, axis=-1))
        assert numeric == pytest.approx(jet.determinant()[i], rel=1e-6)
        assert jet.determinant()[i] == pytest.approx(1.0 - eval_h(domain, point, 1)[1], rel=1e-12)


def test_h_derivative_bounds_scale_like_epsilon_power() -> None:
    epsilons = (0.25, 0.125, 0.0625)
    alpha = 2.5
    maxima = [h_derivative_maxima(_domain(epsilon=eps, alpha=alpha)) for eps in epsilons]
    for order in range(4):
        constant = maxima[0][order] / epsilons[0] ** (alpha - order)
        for eps, values in zip(epsilons[1:], maxima[1:]):
            assert values[order] <= 2.0 * constant * eps ** (alpha - order)


def test_chart_top_side_and_flat_jets() -> None:
    domain = _domain()
    st = np.array([[0.3, 1.0], [0.7, 1.0]])
    jet = chart(domain, st)
    assert np.allclose(jet.value[:, 1], domain.top(jet.value[:, 0]), rtol=1e-14)

    flat = chart(FlatDomain(width=(0.0, 1.0)), np.array([[0.2, 0.4]]))
    assert not np.any(flat.hessian) and not np.any(flat.third)


def test_chart_jacobian_matches_finite_differences() -> None:
    domain = _domain(epsilon=0.125)
    rng = np.random.default_rng(3)
    st = rng.uniform(0.05, 0.95, (100, 2))
    jet = chart(domain, st)
    step = 1e-6
    for axis in range(2):
        shift = np.zeros(2)
        shift[axis] = step
        central = (chart(domain, st + shift).value - chart(domain, st - shift).value) / (2 * step)
        exact = jet.jacobian[..., axis]
        assert np.max(np.abs(central - exact)) <= 1e-6 * np.max(np.abs(exact))


def test_box_chart_round_trip() -> None:
    box = Box(x_range=(-0.5, 0.5), y_range=(-4.0, 0.0))
    st = np.array([[0.25, 0.75]])
    assert np.allclose(box.inverse_chart(box.chart(st).value), st)


def test_whole_cells_inside_width() -> None:
    assert list(whole_cells((0.0, 1.0), 0.25)) == [1, 2, 3]
    assert len(whole_cells((0.0, 0.1), 0.25)) == 0
