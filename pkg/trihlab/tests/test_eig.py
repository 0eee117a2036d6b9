"""Generalized eigensolver and the interval oracle."""
from __future__ import annotations

import numpy as np
import pytest

from trihlab.services.eig import (
    IndefiniteFormError,
    IndefiniteMassError,
    OracleRootCountError,
    galerkin_eigen_1d,
    oracle_eigen_1d,
    solve_factored,
    solve_pencil,
)
from trihlab.services.forms import assemble_1d, energy_factor_1d
from trihlab.services.spline import clamped_space


def test_diagonal_pencil() -> None:
    Q = np.diag([3.0, 1.0, 2.0])
    M = np.diag([1.0, 1.0, 2.0])
    spectrum = solve_pencil(Q, M, 3)
    assert np.allclose(spectrum.eigenvalues, [1.0, 1.0, 3.0])
    assert np.all(spectrum.residuals <= 1e-12)
    assert spectrum.clusters == (0, 0, 1)
    assert np.allclose(spectrum.cluster_means(), [1.0, 1.0, 3.0])


def test_eigenvectors_are_mass_orthonormal() -> None:
    rng = np.random.default_rng(0)
    base = rng.normal(size=(6, 6))
    M = base @ base.T + 6.0 * np.eye(6)
    Q = np.diag(np.arange(1.0, 7.0)) + M
    spectrum = solve_pencil(Q, M, 4)
    gram = spectrum.eigenvectors.T @ M @ spectrum.eigenvectors
    assert np.allclose(gram, np.eye(4), atol=1e-10)
    assert np.all(np.diff(spectrum.eigenvalues) >= 0.0)


def test_count_validation() -> None:
    with pytest.raises(ValueError):
        solve_pencil(np.eye(2), np.eye(2), 3)
    empty = solve_pencil(np.eye(2), np.eye(2), 0)
    assert len(empty) == 0 and empty.eigenvectors.shape == (2, 0)


def test_indefinite_mass_is_rejected() -> None:
    with pytest.raises(IndefiniteMassError, match="indefinite_mass"):
        solve_pencil(np.eye(2), np.diag([1.0, -1.0]), 1)


@pytest.mark.parametrize("family", ["wbc", "sbc", "dbc"])
def test_galerkin_matches_oracle(family: str) -> None:
    approx = galerkin_eigen_1d(family, 4)  # type: ignore[arg-type]
    exact = oracle_eigen_1d(family, 4)  # type: ignore[arg-type]
    for value, reference in zip(approx.eigenvalues, exact):
        assert abs(value - reference) / reference <= 1e-6


def test_oracle_orders_families() -> None:
    wbc, sbc, dbc = (oracle_eigen_1d(bc, 3) for bc in ("wbc", "sbc", "dbc"))  # type: ignore[arg-type]
    assert wbc[0] == 1.0
    assert sbc[0] > 1.0
    assert all(d >= s >= w for d, s, w in zip(dbc, sbc, wbc))


def test_oracle_rejects_unknown_family_and_short_scan() -> None:
    with pytest.raises(ValueError):
        oracle_eigen_1d("strange", 2)  # type: ignore[arg-type]
    with pytest.raises(OracleRootCountError, match="root_count_mismatch"):
        oracle_eigen_1d("dbc", 3, r_max=1.0)


def test_indefinite_form_is_rejected() -> None:
    with pytest.raises(IndefiniteFormError, match="indefinite_form"):
        solve_pencil(np.diag([1.0, -1.0]), np.eye(2), 1)


def test_weak_interval_kernel_is_exactly_one() -> None:
    # u = x(x + 1) has u = u‴ = u⁗ = 0 at both ends and no third derivative.
    spectrum = galerkin_eigen_1d("wbc", 2)
    assert abs(spectrum.eigenvalues[0] - 1.0) <= 1e-10
    assert spectrum.eigenvalues[1] > 1e4


def test_factored_and_gram_solves_agree() -> None:
    factor, mass = energy_factor_1d(clamped_space(8, 5), "sbc")
    factored = solve_factored(factor, mass, 4)
    gram = solve_pencil(factor.T @ factor + mass, mass, 4)
    assert np.allclose(factored.eigenvalues, gram.eigenvalues, rtol=1e-8, atol=0.0)
    gram_matrix = factored.eigenvectors.T @ mass @ factored.eigenvectors
    assert np.allclose(gram_matrix, np.eye(4), atol=1e-10)


def test_spectrum_is_invariant_under_dof_permutation() -> None:
    form, mass = assemble_1d(clamped_space(8, 5), "dbc")
    order = np.random.default_rng(3).permutation(form.shape[0])
    base = solve_pencil(form, mass, 4)
    permuted = solve_pencil(form[np.ix_(order, order)], mass[np.ix_(order, order)], 4)
    assert np.allclose(permuted.eigenvalues, base.eigenvalues, rtol=1e-10, atol=0.0)


@pytest.mark.parametrize("family", ["wbc", "sbc", "dbc"])
def test_refinement_never_raises_an_eigenvalue(family: str) -> None:
    # Uniform knot vectors nest under halving, so min-max bounds only improve.
    coarse, medium, fine = (galerkin_eigen_1d(family, 3, elements=e).eigenvalues for e in (4, 8, 16))  # type: ignore[arg-type]
    assert np.all(medium <= coarse * (1.0 + 1e-10))
    assert np.all(fine <= medium * (1.0 + 1e-10))


def test_proportional_pencil_has_a_single_eigenvalue() -> None:
    rng = np.random.default_rng(8)
    base = rng.normal(size=(5, 5))
    M = base @ base.T + 5.0 * np.eye(5)
    spectrum = solve_pencil(2.0 * M, M, 5)
    assert np.allclose(spectrum.eigenvalues, 2.0, rtol=1e-12)
    assert spectrum.clusters == (0,) * 5
