"""Check suites behind ``green-check``, ``unfold-check``, ``avg-check`` and ``oracle1d``.

Every suite returns ``CheckRecord`` objects; thresholds are the acceptance
tolerances of the corresponding identity.
"""
from __future__ import annotations

import math
from typing import Sequence

import numpy as np
from numpy.polynomial import Polynomial

from ..constants import DEFAULT_DEGREE, DEFAULT_EPSILONS
from ..logging import get_logger
from ..models import CheckRecord
from .analysis import (
    PeriodicStrip,
    average_convergence,
    check_exact_integration,
    local_average,
    polynomial_defect,
    unfold,
    verify_green,
    verify_green_1d,
)
from .eig import galerkin_eigen_1d, oracle_eigen_1d
from .fields import Field, FieldSum, Poly, SeparableField, Trig, monomial
from .geometry import Box

__all__ = ["average_suite", "green_suite", "oracle_suite", "unfolding_suite"]

logger = get_logger(__name__)

GREEN_STRIP_TOL = 1e-8
GREEN_POLY_TOL = 1e-12
GREEN_1D_TOL = 1e-10
EXACT_INTEGRATION_TOL = 1e-10
DEFECT_TOL = 1e-12
SAMPLE_TOL = 1e-12
AVERAGE_RATIO_BAND = (3.5, 4.5)
ORACLE_TOL = 1e-6

TWO_PI = 2.0 * math.pi


def _shifted_power(power: int, shift: float = 1.0) -> Poly:
    """``(shift + y)^power``."""
    return Poly(tuple((Polynomial([shift, 1.0]) ** power).coef))


def _poly(*coefficients: float) -> Poly:
    return Poly(tuple(float(c) for c in coefficients))


def strip_corpus() -> list[tuple[str, Field, Field]]:
    """Y-periodic test pairs ``(f, φ)`` on the strip Y × (−1, 0)."""

    flat = Trig(0.0)
    return [
        ("cos1_p4__sin1_y1p2", SeparableField(Trig(TWO_PI), _shifted_power(4)), SeparableField(Trig.sin(TWO_PI), _poly(0, 1, 2, 1))),
        ("cos1_p4__cos1_y1p2", SeparableField(Trig(TWO_PI), _shifted_power(4)), SeparableField(Trig(TWO_PI), _poly(0, 1, 2, 1))),
        ("cos1_cos__cos1_p3", SeparableField(Trig(TWO_PI), Trig(1.0)), SeparableField(Trig(TWO_PI), _shifted_power(3))),
        ("cos2_p5__cos2_y2", SeparableField(Trig(2 * TWO_PI), _shifted_power(5)), SeparableField(Trig(2 * TWO_PI), _poly(0, 0, 1))),
        ("sin1_sin3__sin1_h3", SeparableField(Trig.sin(TWO_PI), Trig.sin(3.0)), SeparableField(Trig.sin(TWO_PI), _shifted_power(3, 0.5))),
        ("cos3_p6__cos3_p1", SeparableField(Trig(3 * TWO_PI), _shifted_power(6)), SeparableField(Trig(3 * TWO_PI), _shifted_power(1))),
        ("flat_p6__flat_y3", SeparableField(flat, _shifted_power(6)), SeparableField(flat, _poly(0, 0, 0, 1))),
        (
            "sum__sum",
            SeparableField(Trig(TWO_PI), _shifted_power(4)) + SeparableField(Trig(2 * TWO_PI), _poly(0, 0, 0, 0, 0, 1)),
            SeparableField(Trig(TWO_PI), _poly(0, 1)) + SeparableField(Trig(2 * TWO_PI), _shifted_power(2)),
        ),
        ("cos1_cos2__cos1_cos1", SeparableField(Trig(TWO_PI), Trig(2.0)), SeparableField(Trig(TWO_PI), Trig(1.0))),
        ("sin2_p4__sin2_y1p2", SeparableField(Trig.sin(2 * TWO_PI), _shifted_power(4)), SeparableField(Trig.sin(2 * TWO_PI), _poly(0, 1, 2, 1))),
        ("cos1_p4__flat_y4", SeparableField(Trig(TWO_PI), _shifted_power(4)), SeparableField(flat, _poly(0, 0, 0, 0, 1))),
        ("flat_sin__cos1_p2", SeparableField(flat, Trig.sin(1.5)), SeparableField(Trig(TWO_PI), _shifted_power(2))),
    ]


def green_suite() -> list[CheckRecord]:
    """Strip corpus, box cases and the one-dimensional reduction."""

    records: list[CheckRecord] = []
    strip = PeriodicStrip(bottom=-1.0)
    for case, f, phi in strip_corpus():
        check = verify_green(f, phi, strip)
        records.append(
            CheckRecord(
                case=f"strip:{case}",
                lhs=check.lhs,
                rhs=check.rhs,
                residual=check.residual,
                threshold=GREEN_STRIP_TOL,
                detail={"volume": check.volume, **check.boundary},
            )
        )

    box = Box(x_range=(-0.5, 0.5), y_range=(-1.0, 0.0))
    quadratic = FieldSum((monomial(2, 0), monomial(1, 1, -2.0), monomial(0, 2, 0.5), monomial(1, 0), monomial(0, 0, 3.0)))
    for case, phi in (
        ("trig", SeparableField(Trig.sin(3.0), Trig(2.0))),
        ("poly", monomial(3, 2)),
    ):
        check = verify_green(quadratic, phi, box)
        records.append(
            CheckRecord(
                case=f"box:quadratic__{case}",
                lhs=check.lhs,
                rhs=check.rhs,
                residual=max(abs(check.lhs), abs(check.volume), *(abs(v) for v in check.boundary.values())),
                threshold=GREEN_POLY_TOL,
                detail={"volume": check.volume, **check.boundary},
            )
        )
    smooth = verify_green(SeparableField(Trig(2.0), Trig.sin(1.5)), SeparableField(Trig.sin(1.0), _shifted_power(3)), box)
    records.append(
        CheckRecord(
            case="box:smooth",
            lhs=smooth.lhs,
            rhs=smooth.rhs,
            residual=smooth.residual,
            threshold=GREEN_STRIP_TOL,
            detail={"volume": smooth.volume, **smooth.boundary},
        )
    )

    one_d = verify_green_1d(Trig.sin(1.0), _poly(0, 0, 1, 2, 1))
    records.append(
        CheckRecord(
            case="interval:sin__x2(x+1)2",
            lhs=one_d.lhs,
            rhs=one_d.rhs,
            residual=one_d.residual,
            threshold=GREEN_1D_TOL,
            detail={"volume": one_d.volume, **one_d.boundary},
        )
    )
    return records


def _integration_corpus() -> list[tuple[str, Field, tuple[int, int] | None]]:
    return [
        ("one", monomial(0, 0), None),
        ("cubic", FieldSum((monomial(3, 0), monomial(1, 2, -1.0), monomial(0, 3, 2.0))), None),
        ("sin_x__p5", SeparableField(Trig.sin(TWO_PI), _shifted_power(5)), None),
        ("cos_3x__y4", SeparableField(Trig(3.0), _poly(0, 0, 0, 0, 1)), None),
        ("x5__cos_y", SeparableField(_poly(0, 0, 0, 0, 0, 1), Trig(2.0)), None),
        ("quadratic_mixed", FieldSum((monomial(1, 1, 2.0), monomial(2, 0), monomial(0, 2))), (1, 1)),
        ("sin_x__p3_dx", SeparableField(Trig.sin(TWO_PI), _shifted_power(3)), (1, 0)),
        ("x4__y2_dyy", SeparableField(_poly(0, 0, 0, 0, 1), _poly(0, 0, 1)), (0, 2)),
    ]


def unfolding_suite(epsilons: Sequence[float] = DEFAULT_EPSILONS) -> list[CheckRecord]:
    """Sampled unfolding identities, exact integration and the defect projector."""

    records: list[CheckRecord] = []
    for eps in epsilons:
        one = unfold(monomial(0, 0), eps)
        records.append(_sample_record(f"constant@{eps}", float(np.max(np.abs(one.values - 1.0)))))

        normal = unfold(monomial(0, 1), eps)
        expected = eps * normal.yn[None, ...]
        records.append(_sample_record(f"affine_normal@{eps}", float(np.max(np.abs(normal.values - expected)))))

        periodic = unfold(SeparableField(Trig.sin(TWO_PI / eps), _poly(1.0)), eps)
        deviation = float(np.max(np.abs(periodic.values - periodic.values[:1])))
        records.append(_sample_record(f"periodic_trig@{eps}", deviation))

        for a in (-1.0, -0.5):
            for case, field_, derivative in _integration_corpus():
                check = check_exact_integration(field_, eps, a, derivative=derivative)
                records.append(
                    CheckRecord(
                        case=f"exact:{case}@{eps},a={a}",
                        lhs=check.lhs,
                        rhs=check.rhs,
                        residual=check.residual,
                        threshold=EXACT_INTEGRATION_TOL,
                    )
                )

        quadratic = FieldSum((monomial(2, 0), monomial(1, 1, -1.0), monomial(0, 2, 0.5), monomial(0, 1), monomial(0, 0, 2.0)))
        kernel = polynomial_defect(unfold(quadratic, eps))
        records.append(
            CheckRecord(
                case=f"defect_kernel@{eps}",
                lhs=float(np.max(np.abs(kernel.values))),
                rhs=0.0,
                residual=float(np.max(np.abs(kernel.values))),
                threshold=DEFECT_TOL,
            )
        )
        smooth = unfold(SeparableField(Trig.sin(TWO_PI), Trig(1.0)), eps)
        once = polynomial_defect(smooth)
        twice = polynomial_defect(once)
        gap = float(np.max(np.abs(twice.values - once.values)))
        records.append(CheckRecord(case=f"defect_idempotent@{eps}", lhs=gap, rhs=0.0, residual=gap, threshold=DEFECT_TOL))
    return records


def _sample_record(case: str, deviation: float) -> CheckRecord:
    return CheckRecord(case=case, lhs=deviation, rhs=0.0, residual=deviation, threshold=SAMPLE_TOL)


def average_suite(epsilons: Sequence[float] = DEFAULT_EPSILONS) -> list[CheckRecord]:
    """Exactness on affine fields and the O(ε²) rate for a sine."""

    records: list[CheckRecord] = []
    inner = np.stack(np.meshgrid(np.linspace(0.3, 0.7, 5), np.linspace(-0.7, -0.3, 5), indexing="ij"), axis=-1)
    affine = FieldSum((monomial(1, 0, 2.0), monomial(0, 1, -1.0), monomial(0, 0, 0.5)))
    for eps in epsilons:
        for case, field_ in (("constant", monomial(0, 0, 3.0)), ("affine", affine)):
            deviation = float(np.max(np.abs(local_average(field_, eps)(inner) - field_(inner))))
            records.append(_sample_record(f"{case}@{eps}", deviation))

    report = average_convergence(SeparableField(Trig.sin(TWO_PI), _poly(1.0)), epsilons)
    low, high = AVERAGE_RATIO_BAND
    for (coarse, fine), ratio in zip(zip(epsilons, epsilons[1:]), report.ratios):
        inside = low <= ratio <= high
        records.append(
            CheckRecord(
                case=f"sine_ratio:{coarse}->{fine}",
                lhs=ratio,
                rhs=4.0,
                residual=0.0 if inside else abs(ratio - 4.0),
                threshold=0.0,
                detail={"monotone": report.monotone},
            )
        )
    return records


def oracle_suite(
    bc_family: str, count: int = 4, *, elements: int = 64, degree: int = DEFAULT_DEGREE
) -> list[CheckRecord]:
    """Spline-Galerkin interval eigenvalues against the determinant oracle."""

    galerkin = galerkin_eigen_1d(bc_family, count, elements=elements, degree=degree)  # type: ignore[arg-type]
    oracle = oracle_eigen_1d(bc_family, count)  # type: ignore[arg-type]
    records = []
    for j, (approx, exact) in enumerate(zip(galerkin.eigenvalues, oracle), start=1):
        records.append(
            CheckRecord(
                case=f"{bc_family}:j={j}",
                lhs=float(approx),
                rhs=float(exact),
                residual=abs(float(approx) - exact) / abs(exact),
                threshold=ORACLE_TOL,
            )
        )
    return records
