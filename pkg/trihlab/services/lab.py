"""Experiment configs, regime sweeps and their result files.

A sweep solves the WBC problem on Ω_ε for a decreasing list of ε and the
four flat limit problems once, then compares eigenvalue clusters by index.
"""
from __future__ import annotations

import math
import time

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Literal, Sequence, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .. import __version__
from ..config import Settings, get_settings
from ..constants import CRITICAL_ALPHA, DEFAULT_DEGREE, DEFAULT_EPSILONS, MIN_ELEMENTS_PER_PERIOD
from ..logging import get_logger
from ..models import REFERENCES, SWEEP_HEADER, SweepRow, Verdict
from ..store import write_csv, write_json
from .analysis import TraceReport, defect_norm, polynomial_defect, trace_identity_diagnostic, unfold
from .cell import CellProblem, default_k1
from .eig import Spectrum, solve
from .fields import SplineField
from .forms import AssembledPencil, BC_TOP_LAYERS, FormSpec, ProblemTooLargeError, assemble, constrained_space
from .geometry import FlatDomain, OscillatingDomain, PeriodicProfile, whole_cells
from .spline import build_quadrature, clamped_space, tensor_space

__all__ = [
    "CellSettings",
    "ConfigError",
    "DEFAULT_PROFILE",
    "DefectScaling",
    "ExperimentConfig",
    "LimitMesh",
    "PenaltyScan",
    "SweepPoint",
    "SweepResult",
    "defect_scaling",
    "emit_results",
    "k1_penalty_scan",
    "load_config",
    "reference_ordering",
    "resolve_k1",
    "run_limit_problems",
    "run_sweep",
    "trace_diagnostics",
]

logger = get_logger(__name__)

Regime = Literal["stability", "strange", "mild", "strong", "exploratory"]

REGIME_REFERENCE: dict[str, str] = {"stability": "A", "strange": "Ahat", "mild": "S", "strong": "D"}
DISCRIMINATION_FACTOR = 0.5
_ORDERING_RTOL = 1e-10
DEFAULT_PROFILE = PeriodicProfile(offset=1.5, modes=((1, 1.0, 0.0),))
"""b(y) = 1.5 + cos(2πy), the profile of the canonical regime sweeps."""

_LIMIT_FAMILIES = (("A", "wbc"), ("Ahat", "strange"), ("S", "sbc"), ("D", "dbc"))


class ConfigError(ValueError):
    """Raised when a run configuration cannot be read or validated."""


def _dim_1d(elements: int, degree: int, continuity: int | None) -> int:
    smoothness = degree - 1 if continuity is None else continuity
    return degree + 1 + (elements - 1) * (degree - smoothness)


def _free_count(elements_x: int, elements_y: int, degree: int, continuity: int | None, top_layers: int) -> int:
    nx = _dim_1d(elements_x, degree, continuity)
    ny = _dim_1d(elements_y, degree, continuity)
    return max(nx - 2, 0) * max(ny - 1 - top_layers, 0)


class CellSettings(BaseModel):
    """The ``[cell]`` table of a run config."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    depth: float = Field(default=4.0, gt=1.0)
    bottom: Literal["free", "clamped"] = "free"
    elements_per_period: int | None = Field(default=None, ge=1)
    elements_top: int = Field(default=16, ge=4)
    elements_per_depth: int = Field(default=4, ge=1)


class LimitMesh(BaseModel):
    """Flat mesh on which the four limit problems are solved."""

    model_config = ConfigDict(frozen=True)

    width: tuple[float, float] = (0.0, 1.0)
    degree: int = Field(default=DEFAULT_DEGREE, ge=3)
    continuity: int | None = None
    elements_x: int = Field(default=16, ge=1)
    elements_y: int = Field(default=8, ge=1)
    quad_points: int | None = Field(default=None, ge=1)


class ExperimentConfig(BaseModel):
    """A regime sweep as read from a TOML run config."""

    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)

    regime: Regime
    alpha: float = Field(gt=0.0)
    epsilons: tuple[float, ...] = DEFAULT_EPSILONS
    width: tuple[float, float] = Field(default=(0.0, 1.0), alias="W")
    profile: PeriodicProfile = DEFAULT_PROFILE
    degree: int = Field(default=DEFAULT_DEGREE, ge=3)
    continuity: int | None = None
    elements_per_period: int = Field(default=4, ge=1)
    elements_y: int = Field(default=8, ge=1)
    quad_points: int | None = Field(default=None, ge=1)
    limit_elements_x: int = Field(default=16, ge=1)
    limit_elements_y: int = Field(default=8, ge=1)
    num_eigenvalues: int = Field(default=3, ge=1)
    k1: Union[Literal["auto"], float] = "auto"
    bc: Literal["wbc", "sbc", "dbc"] = "wbc"
    extend_on_failure: bool = False
    output: str | None = None
    cell: CellSettings = CellSettings()

    @field_validator("k1")
    @classmethod
    def _non_negative_k1(cls, value: Any) -> Any:
        if value != "auto" and float(value) < 0.0:
            raise ValueError("k1 must be non-negative or 'auto'")
        return value

    @model_validator(mode="after")
    def _check_sweep(self) -> "ExperimentConfig":
        if not self.width[1] > self.width[0]:
            raise ValueError("W must satisfy w0 < w1")
        if self.bc == "wbc":
            _check_regime(self.regime, self.alpha)
        for previous, current in zip(self.epsilons, self.epsilons[1:]):
            if not current < previous:
                raise ValueError("epsilons must be strictly decreasing")
        for eps in self.epsilons:
            if not 0.0 < eps <= 1.0:
                raise ValueError(f"epsilon {eps} outside (0, 1]")
            if len(whole_cells(self.width, eps)) == 0:
                raise ValueError(f"no_whole_cell: epsilon={eps}")
        needed = MIN_ELEMENTS_PER_PERIOD * max(self.profile.max_frequency, 1)
        if self.elements_per_period < needed:
            raise ValueError(f"unresolved_oscillation: {self.elements_per_period} elements per period, need {needed}")
        return self

    @property
    def limit_mesh(self) -> LimitMesh:
        return LimitMesh(
            width=self.width,
            degree=self.degree,
            continuity=self.continuity,
            elements_x=self.limit_elements_x,
            elements_y=self.limit_elements_y,
            quad_points=self.quad_points,
        )

    @property
    def cell_problem(self) -> CellProblem:
        return CellProblem(profile=self.profile, degree=self.degree, **self.cell.model_dump())

    def elements_x(self, epsilon: float) -> int:
        """Elements across W so that every period of g_ε gets ``elements_per_period``."""
        periods = math.ceil((self.width[1] - self.width[0]) / epsilon - 1e-9)
        return periods * self.elements_per_period

    def domain(self, epsilon: float) -> OscillatingDomain:
        return OscillatingDomain(width=self.width, alpha=self.alpha, epsilon=epsilon, profile=self.profile)

    def check_size(self, settings: Settings | None = None) -> None:
        settings = settings or get_settings()
        cap = settings.MAX_FREE_DOFS
        top = BC_TOP_LAYERS[self.bc]
        for eps in self.epsilons:
            count = _free_count(self.elements_x(eps), self.elements_y, self.degree, self.continuity, top)
            if count > cap:
                raise ProblemTooLargeError(f"too_many_dofs: epsilon={eps} needs {count}>{cap}")
        for name, family in _LIMIT_FAMILIES:
            count = _free_count(
                self.limit_elements_x, self.limit_elements_y, self.degree, self.continuity, BC_TOP_LAYERS[family]
            )
            if count > cap:
                raise ProblemTooLargeError(f"too_many_dofs: limit mesh for {name} needs {count}>{cap}")


def _check_regime(regime: str, alpha: float) -> None:
    critical = CRITICAL_ALPHA
    allowed = {
        "stability": alpha > critical,
        "strange": math.isclose(alpha, critical),
        "mild": 1.5 < alpha < critical,
        "strong": alpha <= 1.0,
        "exploratory": 1.0 < alpha <= 1.5,
    }[regime]
    if not allowed:
        raise ValueError(f"regime_alpha_mismatch: regime={regime} alpha={alpha}")


def load_config(path: Path | str, *, settings: Settings | None = None) -> ExperimentConfig:
    """Read and validate a TOML run config."""

    path = Path(path)
    try:
        with path.open("rb") as fh:
            raw = tomllib.load(fh)
    except OSError as exc:
        raise ConfigError(f"config_unreadable:{path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config_syntax:{path}: {exc}") from exc
    try:
        config = ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"config_invalid:{path}: {exc}") from exc
    config.check_size(settings)
    return config


def resolve_k1(config: ExperimentConfig) -> float:
    if config.k1 == "auto":
        value = default_k1(config.cell_problem)
        logger.info("k1=auto resolved to %.10g from the cell problem", value)
        return value
    return float(config.k1)


def _flat_pencil(mesh: LimitMesh, bc_family: str, k1: float, settings: Settings) -> AssembledPencil:
    sx = clamped_space(mesh.elements_x, mesh.degree, mesh.continuity)
    sy = clamped_space(mesh.elements_y, mesh.degree, mesh.continuity)
    spec = FormSpec(domain_kind="flat", bc_family=bc_family, k1=k1 if bc_family == "strange" else 0.0)
    space = constrained_space(tensor_space(sx, sy), spec)
    quad = build_quadrature(space, mesh.quad_points)
    return assemble(space, FlatDomain(width=mesh.width), spec, quad, settings=settings)


def run_limit_problems(
    mesh: LimitMesh,
    k1: float,
    count: int,
    *,
    settings: Settings | None = None,
    families: Sequence[str] = REFERENCES,
) -> dict[str, Spectrum]:
    """Spectra of A_Ω, Â_Ω(K1), A_{Ω,S} and A_{Ω,D} on one flat mesh."""

    if k1 < 0.0:
        raise ValueError("k1 must be non-negative")
    settings = settings or get_settings()
    lookup = dict(_LIMIT_FAMILIES)
    spectra: dict[str, Spectrum] = {}
    for name in families:
        started = time.perf_counter()
        spectra[name] = solve(_flat_pencil(mesh, lookup[name], k1, settings), count, settings=settings)
        logger.info(
            "limit problem %s: lambda_1=%.10g in %.2fs",
            name,
            spectra[name].eigenvalues[0] if count else float("nan"),
            time.perf_counter() - started,
        )
    return spectra


def reference_ordering(spectra: dict[str, Spectrum], count: int = 5) -> bool:
    """λ_j(D) ≥ λ_j(S) ≥ λ_j(Â) ≥ λ_j(A) for the first ``count`` indices."""

    chain = [spectra[name].eigenvalues for name in ("D", "S", "Ahat", "A")]
    size = min(count, *(len(values) for values in chain))
    for upper, lower in zip(chain, chain[1:]):
        if np.any(upper[:size] < lower[:size] * (1.0 - _ORDERING_RTOL)):
            return False
    return True


@dataclass(frozen=True)
class SweepPoint:
    epsilon: float
    domain: OscillatingDomain
    pencil: AssembledPencil
    spectrum: Spectrum
    elapsed: float

    def eigenfield(self, index: int = 0) -> SplineField:
        return SplineField(self.domain, self.pencil.space, self.pencil.expand(self.spectrum.eigenvectors[:, index]))


@dataclass(frozen=True)
class SweepResult:
    config: ExperimentConfig
    k1: float
    references: dict[str, Spectrum]
    points: tuple[SweepPoint, ...]
    gaps: tuple[np.ndarray, ...]
    verdict: Verdict
    timings: dict[str, float] = field(default_factory=dict)
    warnings: tuple[str, ...] = ()

    def rows(self) -> list[SweepRow]:
        """Rows ordered by ε descending, then j ascending."""
        rows: list[SweepRow] = []
        for point, gaps in zip(self.points, self.gaps):
            spectrum = point.spectrum
            for j in range(len(spectrum)):
                rows.append(
                    SweepRow(
                        alpha=self.config.alpha,
                        epsilon=point.epsilon,
                        j=j + 1,
                        lam=float(spectrum.eigenvalues[j]),
                        residual=float(spectrum.residuals[j]),
                        **{f"gap_{name}": float(gaps[j, k]) for k, name in enumerate(REFERENCES)},
                    )
                )
        return rows


def _solve_point(config: ExperimentConfig, epsilon: float, settings: Settings) -> SweepPoint:
    started = time.perf_counter()
    domain = config.domain(epsilon)
    sx = clamped_space(config.elements_x(epsilon), config.degree, config.continuity)
    sy = clamped_space(config.elements_y, config.degree, config.continuity)
    spec = FormSpec(domain_kind="oscillating", bc_family=config.bc)
    space = constrained_space(tensor_space(sx, sy), spec)
    pencil = assemble(space, domain, spec, build_quadrature(space, config.quad_points), settings=settings)
    spectrum = solve(pencil, config.num_eigenvalues, settings=settings)
    elapsed = time.perf_counter() - started
    logger.info("sweep point epsilon=%g: lambda_1=%.10g in %.2fs", epsilon, spectrum.eigenvalues[0], elapsed)
    return SweepPoint(epsilon=epsilon, domain=domain, pencil=pencil, spectrum=spectrum, elapsed=elapsed)


def _relative_gaps(spectrum: Spectrum, references: dict[str, Spectrum]) -> np.ndarray:
    values = spectrum.cluster_means()
    gaps = np.empty((len(values), len(REFERENCES)))
    for k, name in enumerate(REFERENCES):
        reference = references[name].cluster_means()[: len(values)]
        gaps[:, k] = np.abs(values - reference) / np.abs(reference)
    return gaps


def _expected_reference(config: ExperimentConfig) -> str | None:
    if config.bc == "wbc":
        return REGIME_REFERENCE.get(config.regime)
    if config.bc == "sbc":
        return "S" if config.alpha > 1.5 else "D" if config.alpha < 1.5 else None
    return "D"


def _verdict(config: ExperimentConfig, gaps: Sequence[np.ndarray]) -> Verdict:
    if not gaps:
        return Verdict(expected=_expected_reference(config))
    last = gaps[-1][0]
    by_name = {name: float(last[k]) for k, name in enumerate(REFERENCES)}
    index = int(np.argmin(last))
    reference = REFERENCES[index]
    trend = [float(g[0, index]) for g in gaps]
    monotone = all(b < a for a, b in zip(trend, trend[1:]))
    others = [value for k, value in enumerate(last) if k != index]
    discrimination = all(last[index] < DISCRIMINATION_FACTOR * value for value in others)
    expected = _expected_reference(config)
    if config.regime == "exploratory" and config.bc == "wbc":
        return Verdict(
            reference="open",
            expected=None,
            monotone=monotone,
            discrimination=discrimination,
            gaps=by_name,
            passed=None,
        )
    passed = None if expected is None else (reference == expected and monotone and discrimination)
    if passed is False:
        logger.warning(
            "sweep verdict %s (expected %s): monotone=%s discrimination=%s", reference, expected, monotone, discrimination
        )
    return Verdict(
        reference=reference,
        expected=expected,
        monotone=monotone,
        discrimination=discrimination,
        gaps=by_name,
        passed=passed,
    )


def run_sweep(config: ExperimentConfig, *, settings: Settings | None = None, k1: float | None = None) -> SweepResult:
    """Solve Ω_ε for every ε and the four limit problems, then compare."""

    settings = settings or get_settings()
    config.check_size(settings)
    started = time.perf_counter()
    timings: dict[str, float] = {}

    if k1 is None:
        k1 = resolve_k1(config)
    timings["k1"] = time.perf_counter() - started

    count = config.num_eigenvalues
    with ThreadPoolExecutor(max_workers=settings.WORKERS) as pool:
        limit_future = pool.submit(run_limit_problems, config.limit_mesh, k1, count, settings=settings)
        futures = [pool.submit(_solve_point, config, eps, settings) for eps in config.epsilons]
        points = tuple(future.result() for future in futures)
        references = limit_future.result()

    gaps = tuple(_relative_gaps(point.spectrum, references) for point in points)
    verdict = _verdict(config, gaps)
    extended: list[str] = []
    if verdict.passed is False and config.extend_on_failure and config.epsilons:
        extra = config.epsilons[-1] / 2.0
        logger.info("verdict failed at epsilon=%g; extending the sweep to %g", config.epsilons[-1], extra)
        config = config.model_copy(update={"epsilons": config.epsilons + (extra,)})
        config.check_size(settings)
        point = _solve_point(config, extra, settings)
        points = points + (point,)
        gaps = gaps + (_relative_gaps(point.spectrum, references),)
        verdict = _verdict(config, gaps)
        extended.append(f"sweep_extended:epsilon={extra!r}")

    for point in points:
        timings[f"epsilon={point.epsilon!r}"] = point.elapsed

    warnings: list[str] = extended
    for point in points:
        warnings.extend(f"epsilon={point.epsilon!r}:{item}" for item in point.spectrum.warnings)
        if np.any(point.spectrum.eigenvalues < 1.0 - settings.RESIDUAL_TOL):
            warnings.append(f"epsilon={point.epsilon!r}:eigenvalue_below_one")
    for name, spectrum in references.items():
        warnings.extend(f"{name}:{item}" for item in spectrum.warnings)
    if not reference_ordering(references, count):
        warnings.append("reference_ordering_violated")
        logger.warning("limit spectra violate the nesting order")

    timings["total"] = time.perf_counter() - started
    logger.info("sweep regime=%s alpha=%g verdict=%s", config.regime, config.alpha, verdict.reference)
    return SweepResult(
        config=config,
        k1=k1,
        references=references,
        points=points,
        gaps=gaps,
        verdict=verdict,
        timings=timings,
        warnings=tuple(warnings),
    )


def emit_results(result: SweepResult, path: Path | str) -> tuple[Path, Path]:
    """Write ``sweep.csv`` and ``manifest.json`` under ``path``."""

    directory = Path(path)
    csv_path = directory / "sweep.csv"
    manifest_path = directory / "manifest.json"
    write_csv(csv_path, (row.as_row() for row in result.rows()), SWEEP_HEADER)
    manifest = {
        "config": result.config.model_dump(mode="json", by_alias=True),
        "version": __version__,
        "timings": result.timings,
        "verdict": result.verdict.model_dump(mode="json"),
        "k1": result.k1,
        "references": {
            name: [float(value) for value in spectrum.eigenvalues] for name, spectrum in result.references.items()
        },
        "warnings": list(result.warnings),
    }
    write_json(manifest_path, manifest)
    logger.info("wrote %s and %s", csv_path, manifest_path)
    return csv_path, manifest_path


@dataclass(frozen=True)
class PenaltyScan:
    k1_values: tuple[float, ...]
    lambda1: tuple[float, ...]
    lambda1_sbc: float

    @property
    def monotone(self) -> bool:
        return all(b >= a for a, b in zip(self.lambda1, self.lambda1[1:]))

    @property
    def below_sbc(self) -> bool:
        return all(value <= self.lambda1_sbc * (1.0 + _ORDERING_RTOL) for value in self.lambda1)


def k1_penalty_scan(mesh: LimitMesh, k1_values: Sequence[float], *, settings: Settings | None = None) -> PenaltyScan:
    """λ₁(Â_Ω(K1)) over increasing K1 next to λ₁(A_{Ω,S})."""

    settings = settings or get_settings()
    values = tuple(float(value) for value in k1_values)
    lambdas = tuple(float(solve(_flat_pencil(mesh, "strange", k1, settings), 1, settings=settings).eigenvalues[0]) for k1 in values)
    sbc = float(solve(_flat_pencil(mesh, "sbc", 0.0, settings), 1, settings=settings).eigenvalues[0])
    return PenaltyScan(k1_values=values, lambda1=lambdas, lambda1_sbc=sbc)


@dataclass(frozen=True)
class DefectScaling:
    epsilons: tuple[float, ...]
    norms: tuple[float, ...]

    @property
    def scaled(self) -> tuple[float, ...]:
        return tuple(norm / eps**CRITICAL_ALPHA for eps, norm in zip(self.epsilons, self.norms))


def defect_scaling(result: SweepResult) -> DefectScaling:
    """‖D²_y(defect)‖ of the first eigenfunction per ε, unfolded over Ω."""

    norms = []
    for point in result.points:
        unfolded = unfold(point.eigenfield(), point.epsilon, "anisotropic", width=result.config.width)
        norms.append(defect_norm(polynomial_defect(unfolded)))
    return DefectScaling(epsilons=tuple(p.epsilon for p in result.points), norms=tuple(norms))


def trace_diagnostics(result: SweepResult) -> TraceReport:
    """Normal-trace trends of the first eigenfunction across the sweep."""

    samples = [(point.domain, point.eigenfield()) for point in result.points]
    return trace_identity_diagnostic(samples, result.config.alpha)
