"""Pydantic records for trihlab results and check reports."""
from __future__ import annotations

from typing import Any, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, computed_field, field_validator

REFERENCES = ("A", "Ahat", "S", "D")
"""Limit operators: WBC on Ω, WBC plus the K1 term, SBC on Γ, DBC on Γ."""

ReferenceName = Literal["A", "Ahat", "S", "D"]


class CheckRecord(BaseModel):
    """One case of a numerical identity check."""

    model_config = ConfigDict(frozen=True)

    case: str
    lhs: float
    rhs: float
    residual: float
    threshold: float
    detail: dict[str, Any] = Field(default_factory=dict)

    @computed_field  # type: ignore[prop-decorator]
    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.threshold)


class SpectrumRecord(BaseModel):
    """Serializable view of an eigen solve."""

    name: str
    eigenvalues: list[float]
    residuals: list[float]
    clusters: list[int]
    warnings: list[str] = Field(default_factory=list)

    @field_validator("eigenvalues", "residuals", mode="before")
    @classmethod
    def _as_floats(cls, value: Any) -> Any:
        if value is None:
            return []
        return [float(item) for item in value]

    @classmethod
    def from_spectrum(cls, name: str, spectrum: Any) -> "SpectrumRecord":
        return cls(
            name=name,
            eigenvalues=spectrum.eigenvalues,
            residuals=spectrum.residuals,
            clusters=list(spectrum.clusters),
            warnings=list(spectrum.warnings),
        )


class SweepRow(BaseModel):
    """One line of the sweep table."""

    model_config = ConfigDict(frozen=True)

    alpha: float
    epsilon: float
    j: int = Field(ge=1)
    lam: float = Field(serialization_alias="lambda")
    residual: float
    gap_A: float
    gap_Ahat: float
    gap_S: float
    gap_D: float

    def as_row(self) -> list[float | int]:
        return [
            self.alpha,
            self.epsilon,
            self.j,
            self.lam,
            self.residual,
            self.gap_A,
            self.gap_Ahat,
            self.gap_S,
            self.gap_D,
        ]


SWEEP_HEADER = ["alpha", "epsilon", "j", "lambda", "residual", "gap_A", "gap_Ahat", "gap_S", "gap_D"]


class Verdict(BaseModel):
    """Closest limit reference at the smallest ε and the trend checks behind it.

    ``passed`` is ``None`` when the sweep does not take part in acceptance
    (exploratory regime or an empty ε list).
    """

    reference: Optional[str] = None
    expected: Optional[str] = None
    monotone: bool = False
    discrimination: bool = False
    gaps: dict[str, float] = Field(default_factory=dict)
    passed: Optional[bool] = None


class CellReport(BaseModel):
    """K1 values and diagnostics of a cell solve."""

    K1_energy: float
    K1_pairing: float
    K1_flux: Optional[float] = None
    K1_other_bottom: Optional[float] = None
    K1_deep: Optional[float] = None
    truncation_gap: Optional[float] = None
    depth_sensitivity: Optional[float] = None
    recommended_k1: float
    natural_residuals: dict[str, float] = Field(default_factory=dict)
    free_dofs: int
    depth: float
    bottom: str

    @classmethod
    def from_solution(cls, solution: Any) -> "CellReport":
        return cls(
            K1_energy=solution.K1_energy,
            K1_pairing=solution.K1_pairing,
            K1_flux=solution.K1_flux,
            K1_other_bottom=solution.K1_other_bottom,
            K1_deep=solution.K1_deep,
            truncation_gap=solution.truncation_gap,
            depth_sensitivity=solution.depth_sensitivity,
            recommended_k1=solution.recommended_k1,
            natural_residuals=dict(solution.natural_residuals),
            free_dofs=solution.space.n_free,
            depth=solution.problem.depth,
            bottom=solution.problem.bottom,
        )
