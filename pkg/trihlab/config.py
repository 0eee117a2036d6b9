"""Runtime configuration for trihlab."""

from functools import lru_cache
from typing import Any, Literal

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Runtime settings loaded from the environment."""

    model_config = SettingsConfigDict(env_prefix="TRIHLAB_", extra="ignore")

    OUTPUT_DIR: str = Field(default="results")
    MAX_FREE_DOFS: int = Field(default=4000, ge=1)
    WORKERS: int = Field(default=1, ge=1)
    LOG_LEVEL: Literal["DEBUG", "INFO", "WARNING", "ERROR"] = Field(default="INFO")
    RESIDUAL_TOL: float = Field(default=1e-8, gt=0.0)
    CLUSTER_RTOL: float = Field(default=1e-8, gt=0.0)

    @field_validator("LOG_LEVEL", mode="before")
    @classmethod
    def _upper_level(cls, value: Any) -> Any:
        """Accept lower-case level names from the environment."""
        if isinstance(value, str):
            return value.strip().upper()
        return value


@lru_cache(maxsize=1)
def get_settings() -> Settings:
    """Return a cached ``Settings`` instance."""

    return Settings()
