from __future__ import annotations

from contextlib import contextmanager
from functools import lru_cache
from typing import Any, Iterator

from pydantic import field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

_LOG_LEVELS = ("DEBUG", "INFO", "WARNING", "ERROR")


class Settings(BaseSettings):
    """Numerical and runtime configuration loaded from ``SEGMARKET_*`` variables."""

    APP_NAME: str = "segmarket"
    APP_VERSION: str = "1.0.0"
    LOG: str = "WARNING"

    # Root finding
    SCAN_INTERVALS: int = 10_000
    ROOT_XTOL: float = 1e-12
    BOUND_XTOL: float = 1e-12
    PI_CEILING: float = 1.0 - 1e-9

    # Classification
    KNIFE_EDGE_TOL: float = 1e-9
    DEDUP_TOL: float = 1e-7
    RESIDUAL_TOL: float = 1e-8

    # Signal validation
    MLR_GRID_POINTS: int = 1_000
    MLR_TOL: float = 1e-12

    # Group systems
    NEWTON_STEP: float = 1e-7
    NEWTON_MAX_ITER: int = 100
    GROUP_GRID: int = 200
    QUOTA_GRID: int = 40

    REPORT_DECIMALS: int = 6

    model_config = SettingsConfigDict(
        env_prefix="SEGMARKET_",
        case_sensitive=True,
        env_file=".env",
        extra="ignore",
    )

    @field_validator("LOG", mode="before")
    @classmethod
    def normalise_log_level(cls, value: str) -> str:
        level = str(value).strip().upper()
        if level not in _LOG_LEVELS:
            raise ValueError(f"log level must be one of {', '.join(_LOG_LEVELS)}")
        return level

    @field_validator("SCAN_INTERVALS", "GROUP_GRID", "QUOTA_GRID", "MLR_GRID_POINTS")
    @classmethod
    def positive_grid(cls, value: int) -> int:
        if value < 4:
            raise ValueError("grid sizes must be at least 4")
        return value


@lru_cache
def get_settings() -> Settings:
    """Return a cached settings instance."""
    return Settings()


@contextmanager
def settings_override(**values: Any) -> Iterator[Settings]:
    """Temporarily replace fields of the cached settings."""
    settings = get_settings()
    previous = {name: getattr(settings, name) for name in values}
    try:
        for name, value in values.items():
            setattr(settings, name, value)
        yield settings
    finally:
        for name, value in previous.items():
            setattr(settings, name, value)
