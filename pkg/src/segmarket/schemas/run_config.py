"""Run files: model parameters, signal technology, solver and simulator options."""

from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Any

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from ..core.exceptions import ConfigError
from ..core.signal import SignalKind, SignalModel
from ..core.valuation import calibrate_to_unit_values, check_domain
from .params import ModelParams


class CalibrationBlock(BaseModel):
    """Primitives with w_h and y_h chosen so that W_q = 1 and W_u = -1."""

    beta: float = Field(gt=0.0, lt=1.0)
    phi: float = Field(gt=0.0, le=1.0)
    r: float = Field(ge=0.0, le=1.0)
    y_l: float
    w_l: float
    b: float = Field(ge=0.0)
    psi: float = Field(default=0.25, gt=0.0, le=1.0)
    K: float = Field(default=0.01, gt=0.0)
    lambda_f: float = Field(default=0.5, ge=0.0, le=1.0)
    lambda_m: float = Field(default=0.5, ge=0.0, le=1.0)

    model_config = ConfigDict(extra="forbid")


class SignalSection(BaseModel):
    kind: SignalKind = SignalKind.TRIANGULAR
    power: float | None = Field(default=None, gt=0.0)
    theta: list[float] | None = None
    density_q: list[float] | None = None
    density_u: list[float] | None = None

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def one_generic_source(self) -> "SignalSection":
        tables = (self.theta, self.density_q, self.density_u)
        if self.kind is SignalKind.TRIANGULAR:
            if self.power is not None or any(t is not None for t in tables):
                raise ValueError("triangular signals take no power or density tables")
        elif (self.power is None) == all(t is None for t in tables):
            raise ValueError("generic signals need either power or theta/density_q/density_u")
        elif self.power is None and any(t is None for t in tables):
            raise ValueError("density tables need theta, density_q and density_u together")
        return self

    def build(self) -> SignalModel:
        if self.kind is SignalKind.TRIANGULAR:
            return SignalModel.triangular()
        if self.power is not None:
            return SignalModel.power(self.power)
        assert self.theta is not None and self.density_q is not None and self.density_u is not None
        return SignalModel.from_grid(self.theta, self.density_q, self.density_u)


class SolverSection(BaseModel):
    scan_intervals: int | None = Field(default=None, ge=4)
    tol: float | None = Field(default=None, gt=0.0)
    group_grid: int | None = Field(default=None, ge=4)
    p_grid: list[float] | None = None

    model_config = ConfigDict(extra="forbid")

    def settings_overrides(self) -> dict[str, Any]:
        overrides: dict[str, Any] = {}
        if self.scan_intervals is not None:
            overrides["SCAN_INTERVALS"] = self.scan_intervals
        if self.tol is not None:
            overrides["ROOT_XTOL"] = self.tol
        if self.group_grid is not None:
            overrides["GROUP_GRID"] = self.group_grid
        return overrides


class SimMode(str, Enum):
    FLOW = "flow"
    MC = "mc"
    FRAGILITY = "fragility"


class SimSection(BaseModel):
    mode: SimMode = SimMode.FLOW
    n_agents: int = Field(default=10_000, ge=100)
    periods: int = Field(default=500, ge=1)
    seed: int = 0
    epsilon: float = 1e-3
    equilibrium_index: int = Field(default=0, ge=0)
    tol: float = Field(default=1e-12, gt=0.0)
    max_iter: int = Field(default=200_000, ge=1)

    model_config = ConfigDict(extra="forbid")


class RunConfig(BaseModel):
    params: ModelParams | None = None
    calibrate: CalibrationBlock | None = None
    signal: SignalSection = Field(default_factory=SignalSection)
    solver: SolverSection = Field(default_factory=SolverSection)
    sim: SimSection = Field(default_factory=SimSection)

    model_config = ConfigDict(extra="forbid")

    @model_validator(mode="after")
    def exactly_one_parameter_source(self) -> "RunConfig":
        if (self.params is None) == (self.calibrate is None):
            raise ValueError("give exactly one of 'params' or 'calibrate'")
        return self

    def model_params(self) -> ModelParams:
        if self.params is not None:
            check_domain(self.params)
            return self.params
        assert self.calibrate is not None
        block = self.calibrate
        return calibrate_to_unit_values(
            block.beta,
            block.phi,
            block.r,
            block.y_l,
            block.w_l,
            block.b,
            psi=block.psi,
            K=block.K,
            lambda_f=block.lambda_f,
            lambda_m=block.lambda_m,
        )


def _read(path: Path) -> Any:
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}", key="config") from exc
    try:
        if path.suffix.lower() in (".yaml", ".yml"):
            return yaml.safe_load(text)
        return json.loads(text)
    except (json.JSONDecodeError, yaml.YAMLError) as exc:
        raise ConfigError(f"{path} is not valid {path.suffix.lstrip('.') or 'json'}: {exc}", key="config") from exc


def load_run_config(path: Path | str) -> RunConfig:
    """Read, validate and domain-check a run file."""
    path = Path(path)
    data = _read(path)
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping", key="config")
    try:
        config = RunConfig.model_validate(data)
    except ValidationError as exc:
        first = exc.errors()[0]
        key = ".".join(str(part) for part in first["loc"]) or "config"
        raise ConfigError(first["msg"], key=key) from exc
    config.model_params()
    config.signal.build()
    return config
