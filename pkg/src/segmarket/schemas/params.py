from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator


# Exogenous primitives of the economy
class ModelParams(BaseModel):
    beta: float = Field(gt=0.0, lt=1.0, description="discount factor")
    phi: float = Field(gt=0.0, le=1.0, description="exogenous separation probability")
    r: float = Field(ge=0.0, le=1.0, description="type revelation probability in high tech")
    psi: float = Field(gt=0.0, le=1.0, description="population share of qualified workers")
    b: float = Field(ge=0.0, description="flow value of unemployment")
    y_l: float
    w_l: float
    y_h: float
    w_h: float
    K: float = Field(default=0.01, gt=0.0, description="vacancy flow cost")
    lambda_f: float = Field(default=0.5, ge=0.0, le=1.0)
    lambda_m: float = Field(default=0.5, ge=0.0, le=1.0)

    model_config = ConfigDict(frozen=True, extra="forbid")

    @model_validator(mode="after")
    def masses_sum_to_one(self) -> "ModelParams":
        if abs(self.lambda_f + self.lambda_m - 1.0) > 1e-12:
            raise ValueError("lambda_f + lambda_m must equal 1")
        return self

    @property
    def high_tech_exit(self) -> float:
        """Per-period exit rate of unqualified high-tech employees."""
        return self.phi + (1.0 - self.phi) * self.r

    @property
    def survival(self) -> float:
        """beta * (1 - phi), the discounted match survival factor."""
        return self.beta * (1.0 - self.phi)


# Constants derived from the primitives
class Valuations(BaseModel):
    W_q: float
    W_u: float
    W_l: float
    V_star: float
    Q_star: float
    entry_viable: bool

    model_config = ConfigDict(frozen=True)
