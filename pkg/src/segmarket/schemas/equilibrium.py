from __future__ import annotations

from enum import Enum

from pydantic import BaseModel, ConfigDict


class EquilibriumKind(str, Enum):
    LOW_TECH_ONLY = "low_tech_only"
    HIGH_TECH_ONLY = "high_tech_only"
    TWO_SECTOR_REJECT = "two_sector_reject"
    TWO_SECTOR_ACCEPT = "two_sector_accept"
    TWO_SECTOR_MIXED = "two_sector_mixed"


KIND_ORDER = {kind: rank for rank, kind in enumerate(EquilibriumKind)}


class GroupKind(str, Enum):
    SYMMETRIC = "symmetric"
    ASYM_FEM_MIXED = "asym_fem_mixed"
    ASYM_MALE_MIXED = "asym_male_mixed"
    ASYM_PURE = "asym_pure"
    GROUP_LOW_TECH_ONLY = "group_low_tech_only"
    GROUP_HIGH_TECH_ONLY = "group_high_tech_only"


class QuotaMode(str, Enum):
    FLOW = "flow"
    STOCK = "stock"


class Bounds(BaseModel):
    pi_low: float
    pi_high: float

    model_config = ConfigDict(frozen=True)


# Shared numerical checks
class EquilibriumDiagnostics(BaseModel):
    Q_gap: float
    residual: float
    knife_edge: bool = False
    duplicate: bool = False
    p_f: float | None = None

    model_config = ConfigDict(frozen=True)


class Equilibrium(BaseModel):
    kind: EquilibriumKind
    pi: float
    alpha: float
    p: float
    diagnostics: EquilibriumDiagnostics

    model_config = ConfigDict(frozen=True)


# Every candidate considered during enumeration, accepted or not
class Candidate(BaseModel):
    kind: EquilibriumKind
    pi: float
    alpha: float
    p: float
    Q_gap: float
    residual: float
    accepted: bool
    reason: str = ""
    knife_edge: bool = False

    model_config = ConfigDict(frozen=True)


class GroupDiagnostics(BaseModel):
    residual_f: float
    residual_m: float
    entry_residual: float
    entry_slack: float
    Q_gap_f: float
    Q_gap_m: float
    knife_edge: bool = False

    model_config = ConfigDict(frozen=True)


class GroupEquilibrium(BaseModel):
    kind: GroupKind
    base_kind: EquilibriumKind | None = None
    pi_f: float
    pi_m: float
    alpha_f: float
    alpha_m: float
    p: float
    lambda_f: float
    lambda_m: float
    threshold_f: float | None = None
    threshold_m: float | None = None
    diagnostics: GroupDiagnostics

    model_config = ConfigDict(frozen=True)

    @property
    def is_asymmetric(self) -> bool:
        return self.kind in {GroupKind.ASYM_FEM_MIXED, GroupKind.ASYM_MALE_MIXED, GroupKind.ASYM_PURE} or (
            self.kind is GroupKind.GROUP_HIGH_TECH_ONLY and self.pi_f != self.pi_m
        )


class Prop6Row(BaseModel):
    p: float
    pi_f: float | None
    pi_m: float | None
    lambda_f: float | None
    lambda_m: float | None
    valid: bool

    model_config = ConfigDict(frozen=True)


class Prop6Sweep(BaseModel):
    pi_star: float
    p_star: float
    rows: list[Prop6Row]
    lambda_m_increasing: bool | None

    model_config = ConfigDict(frozen=True)


class QuotaReport(BaseModel):
    mode: QuotaMode
    asymmetric_survivors: list[GroupEquilibrium]
    symmetric_set: list[GroupEquilibrium]
    candidates_examined: int

    model_config = ConfigDict(frozen=True)


class CorollaryScan(BaseModel):
    phi_star: float
    flagged: bool
    high_tech_exists: list[tuple[float, bool]]

    model_config = ConfigDict(frozen=True)
