from .equilibrium import (
    Bounds,
    Candidate,
    CorollaryScan,
    Equilibrium,
    EquilibriumKind,
    GroupEquilibrium,
    GroupKind,
    Prop6Sweep,
    QuotaMode,
    QuotaReport,
)
from .params import ModelParams, Valuations

__all__ = [
    "Bounds",
    "Candidate",
    "CorollaryScan",
    "Equilibrium",
    "EquilibriumKind",
    "GroupEquilibrium",
    "GroupKind",
    "ModelParams",
    "Prop6Sweep",
    "QuotaMode",
    "QuotaReport",
    "Valuations",
]
