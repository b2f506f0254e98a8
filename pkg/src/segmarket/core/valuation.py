"""Firm and worker valuations implied by the model primitives."""

from __future__ import annotations

from functools import lru_cache
from typing import Any

import structlog

from ..schemas.params import ModelParams, Valuations
from .exceptions import ParamDomainError

logger = structlog.get_logger(__name__)


def domain_violations(p: ModelParams) -> list[str]:
    """Admissibility conditions that ``p`` fails; empty when admissible."""
    problems: list[str] = []
    if not p.y_l - p.w_l > 0.0:
        problems.append("y_l must exceed w_l")
    if not p.y_h - p.w_h > 0.0:
        problems.append("y_h must exceed w_h")
    # w_l == b is the Q* = 0 boundary and stays admissible
    if not p.b <= p.w_l < p.w_h:
        problems.append("wages must satisfy b < w_l < w_h")
    if p.w_l - p.b < 0.0:
        problems.append("w_l - b must be non-negative")
    elif p.w_l - p.b > p.survival * (p.w_h - p.b) + 1e-15:
        problems.append("w_l - b must not exceed beta(1-phi)(w_h - b)")
    return problems


def check_domain(p: ModelParams) -> None:
    problems = domain_violations(p)
    if problems:
        raise ParamDomainError(problems)


@lru_cache(maxsize=512)
def derive_valuations(p: ModelParams) -> Valuations:
    """W_q, W_u, W_l, the indifference value V* and the critical hire chance Q*.

    V* is the unemployment value at which a qualified worker is indifferent
    about a low-tech offer. Q* is the per-period chance of a high-tech hire
    that makes unemployment worth exactly V*.
    """
    check_domain(p)
    survival = p.survival
    W_q = (p.y_h - p.w_h) / (1.0 - survival)
    W_u = -p.w_h / (1.0 - survival * (1.0 - p.r))
    W_l = (p.y_l - p.w_l) / (1.0 - survival)

    churn = 1.0 - survival
    flow_star = (p.w_l - churn * p.b) / survival
    V_star = flow_star / (1.0 - p.beta)
    Q_star = (flow_star - p.w_l) / (p.w_h - p.w_l)

    entry_viable = p.beta * max(W_q, W_l) > p.K
    if not entry_viable:
        logger.warning("entry_not_viable", K=p.K, W_q=W_q, W_l=W_l)
    return Valuations(
        W_q=W_q,
        W_u=W_u,
        W_l=W_l,
        V_star=V_star,
        Q_star=min(max(Q_star, 0.0), 1.0),
        entry_viable=entry_viable,
    )


def calibrate_to_unit_values(
    beta: float,
    phi: float,
    r: float,
    y_l: float,
    w_l: float,
    b: float,
    *,
    psi: float = 0.25,
    K: float = 0.01,
    lambda_f: float = 0.5,
    lambda_m: float = 0.5,
) -> ModelParams:
    """Pick w_h and y_h so that W_q = 1 and W_u = -1."""
    survival = beta * (1.0 - phi)
    w_h = 1.0 - survival * (1.0 - r)
    y_h = w_h + (1.0 - survival)
    if not b <= w_l < w_h:
        raise ParamDomainError([f"calibrated w_h={w_h:.6f} violates b < w_l < w_h"])
    params = ModelParams(
        beta=beta,
        phi=phi,
        r=r,
        psi=psi,
        b=b,
        y_l=y_l,
        w_l=w_l,
        y_h=y_h,
        w_h=w_h,
        K=K,
        lambda_f=lambda_f,
        lambda_m=lambda_m,
    )
    check_domain(params)
    return params


def with_overrides(p: ModelParams, recalibrate: bool = True, **updates: Any) -> ModelParams:
    """Copy of ``p`` with ``updates`` applied, optionally re-pinning W_q = 1, W_u = -1."""
    merged = p.model_dump() | updates
    if recalibrate:
        return calibrate_to_unit_values(
            merged["beta"],
            merged["phi"],
            merged["r"],
            merged["y_l"],
            merged["w_l"],
            merged["b"],
            psi=merged["psi"],
            K=merged["K"],
            lambda_f=merged["lambda_f"],
            lambda_m=merged["lambda_m"],
        )
    params = ModelParams(**merged)
    check_domain(params)
    return params


def firm_match_probability(p: ModelParams, sector_value: float) -> float | None:
    """Vacancy fill chance p_f implied by free entry into a sector of value ``sector_value``."""
    if sector_value <= 0.0:
        return None
    return min(p.K / (p.beta * sector_value), 1.0)
