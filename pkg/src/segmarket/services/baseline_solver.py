"""Steady-state equilibria of the one-group economy."""

from __future__ import annotations

from typing import Any, Iterable, Sequence

import numpy as np
import structlog
from numpy.typing import NDArray

from ..core.config import get_settings
from ..core.exceptions import (
    InternalInconsistencyError,
    NoBoundError,
    OutOfRegionError,
    PreconditionError,
)
from ..core.numerics import bisect_root, scan_roots
from ..core.signal import SignalModel, expected_hire_profit, hire_probabilities
from ..core.valuation import derive_valuations, firm_match_probability, with_overrides
from ..schemas.equilibrium import (
    KIND_ORDER,
    Bounds,
    Candidate,
    CorollaryScan,
    Equilibrium,
    EquilibriumDiagnostics,
    EquilibriumKind,
)
from ..schemas.params import ModelParams

logger = structlog.get_logger(__name__)

FloatArray = NDArray[np.float64]


def _out(values: FloatArray, like: object) -> float | FloatArray:
    if np.ndim(like) == 0:
        return float(np.asarray(values).reshape(-1)[0])
    return values


def hire_rates(
    pi: float | FloatArray, params: ModelParams, signal: SignalModel
) -> tuple[float | FloatArray, float | FloatArray]:
    """(A_q, A_u) at pool quality ``pi`` under the optimal threshold."""
    v = derive_valuations(params)
    return hire_probabilities(signal, pi, v.W_q, v.W_u)


def hire_profit(pi: float | FloatArray, params: ModelParams, signal: SignalModel) -> float | FloatArray:
    v = derive_valuations(params)
    return expected_hire_profit(signal, pi, v.W_q, v.W_u)


def steady_state_residual(
    pi: float | FloatArray,
    alpha: float | FloatArray,
    p: float | FloatArray,
    a_q: float | FloatArray,
    a_u: float | FloatArray,
    params: ModelParams,
) -> float | FloatArray:
    """Unqualified outflow-weighted balance minus the qualified one.

    Zero exactly when a pool of quality ``pi`` is stationary under the given
    hire probabilities; ``-inf`` at ``pi = 1``.
    """
    x = np.atleast_1d(np.asarray(pi, dtype=float))
    with np.errstate(divide="ignore", invalid="ignore"):
        unqualified = 1.0 + np.asarray(p) * np.asarray(a_u) / params.high_tech_exit + (1.0 - np.asarray(p)) / params.phi
        odds = (1.0 - params.psi) / (1.0 - x) * x / params.psi
        qualified = 1.0 + np.asarray(p) * np.asarray(a_q) / params.phi + (1.0 - np.asarray(p)) * np.asarray(alpha) / params.phi
        g = unqualified - odds * qualified
    g = np.where(x >= 1.0, -np.inf, g)
    return _out(np.asarray(g, dtype=float), pi)


def g_function(
    pi: float | FloatArray,
    alpha: float | FloatArray,
    p: float | FloatArray,
    params: ModelParams,
    signal: SignalModel,
) -> Any:
    """Steady-state residual G(pi, alpha, p) with the optimal hire probabilities."""
    grid = np.atleast_1d(np.asarray(pi, dtype=float))
    a_q, a_u = hire_rates(np.clip(grid, 0.0, 1.0), params, signal)
    return _out(np.asarray(steady_state_residual(grid, alpha, p, a_q, a_u, params)), pi)


def compute_bounds(params: ModelParams, signal: SignalModel) -> Bounds:
    """Pool qualities at which firms are indifferent between sectors.

    ``pi_low`` assumes qualified workers refuse low-tech offers, ``pi_high``
    that they accept them.
    """
    settings = get_settings()
    v = derive_valuations(params)

    def refusing(x: float) -> float:
        return float((1.0 - x) * v.W_l - hire_profit(x, params, signal))

    def accepting(x: float) -> float:
        return float(v.W_l - hire_profit(x, params, signal))

    found: dict[str, float] = {}
    for name, func in (("pi_low", refusing), ("pi_high", accepting)):
        f_low, f_high = func(0.0), func(1.0)
        if not (f_low > 0.0 > f_high):
            logger.error("bound_not_bracketed", bound=name, f_low=f_low, f_high=f_high)
            raise NoBoundError(name, f_low, f_high)
        found[name] = bisect_root(func, 0.0, 1.0, xtol=settings.BOUND_XTOL)

    bounds = Bounds(**found)
    logger.debug("bounds_computed", pi_low=bounds.pi_low, pi_high=bounds.pi_high)
    return bounds


def alpha_unclipped(pi: FloatArray, params: ModelParams, signal: SignalModel) -> FloatArray:
    v = derive_valuations(params)
    profit = np.asarray(hire_profit(pi, params, signal))
    with np.errstate(divide="ignore", invalid="ignore"):
        return (profit - (1.0 - pi) * v.W_l) / (pi * v.W_l)


def alpha_indifference(
    pi: float, params: ModelParams, signal: SignalModel, bounds: Bounds | None = None
) -> float:
    """Acceptance probability that leaves firms indifferent between sectors."""
    bounds = bounds or compute_bounds(params, signal)
    tol = get_settings().KNIFE_EDGE_TOL
    if not bounds.pi_low - tol <= pi <= bounds.pi_high + tol:
        raise OutOfRegionError(
            f"pi={pi:.6g} outside [{bounds.pi_low:.6g}, {bounds.pi_high:.6g}]"
        )
    value = float(alpha_unclipped(np.array([pi]), params, signal)[0])
    return min(max(value, 0.0), 1.0)


def _linear_p(pi: float, alpha: float, params: ModelParams, signal: SignalModel) -> float | None:
    """Root in p of the affine map p -> G(pi, alpha, p)."""
    g0 = g_function(pi, alpha, 0.0, params, signal)
    g1 = g_function(pi, alpha, 1.0, params, signal)
    if g0 == g1:
        return None
    return g0 / (g0 - g1)


def _near(value: float, edges: Iterable[float], tol: float) -> bool:
    return any(abs(value - edge) <= tol for edge in edges)


def enumerate_candidates(params: ModelParams, signal: SignalModel) -> list[Candidate]:
    """Every steady-state candidate of the five classes, with its verdict."""
    if params.psi >= 1.0:
        raise PreconditionError("equilibrium enumeration needs psi < 1")
    settings = get_settings()
    tol = settings.KNIFE_EDGE_TOL
    v = derive_valuations(params)
    bounds = compute_bounds(params, signal)
    pi_low, pi_high = bounds.pi_low, bounds.pi_high
    psi = params.psi
    candidates: list[Candidate] = []

    def a_q(pi: float) -> float:
        return float(hire_rates(pi, params, signal)[0])

    # Only low tech enters
    low_ok = psi <= pi_high + tol
    candidates.append(
        Candidate(
            kind=EquilibriumKind.LOW_TECH_ONLY,
            pi=psi,
            alpha=1.0,
            p=0.0,
            Q_gap=-v.Q_star,
            residual=abs(g_function(psi, 1.0, 0.0, params, signal)),
            accepted=low_ok,
            reason="" if low_ok else "psi_above_pi_high",
            knife_edge=abs(psi - pi_high) <= tol,
        )
    )

    # Only high tech enters
    for root in scan_roots(
        lambda x: g_function(x, 0.0, 1.0, params, signal),
        0.0,
        settings.PI_CEILING,
        settings.SCAN_INTERVALS,
        settings.ROOT_XTOL,
    ):
        gap = a_q(root) - v.Q_star
        if root < pi_low - tol:
            alpha, accepted, reason = 1.0, False, "below_pi_low"
        elif root <= pi_high + tol:
            alpha, accepted = 0.0, gap >= -tol
            reason = "" if accepted else "hire_rate_below_q_star"
        else:
            alpha, accepted, reason = 1.0, True, ""
        candidates.append(
            Candidate(
                kind=EquilibriumKind.HIGH_TECH_ONLY,
                pi=root,
                alpha=alpha,
                p=1.0,
                Q_gap=gap,
                residual=abs(g_function(root, alpha, 1.0, params, signal)),
                accepted=accepted,
                reason=reason,
                knife_edge=_near(root, (pi_low, pi_high), tol) or abs(gap) <= tol,
            )
        )

    # Both sectors, qualified workers refuse low-tech offers
    p_reject = _linear_p(pi_low, 0.0, params, signal)
    if p_reject is not None:
        gap = p_reject * a_q(pi_low) - v.Q_star
        in_range = -tol <= p_reject <= 1.0 + tol
        accepted = in_range and gap >= -tol
        p_used = min(max(p_reject, 0.0), 1.0) if in_range else p_reject
        candidates.append(
            Candidate(
                kind=EquilibriumKind.TWO_SECTOR_REJECT,
                pi=pi_low,
                alpha=0.0,
                p=p_used,
                Q_gap=gap,
                residual=abs(g_function(pi_low, 0.0, p_used, params, signal)),
                accepted=accepted,
                reason="" if accepted else ("p_out_of_range" if not in_range else "hire_rate_below_q_star"),
                knife_edge=_near(p_reject, (0.0, 1.0), tol) or abs(gap) <= tol,
            )
        )

    # Both sectors, qualified workers accept low-tech offers
    p_accept = _linear_p(pi_high, 1.0, params, signal)
    if p_accept is not None:
        gap = p_accept * a_q(pi_high) - v.Q_star
        in_range = -tol <= p_accept <= 1.0 + tol
        crowded = g_function(pi_high, 1.0, 1.0, params, signal) <= tol
        accepted = psi >= pi_high - tol and crowded and in_range and gap <= tol
        if accepted:
            reason = ""
        elif psi < pi_high - tol:
            reason = "psi_below_pi_high"
        elif not in_range:
            reason = "p_out_of_range"
        elif not crowded:
            reason = "g_positive_at_full_entry"
        else:
            reason = "hire_rate_above_q_star"
        p_used = min(max(p_accept, 0.0), 1.0) if in_range else p_accept
        candidates.append(
            Candidate(
                kind=EquilibriumKind.TWO_SECTOR_ACCEPT,
                pi=pi_high,
                alpha=1.0,
                p=p_used,
                Q_gap=gap,
                residual=abs(g_function(pi_high, 1.0, p_used, params, signal)),
                accepted=accepted,
                reason=reason,
                knife_edge=_near(p_accept, (0.0, 1.0), tol) or abs(gap) <= tol or abs(psi - pi_high) <= tol,
            )
        )

    # Both sectors, qualified workers indifferent
    def mixing(x: FloatArray) -> FloatArray:
        aq = np.asarray(hire_rates(x, params, signal)[0])
        with np.errstate(divide="ignore", invalid="ignore"):
            p = np.where(aq > 0.0, v.Q_star / aq, np.inf)
        p = np.where(p <= 1.0, p, np.nan)
        alpha = alpha_unclipped(x, params, signal)
        return np.asarray(g_function(x, alpha, p, params, signal))

    for root in scan_roots(mixing, pi_low, pi_high, settings.SCAN_INTERVALS, settings.ROOT_XTOL):
        alpha = float(alpha_unclipped(np.array([root]), params, signal)[0])
        p = v.Q_star / a_q(root)
        interior = pi_low + tol < root < pi_high - tol
        accepted = interior and 0.0 < alpha < 1.0 and 0.0 <= p <= 1.0
        candidates.append(
            Candidate(
                kind=EquilibriumKind.TWO_SECTOR_MIXED,
                pi=root,
                alpha=min(max(alpha, 0.0), 1.0),
                p=p,
                Q_gap=p * a_q(root) - v.Q_star,
                residual=abs(g_function(root, alpha, p, params, signal)),
                accepted=accepted,
                reason="" if accepted else "coincides_with_bound",
                knife_edge=not interior,
            )
        )

    for candidate in candidates:
        if candidate.accepted and candidate.knife_edge:
            logger.warning("knife_edge_candidate", kind=candidate.kind.value, pi=candidate.pi, p=candidate.p)
        elif not candidate.accepted:
            logger.debug(
                "candidate_rejected",
                kind=candidate.kind.value,
                pi=candidate.pi,
                p=candidate.p,
                reason=candidate.reason,
            )
    return candidates


def _sector_value(candidate: Candidate, params: ModelParams, signal: SignalModel) -> float:
    v = derive_valuations(params)
    if candidate.kind is EquilibriumKind.HIGH_TECH_ONLY:
        return float(hire_profit(candidate.pi, params, signal))
    return v.W_l * (candidate.pi * candidate.alpha + 1.0 - candidate.pi)


def find_all_equilibria(params: ModelParams, signal: SignalModel) -> list[Equilibrium]:
    """The complete steady-state equilibrium set, ordered by kind then pool quality."""
    tol = get_settings().DEDUP_TOL
    accepted = [c for c in enumerate_candidates(params, signal) if c.accepted]
    if not accepted:
        raise InternalInconsistencyError(
            "no equilibrium found although one always exists; check scan resolution"
        )

    accepted.sort(key=lambda c: (KIND_ORDER[c.kind], c.pi))
    equilibria: list[Equilibrium] = []
    seen: list[tuple[float, float, float]] = []
    for c in accepted:
        point = (c.pi, c.alpha, c.p)
        duplicate = any(max(abs(a - b) for a, b in zip(point, other)) < tol for other in seen)
        seen.append(point)
        equilibria.append(
            Equilibrium(
                kind=c.kind,
                pi=c.pi,
                alpha=c.alpha,
                p=c.p,
                diagnostics=EquilibriumDiagnostics(
                    Q_gap=c.Q_gap,
                    residual=c.residual,
                    knife_edge=c.knife_edge,
                    duplicate=duplicate,
                    p_f=firm_match_probability(params, _sector_value(c, params, signal)),
                ),
            )
        )

    logger.info(
        "equilibria_found",
        count=len(equilibria),
        kinds=[eq.kind.value for eq in equilibria],
    )
    return equilibria


def corollary_phi_scan(
    params: ModelParams,
    signal: SignalModel,
    phi_grid: Sequence[float],
    recalibrate: bool = True,
) -> CorollaryScan:
    """Largest separation rate on the grid below which high tech never operates alone."""
    if params.r <= 0.0:
        raise PreconditionError("the high-tech-only exclusion needs a positive revelation rate r")
    grid = sorted(float(phi) for phi in phi_grid)
    if not grid:
        raise PreconditionError("phi_grid is empty")

    pattern: list[tuple[float, bool]] = []
    for phi in grid:
        scenario = with_overrides(params, recalibrate=recalibrate, phi=phi)
        kinds = {eq.kind for eq in find_all_equilibria(scenario, signal)}
        pattern.append((phi, EquilibriumKind.HIGH_TECH_ONLY in kinds))

    first = next((i for i, (_, exists) in enumerate(pattern) if exists), None)
    if first is None:
        phi_star, flagged = grid[-1], True
    elif first == 0:
        phi_star, flagged = grid[0], True
    else:
        phi_star = grid[first - 1]
        flagged = not all(exists for _, exists in pattern[first:])
    logger.info("corollary_scan_complete", phi_star=phi_star, flagged=flagged)
    return CorollaryScan(phi_star=phi_star, flagged=flagged, high_tech_exists=pattern)
