"""Two-group steady states.

Groups are payoff identical and differ only in the pool quality firms
believe they face. Solvers search the orientation ``pi_m > pi_f``; the f
group is the one with the worse pool and hence the lower high-tech hire rate.
"""

from __future__ import annotations

from itertools import combinations
from typing import Callable, Sequence

import numpy as np
import structlog
from numpy.typing import NDArray

from ..core.config import get_settings
from ..core.exceptions import NoSymmetricMixedError
from ..core.numerics import (
    bisect_root,
    damped_newton,
    dedupe_points,
    first_root,
    scan_roots,
    sign_change_brackets,
)
from ..core.signal import SignalModel
from ..core.valuation import derive_valuations
from ..schemas.equilibrium import (
    EquilibriumKind,
    GroupDiagnostics,
    GroupEquilibrium,
    GroupKind,
    Prop6Row,
    Prop6Sweep,
)
from ..schemas.params import ModelParams
from .baseline_solver import (
    find_all_equilibria,
    g_function,
    hire_profit,
    hire_rates,
    steady_state_residual,
)

logger = structlog.get_logger(__name__)

FloatArray = NDArray[np.float64]

_LIFTED_KIND = {
    EquilibriumKind.LOW_TECH_ONLY: GroupKind.GROUP_LOW_TECH_ONLY,
    EquilibriumKind.HIGH_TECH_ONLY: GroupKind.GROUP_HIGH_TECH_ONLY,
}


def _a_q(pi: float, params: ModelParams, signal: SignalModel) -> float:
    return float(hire_rates(pi, params, signal)[0])


def entry_slack(
    pi_f: float,
    pi_m: float,
    alpha_f: float,
    alpha_m: float,
    params: ModelParams,
    signal: SignalModel,
    rates: tuple[float, float, float, float] | None = None,
) -> float:
    """Mass-weighted high-tech meeting value minus the low-tech one.

    ``rates`` overrides the optimal hire probabilities as
    ``(a_q_f, a_u_f, a_q_m, a_u_m)``.
    """
    v = derive_valuations(params)
    if rates is None:
        high_f = float(hire_profit(pi_f, params, signal))
        high_m = float(hire_profit(pi_m, params, signal))
    else:
        a_q_f, a_u_f, a_q_m, a_u_m = rates
        high_f = pi_f * a_q_f * v.W_q + (1.0 - pi_f) * a_u_f * v.W_u
        high_m = pi_m * a_q_m * v.W_q + (1.0 - pi_m) * a_u_m * v.W_u
    high = params.lambda_f * high_f + params.lambda_m * high_m
    low = (
        params.lambda_f * (pi_f * alpha_f + 1.0 - pi_f)
        + params.lambda_m * (pi_m * alpha_m + 1.0 - pi_m)
    ) * v.W_l
    return high - low


def group_residuals(
    pi_f: float,
    pi_m: float,
    alpha_f: float,
    alpha_m: float,
    p: float,
    params: ModelParams,
    signal: SignalModel,
) -> tuple[float, float, float]:
    """Steady-state residuals of both groups and the entry slack."""
    return (
        float(g_function(pi_f, alpha_f, p, params, signal)),
        float(g_function(pi_m, alpha_m, p, params, signal)),
        entry_slack(pi_f, pi_m, alpha_f, alpha_m, params, signal),
    )


def build_group_equilibrium(
    kind: GroupKind,
    pi_f: float,
    pi_m: float,
    alpha_f: float,
    alpha_m: float,
    p: float,
    params: ModelParams,
    signal: SignalModel,
    base_kind: EquilibriumKind | None = None,
    rates: tuple[float, float, float, float] | None = None,
    thresholds: tuple[float, float] | None = None,
) -> GroupEquilibrium:
    v = derive_valuations(params)
    tol = get_settings().KNIFE_EDGE_TOL
    if rates is None:
        a_q_f, a_u_f = (float(x) for x in hire_rates(pi_f, params, signal))
        a_q_m, a_u_m = (float(x) for x in hire_rates(pi_m, params, signal))
    else:
        a_q_f, a_u_f, a_q_m, a_u_m = rates
    residual_f = abs(float(steady_state_residual(pi_f, alpha_f, p, a_q_f, a_u_f, params)))
    residual_m = abs(float(steady_state_residual(pi_m, alpha_m, p, a_q_m, a_u_m, params)))
    slack = entry_slack(pi_f, pi_m, alpha_f, alpha_m, params, signal, (a_q_f, a_u_f, a_q_m, a_u_m))
    gap_f = p * a_q_f - v.Q_star
    gap_m = p * a_q_m - v.Q_star
    pure_gaps = [gap for gap, alpha in ((gap_f, alpha_f), (gap_m, alpha_m)) if alpha in (0.0, 1.0)]
    return GroupEquilibrium(
        kind=kind,
        base_kind=base_kind,
        pi_f=pi_f,
        pi_m=pi_m,
        alpha_f=alpha_f,
        alpha_m=alpha_m,
        p=p,
        lambda_f=params.lambda_f,
        lambda_m=params.lambda_m,
        threshold_f=thresholds[0] if thresholds else None,
        threshold_m=thresholds[1] if thresholds else None,
        diagnostics=GroupDiagnostics(
            residual_f=residual_f,
            residual_m=residual_m,
            entry_residual=abs(slack) if 0.0 < p < 1.0 else 0.0,
            entry_slack=slack,
            Q_gap_f=gap_f,
            Q_gap_m=gap_m,
            knife_edge=any(abs(gap) <= tol for gap in pure_gaps),
        ),
    )


def lift_symmetric(params: ModelParams, signal: SignalModel) -> list[GroupEquilibrium]:
    """Each one-group equilibrium as a two-group equilibrium with identical groups."""
    lifted = [
        build_group_equilibrium(
            _LIFTED_KIND.get(eq.kind, GroupKind.SYMMETRIC),
            eq.pi,
            eq.pi,
            eq.alpha,
            eq.alpha,
            eq.p,
            params,
            signal,
            base_kind=eq.kind,
        )
        for eq in find_all_equilibria(params, signal)
    ]
    logger.debug("symmetric_lift", count=len(lifted))
    return lifted


def _smallest_root(
    func: Callable[[FloatArray], FloatArray], lo: float, hi: float
) -> float | None:
    settings = get_settings()
    return first_root(func, lo, hi, settings.GROUP_GRID, settings.ROOT_XTOL)


def _pool_root(alpha: float, p: float, params: ModelParams, signal: SignalModel, lo: float = 0.0) -> float | None:
    """Smallest stationary pool quality above ``lo`` for a group with acceptance ``alpha``."""
    return _smallest_root(
        lambda x: np.asarray(g_function(x, alpha, p, params, signal)),
        lo,
        get_settings().PI_CEILING,
    )


def _refine_reduced(
    reduced: Callable[[float], float], grid: FloatArray
) -> list[float]:
    """Roots of a scalar reduced equation evaluated pointwise on ``grid``."""
    values = np.array([reduced(float(x)) for x in grid])
    roots = []
    for a, b in sign_change_brackets(grid, values):
        try:
            roots.append(bisect_root(reduced, a, b))
        except ValueError:
            logger.debug("reduced_bracket_lost", lo=a, hi=b)
    return roots


def _polish(
    system: Callable[[FloatArray], FloatArray],
    seed: Sequence[float],
    lower: Sequence[float],
    upper: Sequence[float],
) -> FloatArray | None:
    """Newton-polish a bracketed estimate; keep the estimate if the Jacobian is singular."""
    tol = get_settings().RESIDUAL_TOL
    result = damped_newton(system, seed, tol=1e-13, lower=lower, upper=upper)
    if result.residual < tol:
        return result.x
    base = np.asarray(system(np.asarray(seed, dtype=float)))
    if np.all(np.isfinite(base)) and float(np.linalg.norm(base)) < tol:
        return np.asarray(seed, dtype=float)
    logger.debug("polish_failed", seed=list(seed), residual=result.residual, singular=result.singular)
    return None


def _outer_grid() -> FloatArray:
    n = get_settings().GROUP_GRID
    return np.linspace(0.0, 1.0, n + 1)[1:-1]


def _acceptance_gap(pi_f: float, pi_m: float, params: ModelParams, signal: SignalModel) -> float:
    """Entry slack with every qualified worker refusing low-tech offers, per unit of W_l."""
    v = derive_valuations(params)
    return entry_slack(pi_f, pi_m, 0.0, 0.0, params, signal) / v.W_l


def _dedupe(solutions: list[GroupEquilibrium]) -> list[GroupEquilibrium]:
    keep = dedupe_points([(s.pi_f, s.pi_m, s.p) for s in solutions])
    return [solutions[i] for i in keep]


def solve_asym_fem_mixed(params: ModelParams, signal: SignalModel) -> list[GroupEquilibrium]:
    """Group f mixes over low-tech offers, group m refuses them."""
    if params.lambda_f <= 0.0 or params.lambda_m <= 0.0:
        return []
    settings = get_settings()
    tol = settings.KNIFE_EDGE_TOL
    v = derive_valuations(params)
    ceiling = settings.PI_CEILING

    def meeting_rate(pi_f: float) -> float:
        a = _a_q(pi_f, params, signal)
        return v.Q_star / a if a > 0.0 else np.inf

    def alpha_f(pi_f: float, pi_m: float) -> float:
        # acceptance that leaves firms indifferent given group m refuses
        return _acceptance_gap(pi_f, pi_m, params, signal) / (params.lambda_f * pi_f)

    def reduced(pi_f: float) -> float:
        p = meeting_rate(pi_f)
        if not p <= 1.0:
            return np.nan
        pi_m = _pool_root(0.0, p, params, signal)
        if pi_m is None:
            return np.nan
        return float(g_function(pi_f, alpha_f(pi_f, pi_m), p, params, signal))

    def system(x: FloatArray) -> FloatArray:
        pi_f, pi_m = float(x[0]), float(x[1])
        p = meeting_rate(pi_f)
        return np.array(
            [
                float(g_function(pi_m, 0.0, p, params, signal)),
                float(g_function(pi_f, alpha_f(pi_f, pi_m), p, params, signal)),
            ]
        )

    solutions: list[GroupEquilibrium] = []
    for pi_f0 in _refine_reduced(reduced, _outer_grid()):
        pi_m0 = _pool_root(0.0, meeting_rate(pi_f0), params, signal)
        if pi_m0 is None:
            continue
        x = _polish(system, [pi_f0, pi_m0], [1e-9, 1e-9], [ceiling, ceiling])
        if x is None:
            continue
        pi_f, pi_m = float(x[0]), float(x[1])
        p = meeting_rate(pi_f)
        a_f = alpha_f(pi_f, pi_m)
        if not (
            pi_m > pi_f + settings.DEDUP_TOL
            and 0.0 <= p <= 1.0
            and tol < a_f < 1.0 - tol
            and p * _a_q(pi_m, params, signal) > v.Q_star + tol
        ):
            logger.debug("fem_mixed_filtered", pi_f=pi_f, pi_m=pi_m, p=p, alpha_f=a_f)
            continue
        solutions.append(
            build_group_equilibrium(GroupKind.ASYM_FEM_MIXED, pi_f, pi_m, a_f, 0.0, p, params, signal)
        )

    solutions = _dedupe(solutions)
    logger.info("asym_fem_mixed_solved", count=len(solutions))
    return solutions


def _male_mixed_raw(params: ModelParams, signal: SignalModel) -> list[tuple[float, float, float, float]]:
    """Converged (pi_f, pi_m, alpha_m, p) with group m mixing, before worker filters."""
    settings = get_settings()
    v = derive_valuations(params)
    ceiling = settings.PI_CEILING

    def meeting_rate(pi_m: float) -> float:
        a = _a_q(pi_m, params, signal)
        return v.Q_star / a if a > 0.0 else np.inf

    def alpha_m(pi_f: float, pi_m: float) -> float:
        slack = entry_slack(pi_f, pi_m, 1.0, 0.0, params, signal)
        return slack / (params.lambda_m * pi_m * v.W_l)

    def reduced(pi_m: float) -> float:
        p = meeting_rate(pi_m)
        if not p <= 1.0:
            return np.nan
        pi_f = _pool_root(1.0, p, params, signal)
        if pi_f is None:
            return np.nan
        return float(g_function(pi_m, alpha_m(pi_f, pi_m), p, params, signal))

    def system(x: FloatArray) -> FloatArray:
        pi_f, pi_m = float(x[0]), float(x[1])
        p = meeting_rate(pi_m)
        return np.array(
            [
                float(g_function(pi_f, 1.0, p, params, signal)),
                float(g_function(pi_m, alpha_m(pi_f, pi_m), p, params, signal)),
            ]
        )

    raw: list[tuple[float, float, float, float]] = []
    for pi_m0 in _refine_reduced(reduced, _outer_grid()):
        pi_f0 = _pool_root(1.0, meeting_rate(pi_m0), params, signal)
        if pi_f0 is None:
            continue
        x = _polish(system, [pi_f0, pi_m0], [1e-9, 1e-9], [ceiling, ceiling])
        if x is None:
            continue
        pi_f, pi_m = float(x[0]), float(x[1])
        raw.append((pi_f, pi_m, alpha_m(pi_f, pi_m), meeting_rate(pi_m)))
    return raw


def solve_asym_male_mixed(params: ModelParams, signal: SignalModel) -> list[GroupEquilibrium]:
    """Group m mixes over low-tech offers, group f accepts them."""
    if params.lambda_f <= 0.0 or params.lambda_m <= 0.0:
        return []
    settings = get_settings()
    tol = settings.KNIFE_EDGE_TOL
    v = derive_valuations(params)
    solutions = [
        build_group_equilibrium(GroupKind.ASYM_MALE_MIXED, pi_f, pi_m, 1.0, a_m, p, params, signal)
        for pi_f, pi_m, a_m, p in _male_mixed_raw(params, signal)
        if pi_m > pi_f + settings.DEDUP_TOL
        and 0.0 <= p <= 1.0
        and tol < a_m < 1.0 - tol
        and p * _a_q(pi_f, params, signal) < v.Q_star - tol
    ]
    solutions = _dedupe(solutions)
    logger.info("asym_male_mixed_solved", count=len(solutions))
    return solutions


def male_mixed_min_check(params: ModelParams, signal: SignalModel) -> tuple[float | None, float, bool]:
    """Smallest f-group hire chance over male-mixing candidates against Q*."""
    v = derive_valuations(params)
    if params.lambda_f <= 0.0 or params.lambda_m <= 0.0:
        return None, v.Q_star, False
    rates = [
        p * _a_q(pi_f, params, signal)
        for pi_f, pi_m, _, p in _male_mixed_raw(params, signal)
        if pi_m > pi_f and 0.0 <= p <= 1.0
    ]
    if not rates:
        return None, v.Q_star, False
    smallest = min(rates)
    return smallest, v.Q_star, smallest < v.Q_star


def solve_asym_pure(params: ModelParams, signal: SignalModel) -> list[GroupEquilibrium]:
    """Group f accepts low-tech offers, group m refuses them, nobody mixes."""
    if params.lambda_f <= 0.0 or params.lambda_m <= 0.0:
        return []
    settings = get_settings()
    tol = settings.KNIFE_EDGE_TOL
    v = derive_valuations(params)
    ceiling = settings.PI_CEILING

    def pools(p: float) -> tuple[float, float] | None:
        pi_f = _pool_root(1.0, p, params, signal)
        pi_m = _pool_root(0.0, p, params, signal)
        if pi_f is None or pi_m is None:
            return None
        return pi_f, pi_m

    def reduced(p: float) -> float:
        found = pools(p)
        if found is None:
            return np.nan
        return entry_slack(found[0], found[1], 1.0, 0.0, params, signal)

    def system(x: FloatArray) -> FloatArray:
        pi_f, pi_m, p = float(x[0]), float(x[1]), float(x[2])
        return np.array(group_residuals(pi_f, pi_m, 1.0, 0.0, p, params, signal))

    n = settings.GROUP_GRID
    grid = np.linspace(0.0, 1.0, n + 1)[1:]
    solutions: list[GroupEquilibrium] = []
    for p0 in _refine_reduced(reduced, grid):
        found = pools(p0)
        if found is None:
            continue
        x = _polish(system, [found[0], found[1], p0], [1e-9, 1e-9, 0.0], [ceiling, ceiling, 1.0])
        if x is None:
            continue
        pi_f, pi_m, p = (float(c) for c in x)
        if not (
            pi_m > pi_f + settings.DEDUP_TOL
            and 0.0 <= p <= 1.0
            and p * _a_q(pi_f, params, signal) <= v.Q_star + tol
            and p * _a_q(pi_m, params, signal) >= v.Q_star - tol
        ):
            logger.debug("pure_filtered", pi_f=pi_f, pi_m=pi_m, p=p)
            continue
        solutions.append(build_group_equilibrium(GroupKind.ASYM_PURE, pi_f, pi_m, 1.0, 0.0, p, params, signal))

    solutions = _dedupe(solutions)
    logger.info("asym_pure_solved", count=len(solutions))
    return solutions


def solve_group_high_tech_only(params: ModelParams, signal: SignalModel) -> list[GroupEquilibrium]:
    """Only high tech enters and the groups sit at different stationary pools."""
    settings = get_settings()
    tol = settings.KNIFE_EDGE_TOL
    v = derive_valuations(params)
    roots = scan_roots(
        lambda x: np.asarray(g_function(x, 0.0, 1.0, params, signal)),
        0.0,
        settings.PI_CEILING,
        settings.SCAN_INTERVALS,
        settings.ROOT_XTOL,
    )

    def best_response(pi: float) -> float:
        return 1.0 if _a_q(pi, params, signal) < v.Q_star - tol else 0.0

    solutions = []
    for pi_f, pi_m in combinations(sorted(roots), 2):
        if pi_m - pi_f <= settings.DEDUP_TOL:
            continue
        a_f, a_m = best_response(pi_f), best_response(pi_m)
        if entry_slack(pi_f, pi_m, a_f, a_m, params, signal) < -tol:
            continue
        solutions.append(
            build_group_equilibrium(GroupKind.GROUP_HIGH_TECH_ONLY, pi_f, pi_m, a_f, a_m, 1.0, params, signal)
        )
    return solutions


def mirror(eq: GroupEquilibrium) -> GroupEquilibrium:
    """Swap group labels; the configuration kind is kept."""
    d = eq.diagnostics
    return eq.model_copy(
        update={
            "pi_f": eq.pi_m,
            "pi_m": eq.pi_f,
            "alpha_f": eq.alpha_m,
            "alpha_m": eq.alpha_f,
            "lambda_f": eq.lambda_m,
            "lambda_m": eq.lambda_f,
            "threshold_f": eq.threshold_m,
            "threshold_m": eq.threshold_f,
            "diagnostics": d.model_copy(
                update={
                    "residual_f": d.residual_m,
                    "residual_m": d.residual_f,
                    "Q_gap_f": d.Q_gap_m,
                    "Q_gap_m": d.Q_gap_f,
                }
            ),
        }
    )


def _asymmetric(params: ModelParams, signal: SignalModel) -> list[GroupEquilibrium]:
    return (
        solve_asym_fem_mixed(params, signal)
        + solve_asym_male_mixed(params, signal)
        + solve_asym_pure(params, signal)
        + solve_group_high_tech_only(params, signal)
    )


def solve_all_groups(
    params: ModelParams, signal: SignalModel, include_mirrors: bool = False
) -> list[GroupEquilibrium]:
    """Symmetric lifts followed by every discriminatory configuration."""
    found = lift_symmetric(params, signal) + _asymmetric(params, signal)
    if include_mirrors:
        swapped = params.model_copy(update={"lambda_f": params.lambda_m, "lambda_m": params.lambda_f})
        found += [mirror(eq) for eq in _asymmetric(swapped, signal)]
    return found


def prop6_sweep(
    params: ModelParams,
    signal: SignalModel,
    p_grid: Sequence[float] | None = None,
) -> Prop6Sweep:
    """Group masses that support pure discrimination near a symmetric mixed equilibrium.

    For each meeting rate the accepting group sits at the smallest stationary
    pool below the mixed pool quality and the refusing group at the smallest
    one above it; the masses then follow from firm indifference.
    """
    mixed = [eq for eq in find_all_equilibria(params, signal) if eq.kind is EquilibriumKind.TWO_SECTOR_MIXED]
    if not mixed:
        raise NoSymmetricMixedError("no symmetric equilibrium with mixing workers at these parameters")
    v = derive_valuations(params)
    pi_star, p_star = mixed[0].pi, mixed[0].p

    if p_grid is None:
        grid = np.linspace(0.5 * p_star, min(1.0, 1.5 * p_star), 41)
        grid = np.unique(np.append(grid, p_star))
    else:
        grid = np.asarray(sorted(p_grid), dtype=float)

    rows: list[Prop6Row] = []
    for p in grid:
        p = float(p)
        pi_f = _smallest_root(lambda x: np.asarray(g_function(x, 1.0, p, params, signal)), 0.0, pi_star)
        pi_m = _pool_root(0.0, p, params, signal, lo=pi_star)
        if pi_f is None or pi_m is None:
            rows.append(Prop6Row(p=p, pi_f=pi_f, pi_m=pi_m, lambda_f=None, lambda_m=None, valid=False))
            continue
        accept_side = v.W_l - float(hire_profit(pi_f, params, signal))
        refuse_side = (1.0 - pi_m) * v.W_l - float(hire_profit(pi_m, params, signal))
        if accept_side == refuse_side:
            rows.append(Prop6Row(p=p, pi_f=pi_f, pi_m=pi_m, lambda_f=None, lambda_m=None, valid=False))
            continue
        lambda_m = accept_side / (accept_side - refuse_side)
        valid = (
            0.0 < lambda_m < 1.0
            and p * _a_q(pi_f, params, signal) < v.Q_star < p * _a_q(pi_m, params, signal)
        )
        rows.append(
            Prop6Row(p=p, pi_f=pi_f, pi_m=pi_m, lambda_f=1.0 - lambda_m, lambda_m=lambda_m, valid=valid)
        )

    masses = [row.lambda_m for row in rows if row.valid and row.lambda_m is not None]
    increasing = bool(np.all(np.diff(masses) > 0.0)) if len(masses) >= 2 else None
    logger.info("prop6_sweep_complete", valid=len(masses), lambda_m_increasing=increasing)
    return Prop6Sweep(pi_star=pi_star, p_star=p_star, rows=rows, lambda_m_increasing=increasing)
