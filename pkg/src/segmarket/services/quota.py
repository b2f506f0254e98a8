"""Hiring quotas on the high-tech sector.

Firms must hire both groups in equal proportion, measured either by the
per-capita inflow into high-tech jobs or by the per-capita stock employed
there. Thresholds are then chosen jointly: the quota holds and the marginal
hires of the two groups have equal shadow cost. Pool qualities follow from
stationarity given those thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import structlog
from numpy.typing import NDArray

from ..core.config import get_settings
from ..core.numerics import bisect_root, damped_newton
from ..core.signal import SignalModel, posterior, rates_at_threshold
from ..core.valuation import derive_valuations
from ..schemas.equilibrium import GroupEquilibrium, GroupKind, QuotaMode, QuotaReport
from ..schemas.params import ModelParams
from .group_solver import build_group_equilibrium, entry_slack, lift_symmetric

logger = structlog.get_logger(__name__)

FloatArray = NDArray[np.float64]


@dataclass(frozen=True)
class GroupPool:
    """Stationary unemployment pool of one group at fixed hire rates."""

    a_q: float
    a_u: float
    u_q: float
    u_u: float

    @property
    def size(self) -> float:
        return self.u_q + self.u_u

    @property
    def pi(self) -> float:
        return self.u_q / self.size


@dataclass(frozen=True)
class QuotaPoint:
    """A threshold pair that satisfies the quota, with its firm-side residuals."""

    p: float
    alpha_f: float
    alpha_m: float
    s_f: float
    s_m: float
    pool_f: GroupPool
    pool_m: GroupPool
    entry: float
    foc: float


def stationary_pool(s: float, alpha: float, p: float, params: ModelParams, signal: SignalModel) -> GroupPool:
    """Per-capita unemployment of one group hiring at threshold ``s``."""
    a_q, a_u = (float(x) for x in rates_at_threshold(signal, s))
    qualified = 1.0 + (p * a_q + (1.0 - p) * alpha) / params.phi
    unqualified = 1.0 + p * a_u / params.high_tech_exit + (1.0 - p) / params.phi
    return GroupPool(a_q=a_q, a_u=a_u, u_q=params.psi / qualified, u_u=(1.0 - params.psi) / unqualified)


def high_tech_share(pool: GroupPool, p: float, mode: QuotaMode, params: ModelParams) -> float:
    """Per-capita high-tech hires (flow) or high-tech employment (stock)."""
    if mode is QuotaMode.FLOW:
        return p * (pool.a_q * pool.u_q + pool.a_u * pool.u_u)
    return p * (pool.a_q * pool.u_q / params.phi + pool.a_u * pool.u_u / params.high_tech_exit)


def _marginal_cost(s: float, pool: GroupPool, mode: QuotaMode, params: ModelParams, signal: SignalModel) -> float:
    """Marginal value of lowering the threshold per unit of quota used."""
    v = derive_valuations(params)
    pi = pool.pi
    point = np.array([s])
    fq = float(np.asarray(signal.density_q(point))[0])
    fu = float(np.asarray(signal.density_u(point))[0])
    density = pi * fq + (1.0 - pi) * fu
    if density <= 0.0:
        return 0.0
    belief = posterior(signal, s, pi)
    value = belief * v.W_q + (1.0 - belief) * v.W_u
    usage = density if mode is QuotaMode.FLOW else pi * fq / params.phi + (1.0 - pi) * fu / params.high_tech_exit
    return density * value / (pool.size * usage)


def _quota_point(
    kind: GroupKind,
    p: float,
    y: float,
    mode: QuotaMode,
    params: ModelParams,
    signal: SignalModel,
) -> QuotaPoint | None:
    """Evaluate a configuration at ``(p, y)``, solving the quota for the free threshold.

    ``y`` is the m-group threshold for pure and high-tech-only configurations
    and the mixing group's acceptance probability otherwise.
    """
    v = derive_valuations(params)
    pinned: float | None = None
    if kind is GroupKind.ASYM_FEM_MIXED or kind is GroupKind.ASYM_MALE_MIXED:
        if p <= 0.0 or v.Q_star / p > 1.0:
            return None
        # mixing group is held at exactly Q* per period
        pinned = float(signal.inverse_cdf(1.0 - v.Q_star / p, qualified=True))

    if kind is GroupKind.ASYM_FEM_MIXED:
        alpha_f, alpha_m = y, 0.0
    elif kind is GroupKind.ASYM_MALE_MIXED:
        alpha_f, alpha_m = 1.0, y
    else:
        alpha_f, alpha_m = 1.0, 0.0

    def pools(s_f: float, s_m: float) -> tuple[GroupPool, GroupPool]:
        return (
            stationary_pool(s_f, alpha_f, p, params, signal),
            stationary_pool(s_m, alpha_m, p, params, signal),
        )

    if kind is GroupKind.ASYM_FEM_MIXED:
        assert pinned is not None

        def split(s: float) -> tuple[float, float]:
            return pinned, s
    elif kind is GroupKind.ASYM_MALE_MIXED:
        assert pinned is not None

        def split(s: float) -> tuple[float, float]:
            return s, pinned
    else:

        def split(s: float) -> tuple[float, float]:
            return s, y

    def gap(s: float) -> float:
        pool_f, pool_m = pools(*split(s))
        return high_tech_share(pool_f, p, mode, params) - high_tech_share(pool_m, p, mode, params)

    lo_gap, hi_gap = gap(0.0), gap(1.0)
    if lo_gap == 0.0:
        s_free = 0.0
    elif hi_gap == 0.0:
        s_free = 1.0
    elif lo_gap * hi_gap > 0.0:
        return None
    else:
        s_free = bisect_root(gap, 0.0, 1.0)

    s_f, s_m = split(s_free)
    pool_f, pool_m = pools(s_f, s_m)
    if kind is GroupKind.GROUP_HIGH_TECH_ONLY:
        alpha_f = 1.0 if pool_f.a_q < v.Q_star else 0.0
        alpha_m = 1.0 if pool_m.a_q < v.Q_star else 0.0
    rates = (pool_f.a_q, pool_f.a_u, pool_m.a_q, pool_m.a_u)
    entry = entry_slack(pool_f.pi, pool_m.pi, alpha_f, alpha_m, params, signal, rates)
    foc = params.lambda_f * _marginal_cost(s_f, pool_f, mode, params, signal) + params.lambda_m * _marginal_cost(
        s_m, pool_m, mode, params, signal
    )
    return QuotaPoint(p, alpha_f, alpha_m, s_f, s_m, pool_f, pool_m, entry, foc)


def _worker_conditions_hold(kind: GroupKind, point: QuotaPoint, params: ModelParams) -> bool:
    settings = get_settings()
    tol = settings.KNIFE_EDGE_TOL
    q_star = derive_valuations(params).Q_star
    chance_f = point.p * point.pool_f.a_q
    chance_m = point.p * point.pool_m.a_q
    if point.pool_m.pi <= point.pool_f.pi + settings.DEDUP_TOL:
        return False
    if kind is GroupKind.ASYM_PURE:
        return chance_f <= q_star + tol and chance_m >= q_star - tol
    if kind is GroupKind.ASYM_FEM_MIXED:
        return tol < point.alpha_f < 1.0 - tol and chance_m > q_star + tol
    if kind is GroupKind.ASYM_MALE_MIXED:
        return tol < point.alpha_m < 1.0 - tol and chance_f < q_star - tol
    return point.entry >= -tol


def _to_equilibrium(kind: GroupKind, point: QuotaPoint, params: ModelParams, signal: SignalModel) -> GroupEquilibrium:
    return build_group_equilibrium(
        kind,
        point.pool_f.pi,
        point.pool_m.pi,
        point.alpha_f,
        point.alpha_m,
        point.p,
        params,
        signal,
        rates=(point.pool_f.a_q, point.pool_f.a_u, point.pool_m.a_q, point.pool_m.a_u),
        thresholds=(point.s_f, point.s_m),
    )


def _search_two_sector(
    kind: GroupKind, mode: QuotaMode, params: ModelParams, signal: SignalModel
) -> tuple[list[GroupEquilibrium], int]:
    """Grid-bracket entry and first-order residuals over ``(p, y)`` then polish."""
    settings = get_settings()
    n = settings.QUOTA_GRID
    p_grid = np.linspace(1.0 / n, 1.0, n)
    y_grid = np.linspace(0.0, 1.0, n) if kind is GroupKind.ASYM_PURE else np.linspace(0.5 / n, 1.0 - 0.5 / n, n)

    entry = np.full((n, n), np.nan)
    foc = np.full((n, n), np.nan)
    for i, p in enumerate(p_grid):
        for j, y in enumerate(y_grid):
            point = _quota_point(kind, float(p), float(y), mode, params, signal)
            if point is not None:
                entry[i, j], foc[i, j] = point.entry, point.foc

    def system(z: FloatArray) -> FloatArray:
        point = _quota_point(kind, float(z[0]), float(z[1]), mode, params, signal)
        if point is None:
            return np.array([np.nan, np.nan])
        return np.array([point.entry, point.foc])

    def changes_sign(values: FloatArray) -> bool:
        return bool(np.all(np.isfinite(values)) and values.min() <= 0.0 <= values.max())

    survivors: list[GroupEquilibrium] = []
    examined = 0
    for i in range(n - 1):
        for j in range(n - 1):
            if not (changes_sign(entry[i : i + 2, j : j + 2]) and changes_sign(foc[i : i + 2, j : j + 2])):
                continue
            examined += 1
            seed = [0.5 * (p_grid[i] + p_grid[i + 1]), 0.5 * (y_grid[j] + y_grid[j + 1])]
            result = damped_newton(system, seed, tol=1e-13, lower=[1e-9, 0.0], upper=[1.0, 1.0])
            if result.residual >= settings.RESIDUAL_TOL:
                continue
            point = _quota_point(kind, float(result.x[0]), float(result.x[1]), mode, params, signal)
            if point is None or not _worker_conditions_hold(kind, point, params):
                continue
            survivors.append(_to_equilibrium(kind, point, params, signal))
    return survivors, examined


def _search_high_tech_only(mode: QuotaMode, params: ModelParams, signal: SignalModel) -> tuple[list[GroupEquilibrium], int]:
    """Only high tech enters; scan the m-group threshold for a zero first-order residual."""
    settings = get_settings()
    grid = np.linspace(0.0, 1.0, 10 * settings.QUOTA_GRID + 1)

    def foc(s_m: float) -> float:
        point = _quota_point(GroupKind.GROUP_HIGH_TECH_ONLY, 1.0, s_m, mode, params, signal)
        return np.nan if point is None else point.foc

    values = np.array([foc(float(s)) for s in grid])
    survivors: list[GroupEquilibrium] = []
    examined = 0
    for k in range(len(grid) - 1):
        left, right = values[k], values[k + 1]
        if not (np.isfinite(left) and np.isfinite(right)) or left * right > 0.0:
            continue
        examined += 1
        try:
            s_m = bisect_root(foc, float(grid[k]), float(grid[k + 1])) if left * right < 0.0 else float(grid[k])
        except ValueError:
            continue
        point = _quota_point(GroupKind.GROUP_HIGH_TECH_ONLY, 1.0, s_m, mode, params, signal)
        if point is not None and _worker_conditions_hold(GroupKind.GROUP_HIGH_TECH_ONLY, point, params):
            survivors.append(_to_equilibrium(GroupKind.GROUP_HIGH_TECH_ONLY, point, params, signal))
    return survivors, examined


_SEARCHES: dict[GroupKind, Callable[[QuotaMode, ModelParams, SignalModel], tuple[list[GroupEquilibrium], int]]] = {
    GroupKind.ASYM_PURE: lambda mode, params, signal: _search_two_sector(GroupKind.ASYM_PURE, mode, params, signal),
    GroupKind.ASYM_FEM_MIXED: lambda mode, params, signal: _search_two_sector(
        GroupKind.ASYM_FEM_MIXED, mode, params, signal
    ),
    GroupKind.ASYM_MALE_MIXED: lambda mode, params, signal: _search_two_sector(
        GroupKind.ASYM_MALE_MIXED, mode, params, signal
    ),
    GroupKind.GROUP_HIGH_TECH_ONLY: _search_high_tech_only,
}


def quota_check(
    params: ModelParams, signal: SignalModel, mode: QuotaMode = QuotaMode.FLOW
) -> QuotaReport:
    """Search every discriminatory configuration under the quota.

    Symmetric equilibria satisfy the quota trivially and are reported as the
    surviving set alongside any asymmetric point that passes all conditions.
    """
    survivors: list[GroupEquilibrium] = []
    examined = 0
    if params.lambda_f > 0.0 and params.lambda_m > 0.0:
        for kind, search in _SEARCHES.items():
            found, seen = search(mode, params, signal)
            logger.debug("quota_configuration_searched", kind=kind.value, candidates=seen, survivors=len(found))
            survivors.extend(found)
            examined += seen

    if survivors:
        logger.warning("quota_asymmetric_survivor", mode=mode.value, count=len(survivors))
    symmetric = lift_symmetric(params, signal)
    logger.info(
        "quota_check_complete",
        mode=mode.value,
        examined=examined,
        asymmetric=len(survivors),
        symmetric=len(symmetric),
    )
    return QuotaReport(
        mode=mode,
        asymmetric_survivors=survivors,
        symmetric_set=symmetric,
        candidates_examined=examined,
    )
