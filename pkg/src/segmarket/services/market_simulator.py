"""Population-balance iteration and agent simulation of the matching market.

Both simulators use the same period timing. Unemployed workers meet a firm,
are screened and decide whether to accept. Workers employed at the start of
the period separate at their exit rates. Flow iteration is exact and is the
reference against which analytic steady states are checked.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, replace
from enum import Enum

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field

from ..core.config import get_settings
from ..core.exceptions import NoSymmetricMixedError, NonConvergenceError, PreconditionError
from ..core.signal import SignalModel, hiring_threshold, rates_at_threshold
from ..core.valuation import derive_valuations
from ..schemas.equilibrium import Equilibrium, EquilibriumKind, GroupEquilibrium
from ..schemas.params import ModelParams
from .baseline_solver import find_all_equilibria, hire_rates
from .group_solver import entry_slack

logger = structlog.get_logger(__name__)


class ThresholdMode(str, Enum):
    FIXED = "fixed"
    ADAPTIVE = "adaptive"


class Policy(BaseModel):
    """Meeting rate, acceptance and screening rule held by the simulator."""

    p: float = Field(ge=0.0, le=1.0)
    alpha: float = Field(ge=0.0, le=1.0)
    threshold_mode: ThresholdMode = ThresholdMode.FIXED
    threshold: float | None = Field(default=None, ge=0.0, le=1.0)

    model_config = ConfigDict(frozen=True)

    @classmethod
    def for_equilibrium(cls, eq: Equilibrium, params: ModelParams, signal: SignalModel) -> "Policy":
        """Fix the screening threshold at its value in ``eq``."""
        v = derive_valuations(params)
        return cls(
            p=eq.p,
            alpha=eq.alpha,
            threshold=float(hiring_threshold(signal, eq.pi, v.W_q, v.W_u)),
        )

    @classmethod
    def for_group(
        cls, eq: GroupEquilibrium, group: str, params: ModelParams, signal: SignalModel
    ) -> "Policy":
        if group not in ("f", "m"):
            raise PreconditionError(f"group must be 'f' or 'm', got {group!r}")
        threshold = eq.threshold_f if group == "f" else eq.threshold_m
        if threshold is None:
            v = derive_valuations(params)
            pi = eq.pi_f if group == "f" else eq.pi_m
            threshold = float(hiring_threshold(signal, pi, v.W_q, v.W_u))
        return cls(p=eq.p, alpha=eq.alpha_f if group == "f" else eq.alpha_m, threshold=threshold)

    def rates(self, pi: float, params: ModelParams, signal: SignalModel) -> tuple[float, float]:
        if self.threshold_mode is ThresholdMode.ADAPTIVE:
            a_q, a_u = hire_rates(pi, params, signal)
        else:
            if self.threshold is None:
                raise PreconditionError("a fixed threshold policy needs a threshold")
            a_q, a_u = rates_at_threshold(signal, self.threshold)
        return float(a_q), float(a_u)

    def screening_threshold(self, pi: float, params: ModelParams, signal: SignalModel) -> float:
        if self.threshold_mode is ThresholdMode.ADAPTIVE:
            v = derive_valuations(params)
            return float(hiring_threshold(signal, pi, v.W_q, v.W_u))
        if self.threshold is None:
            raise PreconditionError("a fixed threshold policy needs a threshold")
        return self.threshold


@dataclass(frozen=True)
class FlowState:
    """Masses of one population by type and labour-market status."""

    U_q: float
    U_u: float
    E_qh: float
    E_ql: float
    E_uh: float
    E_ul: float

    @property
    def unemployed(self) -> float:
        return self.U_q + self.U_u

    @property
    def pi(self) -> float:
        total = self.unemployed
        return self.U_q / total if total > 0.0 else float("nan")

    @property
    def qualified_total(self) -> float:
        return self.U_q + self.E_qh + self.E_ql

    @property
    def unqualified_total(self) -> float:
        return self.U_u + self.E_uh + self.E_ul


def initial_state(params: ModelParams, unemployed: float = 0.5, mass: float = 1.0) -> FlowState:
    """Both types equally likely to be unemployed, so the pool starts at ``psi``."""
    if not 0.0 < unemployed <= 1.0:
        raise PreconditionError("initial unemployment share must lie in (0, 1]")
    q, u = mass * params.psi, mass * (1.0 - params.psi)
    return FlowState(
        U_q=q * unemployed,
        U_u=u * unemployed,
        E_qh=0.0,
        E_ql=q * (1.0 - unemployed),
        E_uh=0.0,
        E_ul=u * (1.0 - unemployed),
    )


def steady_state_pools(
    policy: Policy,
    params: ModelParams,
    signal: SignalModel,
    pi: float | None = None,
    mass: float = 1.0,
) -> FlowState:
    """Stationary masses under ``policy``; adaptive policies screen at ``pi``."""
    if policy.threshold_mode is ThresholdMode.ADAPTIVE and pi is None:
        raise PreconditionError("adaptive policies need the pool quality to screen at")
    a_q, a_u = policy.rates(pi if pi is not None else params.psi, params, signal)
    p, alpha = policy.p, policy.alpha
    phi, exit_u = params.phi, params.high_tech_exit
    u_q = mass * params.psi / (1.0 + (p * a_q + (1.0 - p) * alpha) / phi)
    u_u = mass * (1.0 - params.psi) / (1.0 + p * a_u / exit_u + (1.0 - p) / phi)
    return FlowState(
        U_q=u_q,
        U_u=u_u,
        E_qh=u_q * p * a_q / phi,
        E_ql=u_q * (1.0 - p) * alpha / phi,
        E_uh=u_u * p * a_u / exit_u,
        E_ul=u_u * (1.0 - p) / phi,
    )


def flow_step(state: FlowState, policy: Policy, params: ModelParams, signal: SignalModel) -> FlowState:
    """One synchronous period of hiring and separation."""
    pi = state.pi if state.unemployed > 0.0 else params.psi
    a_q, a_u = policy.rates(pi, params, signal)
    p, alpha, phi = policy.p, policy.alpha, params.phi

    E_qh = state.E_qh * (1.0 - phi) + state.U_q * p * a_q
    E_ql = state.E_ql * (1.0 - phi) + state.U_q * (1.0 - p) * alpha
    E_uh = state.E_uh * (1.0 - params.high_tech_exit) + state.U_u * p * a_u
    E_ul = state.E_ul * (1.0 - phi) + state.U_u * (1.0 - p)
    # closing on the type totals keeps mass exact
    return FlowState(
        U_q=max(state.qualified_total - E_qh - E_ql, 0.0),
        U_u=max(state.unqualified_total - E_uh - E_ul, 0.0),
        E_qh=E_qh,
        E_ql=E_ql,
        E_uh=E_uh,
        E_ul=E_ul,
    )


def _check_tolerance(tol: float) -> None:
    if not tol > 0.0:
        raise PreconditionError(f"oracle tolerance must be positive, got {tol}")


def flow_oracle(
    policy: Policy,
    params: ModelParams,
    signal: SignalModel,
    tol: float = 1e-12,
    max_iter: int = 200_000,
    state: FlowState | None = None,
) -> float:
    """Limit pool quality of the flow iteration under ``policy``."""
    _check_tolerance(tol)
    state = state or initial_state(params)
    previous = state.pi
    steps: deque[float] = deque(maxlen=10)
    for iteration in range(1, max_iter + 1):
        state = flow_step(state, policy, params, signal)
        step = state.pi - previous
        steps.append(step)
        previous = state.pi
        if abs(step) < tol:
            logger.debug("oracle_converged", pi=state.pi, iterations=iteration)
            return state.pi
    logger.error("oracle_not_converged", iterations=max_iter, last_step=steps[-1])
    raise NonConvergenceError(max_iter, list(steps))


def group_flow_oracle(
    policy_f: Policy,
    policy_m: Policy,
    params: ModelParams,
    signal: SignalModel,
    tol: float = 1e-12,
    max_iter: int = 200_000,
) -> tuple[float, float]:
    """Limit pool qualities of both groups, iterated per capita."""
    _check_tolerance(tol)
    states = [initial_state(params), initial_state(params)]
    policies = (policy_f, policy_m)
    previous = [s.pi for s in states]
    steps: deque[float] = deque(maxlen=10)
    for iteration in range(1, max_iter + 1):
        states = [flow_step(s, pol, params, signal) for s, pol in zip(states, policies)]
        moves = [s.pi - prev for s, prev in zip(states, previous)]
        previous = [s.pi for s in states]
        steps.append(max(moves, key=abs))
        if all(abs(m) < tol for m in moves):
            logger.debug("group_oracle_converged", pi_f=previous[0], pi_m=previous[1], iterations=iteration)
            return previous[0], previous[1]
    raise NonConvergenceError(max_iter, list(steps))


def run_flow(
    policy: Policy,
    params: ModelParams,
    signal: SignalModel,
    periods: int,
    state: FlowState | None = None,
) -> pd.DataFrame:
    """Time series of the flow iteration, one row per period starting at 0."""
    if periods < 1:
        raise PreconditionError("periods must be at least 1")
    state = state or initial_state(params)
    rows = [{"period": 0, "pi": state.pi, **state.__dict__}]
    for period in range(1, periods + 1):
        state = flow_step(state, policy, params, signal)
        rows.append({"period": period, "pi": state.pi, **state.__dict__})
    return pd.DataFrame(rows, columns=["period", "pi", "U_q", "U_u", "E_qh", "E_ql", "E_uh", "E_ul"])


class MonteCarloResult(BaseModel):
    seed: int
    n_agents: int
    pi_series: list[float]
    pi_final_mean: float
    pi_final_sd: float

    model_config = ConfigDict(frozen=True)


_UNEMPLOYED, _HIGH_TECH, _LOW_TECH = 0, 1, 2


def monte_carlo_run(
    n_agents: int,
    periods: int,
    seed: int,
    policy: Policy,
    params: ModelParams,
    signal: SignalModel,
) -> MonteCarloResult:
    """Simulate ``n_agents`` workers, starting unemployed, for ``periods`` periods.

    The pool quality carries forward unchanged through periods with nobody
    unemployed. Summary statistics use the last fifth of the series.
    """
    if n_agents < 100:
        raise PreconditionError("the agent simulation needs at least 100 agents")
    if periods < 1:
        raise PreconditionError("periods must be at least 1")

    rng = np.random.default_rng(seed)
    qualified = rng.random(n_agents) < params.psi
    status = np.full(n_agents, _UNEMPLOYED, dtype=np.int8)
    exit_rate = np.where(qualified, params.phi, params.high_tech_exit)
    pi_hat = float(qualified.mean())

    series: list[float] = []
    for _ in range(periods):
        separation_draw = rng.random(n_agents)
        meet_draw = rng.random(n_agents)
        signal_draw = rng.random(n_agents)
        accept_draw = rng.random(n_agents)

        unemployed = status == _UNEMPLOYED
        high_rate = np.where(status == _HIGH_TECH, exit_rate, params.phi)
        separates = ~unemployed & (separation_draw < high_rate)

        theta = np.where(
            qualified,
            signal.inverse_cdf(signal_draw, qualified=True),
            signal.inverse_cdf(signal_draw, qualified=False),
        )
        meets_high = meet_draw < policy.p
        hired = unemployed & meets_high & (theta >= policy.screening_threshold(pi_hat, params, signal))
        accepts = unemployed & ~meets_high & (~qualified | (accept_draw < policy.alpha))

        status = np.where(separates, _UNEMPLOYED, status)
        status[hired] = _HIGH_TECH
        status[accepts] = _LOW_TECH

        pool = status == _UNEMPLOYED
        if pool.any():
            pi_hat = float(qualified[pool].mean())
        series.append(pi_hat)

    tail = np.asarray(series[-max(1, periods // 5) :])
    result = MonteCarloResult(
        seed=seed,
        n_agents=n_agents,
        pi_series=series,
        pi_final_mean=float(tail.mean()),
        pi_final_sd=float(tail.std()),
    )
    logger.info("monte_carlo_complete", seed=seed, n_agents=n_agents, pi_mean=result.pi_final_mean)
    return result


class FragilityReport(BaseModel):
    epsilon: float
    periods: int
    pi_star: float
    p_star: float
    gap_series: list[float]
    p_series: list[float]
    final_gap: float
    max_gap: float
    diverged: bool
    returned: bool

    model_config = ConfigDict(frozen=True)


def _perturb(state: FlowState, epsilon: float) -> FlowState:
    """Shift pool quality by ``epsilon`` through low-tech jobs, keeping type totals."""
    moved = epsilon * state.unemployed
    shifted = replace(
        state,
        U_q=state.U_q + moved,
        E_ql=state.E_ql - moved,
        U_u=state.U_u - moved,
        E_ul=state.E_ul + moved,
    )
    if min(shifted.U_q, shifted.E_ql, shifted.U_u, shifted.E_ul) < 0.0:
        raise PreconditionError(f"perturbation {epsilon} leaves a negative mass")
    return shifted


def _best_response(current: float, chance: float, q_star: float, tol: float) -> float:
    if chance > q_star + tol:
        return 0.0
    if chance < q_star - tol:
        return 1.0
    return current


def fragility_experiment(
    params: ModelParams,
    signal: SignalModel,
    epsilon: float,
    periods: int = 2_000,
    speed: float = 0.05,
) -> FragilityReport:
    """Perturb one group away from the symmetric mixed equilibrium and let the market adjust.

    Each period firms rescreen at the current pools, workers best-respond to
    their group's hire chance and the high-tech share moves with the entry
    profit gap. The report is descriptive.
    """
    mixed = [eq for eq in find_all_equilibria(params, signal) if eq.kind is EquilibriumKind.TWO_SECTOR_MIXED]
    if not mixed:
        raise NoSymmetricMixedError("fragility needs a symmetric equilibrium with mixing workers")
    star = mixed[0]
    v = derive_valuations(params)
    tol = get_settings().KNIFE_EDGE_TOL

    start = steady_state_pools(Policy.for_equilibrium(star, params, signal), params, signal)
    state_f, state_m = start, _perturb(start, epsilon)
    alpha_f = alpha_m = star.alpha
    p = star.p

    gaps: list[float] = []
    shares: list[float] = []
    for _ in range(periods):
        pi_f, pi_m = state_f.pi, state_m.pi
        a_q_f = float(hire_rates(pi_f, params, signal)[0])
        a_q_m = float(hire_rates(pi_m, params, signal)[0])
        alpha_f = _best_response(alpha_f, p * a_q_f, v.Q_star, tol)
        alpha_m = _best_response(alpha_m, p * a_q_m, v.Q_star, tol)
        gap = entry_slack(pi_f, pi_m, alpha_f, alpha_m, params, signal)
        p = min(max(p + speed * gap / v.W_l, 0.0), 1.0)

        state_f = flow_step(state_f, Policy(p=p, alpha=alpha_f, threshold_mode=ThresholdMode.ADAPTIVE), params, signal)
        state_m = flow_step(state_m, Policy(p=p, alpha=alpha_m, threshold_mode=ThresholdMode.ADAPTIVE), params, signal)
        gaps.append(state_m.pi - state_f.pi)
        shares.append(p)

    final_gap = gaps[-1] if gaps else 0.0
    report = FragilityReport(
        epsilon=epsilon,
        periods=periods,
        pi_star=star.pi,
        p_star=star.p,
        gap_series=gaps,
        p_series=shares,
        final_gap=final_gap,
        max_gap=max((abs(g) for g in gaps), default=0.0),
        diverged=abs(final_gap) > 10.0 * abs(epsilon),
        returned=abs(final_gap) <= 0.1 * abs(epsilon),
    )
    logger.info(
        "fragility_complete",
        epsilon=epsilon,
        final_gap=report.final_gap,
        diverged=report.diverged,
        returned=report.returned,
    )
    return report
