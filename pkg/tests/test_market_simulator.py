import math
from typing import Callable

import numpy as np
import pytest

from segmarket.core.exceptions import NoSymmetricMixedError, NonConvergenceError, PreconditionError
from segmarket.core.signal import SignalModel
from segmarket.schemas.params import ModelParams
from segmarket.services.baseline_solver import find_all_equilibria
from segmarket.services.market_simulator import (
    FlowState,
    Policy,
    ThresholdMode,
    flow_oracle,
    flow_step,
    fragility_experiment,
    initial_state,
    monte_carlo_run,
    run_flow,
    steady_state_pools,
)


def _total(state: FlowState) -> float:
    return state.qualified_total + state.unqualified_total


def test_initial_state_starts_at_population_share(example1: ModelParams) -> None:
    state = initial_state(example1)
    assert state.pi == pytest.approx(example1.psi)
    assert state.unemployed == pytest.approx(0.5)
    with pytest.raises(PreconditionError):
        initial_state(example1, unemployed=0.0)


def test_flow_step_conserves_mass(example1: ModelParams, triangular: SignalModel) -> None:
    policy = Policy(p=0.7, alpha=0.4, threshold_mode=ThresholdMode.ADAPTIVE)
    state = initial_state(example1)
    for _ in range(200):
        state = flow_step(state, policy, example1, triangular)
        assert _total(state) == pytest.approx(1.0, abs=1e-12)
        assert state.qualified_total == pytest.approx(example1.psi, abs=1e-12)


def test_steady_state_pools_are_fixed_points(example2: ModelParams, triangular: SignalModel) -> None:
    for eq in find_all_equilibria(example2, triangular):
        policy = Policy.for_equilibrium(eq, example2, triangular)
        state = steady_state_pools(policy, example2, triangular)
        stepped = flow_step(state, policy, example2, triangular)
        assert state.pi == pytest.approx(eq.pi, abs=1e-9)
        for name in ("U_q", "U_u", "E_qh", "E_ql", "E_uh", "E_ul"):
            assert getattr(stepped, name) == pytest.approx(getattr(state, name), abs=1e-12)


def test_adaptive_steady_state_needs_pool(example1: ModelParams, triangular: SignalModel) -> None:
    with pytest.raises(PreconditionError):
        steady_state_pools(Policy(p=0.5, alpha=0.0, threshold_mode=ThresholdMode.ADAPTIVE), example1, triangular)


def test_fixed_policy_needs_threshold(example1: ModelParams, triangular: SignalModel) -> None:
    with pytest.raises(PreconditionError):
        Policy(p=0.5, alpha=0.0).rates(0.2, example1, triangular)


@pytest.mark.parametrize(
    "fixture", ["example1", "example2", "low_tech_example", "high_tech_example", "accept_example"]
)
def test_oracle_agrees_with_analytic_equilibria(
    fixture: str, request: pytest.FixtureRequest, triangular: SignalModel
) -> None:
    params: ModelParams = request.getfixturevalue(fixture)
    for eq in find_all_equilibria(params, triangular):
        policy = Policy.for_equilibrium(eq, params, triangular)
        assert flow_oracle(policy, params, triangular) == pytest.approx(eq.pi, abs=1e-6)


def test_oracle_low_tech_only_stays_at_population_share(example1: ModelParams, triangular: SignalModel) -> None:
    policy = Policy(p=0.0, alpha=1.0, threshold=0.5)
    assert flow_oracle(policy, example1, triangular) == pytest.approx(example1.psi, abs=1e-9)


def test_oracle_rejects_non_positive_tolerance(example1: ModelParams, triangular: SignalModel) -> None:
    policy = Policy(p=0.5, alpha=0.0, threshold=0.8)
    with pytest.raises(PreconditionError):
        flow_oracle(policy, example1, triangular, tol=0.0)


def test_oracle_reports_non_convergence(example1: ModelParams, triangular: SignalModel) -> None:
    eq = find_all_equilibria(example1, triangular)[0]
    policy = Policy.for_equilibrium(eq, example1, triangular)
    with pytest.raises(NonConvergenceError) as excinfo:
        flow_oracle(policy, example1, triangular, max_iter=1)
    assert excinfo.value.iterations == 1
    assert len(excinfo.value.last_steps) == 1
    assert not excinfo.value.oscillating


def test_run_flow_frame(example1: ModelParams, triangular: SignalModel) -> None:
    eq = find_all_equilibria(example1, triangular)[0]
    frame = run_flow(Policy.for_equilibrium(eq, example1, triangular), example1, triangular, periods=1000)
    assert list(frame.columns) == ["period", "pi", "U_q", "U_u", "E_qh", "E_ql", "E_uh", "E_ul"]
    assert len(frame) == 1001
    assert frame["period"].iloc[0] == 0
    assert frame["pi"].iloc[0] == pytest.approx(example1.psi)
    assert frame["pi"].iloc[-1] == pytest.approx(eq.pi, abs=1e-6)


def test_monte_carlo_is_reproducible(example1: ModelParams, triangular: SignalModel) -> None:
    policy = Policy(p=0.8, alpha=0.0, threshold=0.8)
    first = monte_carlo_run(1_000, 50, 11, policy, example1, triangular)
    second = monte_carlo_run(1_000, 50, 11, policy, example1, triangular)
    assert first.pi_series == second.pi_series
    assert len(first.pi_series) == 50
    with pytest.raises(PreconditionError):
        monte_carlo_run(99, 10, 0, policy, example1, triangular)


def test_monte_carlo_all_qualified(calibrate: Callable[..., ModelParams], triangular: SignalModel) -> None:
    params = calibrate(0.9, 0.06, psi=1.0)
    result = monte_carlo_run(500, 40, 3, Policy(p=0.5, alpha=0.5, threshold=0.5), params, triangular)
    assert all(pi == 1.0 for pi in result.pi_series)


@pytest.mark.slow
def test_monte_carlo_matches_equilibrium(example1: ModelParams, triangular: SignalModel) -> None:
    eq = find_all_equilibria(example1, triangular)[0]
    policy = Policy.for_equilibrium(eq, example1, triangular)
    result = monte_carlo_run(100_000, 500, 0, policy, example1, triangular)
    assert abs(result.pi_final_mean - eq.pi) < 3.0 * result.pi_final_sd + 1e-3


@pytest.mark.slow
def test_monte_carlo_noise_shrinks_with_population(example1: ModelParams, triangular: SignalModel) -> None:
    eq = find_all_equilibria(example1, triangular)[0]
    policy = Policy.for_equilibrium(eq, example1, triangular)
    limit = flow_oracle(policy, example1, triangular)
    spread, error = [], []
    for n_agents in (1_000, 10_000, 100_000):
        runs = [monte_carlo_run(n_agents, 300, seed, policy, example1, triangular) for seed in (1, 2, 3)]
        spread.append(np.mean([run.pi_final_sd for run in runs]))
        error.append(math.sqrt(np.mean([(run.pi_final_mean - limit) ** 2 for run in runs])))
    assert spread[0] > spread[1] > spread[2]
    assert error[2] < error[0]


def test_fragility_without_perturbation(example2: ModelParams, triangular: SignalModel) -> None:
    report = fragility_experiment(example2, triangular, 0.0, periods=100)
    assert report.gap_series == [0.0] * 100
    assert report.returned and not report.diverged
    assert report.pi_star == pytest.approx(0.2355, abs=5e-4)


@pytest.mark.slow
def test_fragility_reports_both_directions(example2: ModelParams, triangular: SignalModel) -> None:
    up = fragility_experiment(example2, triangular, 1e-3, periods=300)
    down = fragility_experiment(example2, triangular, -1e-3, periods=300)
    assert len(up.gap_series) == len(up.p_series) == 300
    assert up.gap_series[0] > 0 > down.gap_series[0]
    assert all(0.0 <= p <= 1.0 for p in up.p_series)
    assert up.max_gap >= abs(up.final_gap)
    assert all(math.isfinite(g) for g in down.gap_series)


def test_fragility_needs_mixed_equilibrium(example1: ModelParams, triangular: SignalModel) -> None:
    with pytest.raises(NoSymmetricMixedError):
        fragility_experiment(example1, triangular, 1e-3, periods=10)
