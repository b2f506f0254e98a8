from collections.abc import Iterator
from typing import Callable

import numpy as np
import pytest

from segmarket.core.exceptions import OutOfRegionError, PreconditionError
from segmarket.core.signal import SignalModel
from segmarket.core.valuation import calibrate_to_unit_values, derive_valuations
from segmarket.schemas.equilibrium import EquilibriumKind
from segmarket.schemas.params import ModelParams
from segmarket.services.baseline_solver import (
    alpha_indifference,
    compute_bounds,
    corollary_phi_scan,
    enumerate_candidates,
    find_all_equilibria,
    g_function,
    hire_rates,
)
from segmarket.services.market_simulator import Policy, flow_oracle


def _candidate(params: ModelParams, signal: SignalModel, kind: EquilibriumKind):
    return next(c for c in enumerate_candidates(params, signal) if c.kind is kind)


def test_g_vanishes_at_low_tech_steady_state(example1: ModelParams, triangular: SignalModel) -> None:
    assert g_function(example1.psi, 1.0, 0.0, example1, triangular) == pytest.approx(0.0, abs=1e-12)
    assert g_function(1.0, 0.5, 0.5, example1, triangular) == -np.inf


def test_g_is_affine_in_acceptance_and_meeting_rate(example1: ModelParams, triangular: SignalModel) -> None:
    g = [g_function(0.2, a, 0.4, example1, triangular) for a in (0.0, 0.5, 1.0)]
    assert g[1] == pytest.approx(0.5 * (g[0] + g[2]))
    g = [g_function(0.2, 0.3, p, example1, triangular) for p in (0.0, 0.5, 1.0)]
    assert g[1] == pytest.approx(0.5 * (g[0] + g[2]))


def test_example_one_bounds(example1: ModelParams, triangular: SignalModel) -> None:
    bounds = compute_bounds(example1, triangular)
    assert bounds.pi_low == pytest.approx(0.16469, abs=5e-5)
    assert bounds.pi_high == pytest.approx(0.18019, abs=5e-5)
    assert hire_rates(bounds.pi_low, example1, triangular)[0] == pytest.approx(0.30227, abs=5e-5)
    assert hire_rates(bounds.pi_low, example1, triangular)[1] == pytest.approx(0.02713, abs=5e-5)


def test_example_one_unique_equilibrium(example1: ModelParams, triangular: SignalModel) -> None:
    equilibria = find_all_equilibria(example1, triangular)
    assert [eq.kind for eq in equilibria] == [EquilibriumKind.TWO_SECTOR_REJECT]
    eq = equilibria[0]
    assert eq.pi == pytest.approx(0.1647, abs=1e-4)
    assert eq.p == pytest.approx(0.8707, abs=5e-4)
    assert eq.alpha == 0.0
    assert eq.diagnostics.Q_gap > 0
    assert eq.diagnostics.p_f is not None and 0.0 < eq.diagnostics.p_f <= 1.0

    rejected = _candidate(example1, triangular, EquilibriumKind.TWO_SECTOR_ACCEPT)
    assert not rejected.accepted
    assert rejected.p == pytest.approx(0.6514, abs=5e-4)
    assert rejected.Q_gap > 0
    assert rejected.reason == "hire_rate_above_q_star"


def test_example_two_three_equilibria(example2: ModelParams, triangular: SignalModel) -> None:
    bounds = compute_bounds(example2, triangular)
    assert bounds.pi_low == pytest.approx(0.210383, abs=1e-5)
    assert bounds.pi_high == pytest.approx(0.236757, abs=1e-5)
    assert derive_valuations(example2).Q_star == pytest.approx(0.10419, abs=1e-5)

    equilibria = find_all_equilibria(example2, triangular)
    assert [eq.kind for eq in equilibria] == [
        EquilibriumKind.TWO_SECTOR_REJECT,
        EquilibriumKind.TWO_SECTOR_ACCEPT,
        EquilibriumKind.TWO_SECTOR_MIXED,
    ]
    reject, accept, mixed = equilibria
    assert reject.p == pytest.approx(0.78379, abs=5e-4)
    assert accept.p == pytest.approx(0.165808, abs=5e-4)
    assert mixed.pi == pytest.approx(0.2355, abs=5e-4)
    assert 0.0 < mixed.alpha < 1.0
    assert abs(mixed.diagnostics.Q_gap) < 1e-8
    assert bounds.pi_low < mixed.pi < bounds.pi_high


def test_low_tech_only_example(low_tech_example: ModelParams, triangular: SignalModel) -> None:
    equilibria = find_all_equilibria(low_tech_example, triangular)
    assert [eq.kind for eq in equilibria] == [EquilibriumKind.LOW_TECH_ONLY]
    assert equilibria[0].pi == pytest.approx(0.075)

    reject = _candidate(low_tech_example, triangular, EquilibriumKind.TWO_SECTOR_REJECT)
    assert reject.p == pytest.approx(0.4626, abs=5e-4)
    assert reject.Q_gap == pytest.approx(-0.0504, abs=5e-4)
    assert reject.reason == "hire_rate_below_q_star"

    accept = _candidate(low_tech_example, triangular, EquilibriumKind.TWO_SECTOR_ACCEPT)
    assert accept.p == pytest.approx(2.36927, abs=1e-3)
    assert accept.reason == "psi_below_pi_high"


def test_high_tech_only_example(high_tech_example: ModelParams, triangular: SignalModel) -> None:
    equilibria = find_all_equilibria(high_tech_example, triangular)
    assert [eq.kind for eq in equilibria] == [EquilibriumKind.HIGH_TECH_ONLY]
    assert equilibria[0].pi < high_tech_example.psi
    assert equilibria[0].p == 1.0

    reject = _candidate(high_tech_example, triangular, EquilibriumKind.TWO_SECTOR_REJECT)
    assert reject.p == pytest.approx(1.12423, abs=1e-3)
    assert reject.reason == "p_out_of_range"
    accept = _candidate(high_tech_example, triangular, EquilibriumKind.TWO_SECTOR_ACCEPT)
    assert accept.p == pytest.approx(1.129, abs=2e-3)
    assert accept.reason == "p_out_of_range"


def test_accepting_example(accept_example: ModelParams, triangular: SignalModel) -> None:
    bounds = compute_bounds(accept_example, triangular)
    assert bounds.pi_low == pytest.approx(0.132268, abs=1e-5)
    assert bounds.pi_high == pytest.approx(0.141990, abs=1e-5)
    assert derive_valuations(accept_example).W_l == pytest.approx(0.020161, abs=1e-6)

    equilibria = find_all_equilibria(accept_example, triangular)
    assert [eq.kind for eq in equilibria] == [EquilibriumKind.TWO_SECTOR_ACCEPT]
    assert equilibria[0].p == pytest.approx(0.8433, abs=5e-4)
    assert equilibria[0].diagnostics.Q_gap == pytest.approx(-0.0844, abs=5e-4)

    reject = _candidate(accept_example, triangular, EquilibriumKind.TWO_SECTOR_REJECT)
    assert not reject.accepted
    assert reject.p == pytest.approx(0.9289, abs=1e-3)
    assert reject.Q_gap == pytest.approx(-0.0774, abs=1e-3)


@pytest.mark.parametrize(("psi", "p_reject"), [(0.25, 0.72957), (0.2, 0.65565)])
def test_low_tech_coexists_with_two_sector(
    psi: float, p_reject: float, calibrate: Callable[..., ModelParams], triangular: SignalModel
) -> None:
    params = calibrate(0.99, 0.06, psi=psi)
    equilibria = find_all_equilibria(params, triangular)
    assert [eq.kind for eq in equilibria] == [
        EquilibriumKind.LOW_TECH_ONLY,
        EquilibriumKind.TWO_SECTOR_REJECT,
        EquilibriumKind.TWO_SECTOR_MIXED,
    ]
    assert equilibria[1].p == pytest.approx(p_reject, abs=5e-4)
    if psi == 0.25:
        bounds = compute_bounds(params, triangular)
        assert bounds.pi_low == pytest.approx(0.234798, abs=1e-5)
        assert bounds.pi_high == pytest.approx(0.268414, abs=1e-5)
        assert derive_valuations(params).Q_star == pytest.approx(0.08078, abs=1e-5)


def test_equilibria_satisfy_steady_state(
    example1: ModelParams, example2: ModelParams, accept_example: ModelParams, triangular: SignalModel
) -> None:
    for params in (example1, example2, accept_example):
        for eq in find_all_equilibria(params, triangular):
            assert eq.diagnostics.residual < 1e-8
            assert abs(g_function(eq.pi, eq.alpha, eq.p, params, triangular)) < 1e-8
            assert 0.0 <= eq.p <= 1.0
            assert 0.0 <= eq.alpha <= 1.0


def test_alpha_indifference(example2: ModelParams, triangular: SignalModel) -> None:
    bounds = compute_bounds(example2, triangular)
    assert alpha_indifference(bounds.pi_low, example2, triangular) == pytest.approx(0.0, abs=1e-6)
    assert alpha_indifference(bounds.pi_high, example2, triangular) == pytest.approx(1.0, abs=1e-6)
    inside = [alpha_indifference(x, example2, triangular, bounds) for x in np.linspace(bounds.pi_low, bounds.pi_high, 9)]
    assert np.all(np.diff(inside) > 0)
    with pytest.raises(OutOfRegionError):
        alpha_indifference(0.5, example2, triangular)


def test_full_population_rejected(example1: ModelParams, triangular: SignalModel) -> None:
    params = example1.model_copy(update={"psi": 1.0})
    with pytest.raises(PreconditionError):
        enumerate_candidates(params, triangular)


def test_high_tech_only_needs_separations(high_tech_example: ModelParams, triangular: SignalModel) -> None:
    scan = corollary_phi_scan(high_tech_example, triangular, [1e-4, 0.15])
    assert scan.high_tech_exists == [(1e-4, False), (0.15, True)]
    assert scan.phi_star == 1e-4
    assert not scan.flagged


def _random_calibrations(seed: int, count: int) -> Iterator[ModelParams]:
    """Draws with an active low-tech sector and unit high-tech values."""
    rng = np.random.default_rng(seed)
    drawn = 0
    while drawn < count:
        beta, phi, r = rng.uniform(0.8, 0.99), rng.uniform(0.03, 0.2), rng.uniform(0.3, 0.9)
        psi, b = rng.uniform(0.1, 0.8), rng.uniform(0.05, 0.3)
        survival = beta * (1.0 - phi)
        w_h = 1.0 - survival * (1.0 - r)
        if w_h <= b + 1e-3:
            continue
        w_l = b + rng.uniform() * survival * (w_h - b) * 0.99
        y_l = w_l + rng.uniform(0.01, 1.0) * (1.0 - survival) * 0.99
        yield calibrate_to_unit_values(beta, phi, r, y_l, w_l, b, psi=psi)
        drawn += 1


@pytest.mark.slow
def test_an_equilibrium_always_exists(triangular: SignalModel) -> None:
    checked = 0
    for params in _random_calibrations(2024, 500):
        assert find_all_equilibria(params, triangular), params
        checked += 1
    assert checked == 500


def test_g_positive_at_lower_bound_without_high_tech(triangular: SignalModel) -> None:
    covered = 0
    for params in _random_calibrations(7, 200):
        pi_low = compute_bounds(params, triangular).pi_low
        if params.psi < pi_low:
            continue
        covered += 1
        assert g_function(pi_low, 0.0, 0.0, params, triangular) > 0.0
    assert covered > 0


@pytest.mark.parametrize("fixture", ["example1", "example2", "low_tech_example"])
def test_g_at_bounds_is_affine_in_meeting_rate(
    fixture: str, request: pytest.FixtureRequest, triangular: SignalModel
) -> None:
    params: ModelParams = request.getfixturevalue(fixture)
    bounds = compute_bounds(params, triangular)
    for pi, alpha in ((bounds.pi_low, 0.0), (bounds.pi_high, 1.0)):
        g = [float(g_function(pi, alpha, p, params, triangular)) for p in (0.0, 0.5, 1.0)]
        assert g[1] == pytest.approx(0.5 * (g[0] + g[2]), abs=1e-12)


@pytest.mark.parametrize("signal", [SignalModel.power(2.0), SignalModel.power(0.5)], ids=["power2", "power0.5"])
def test_solver_with_power_signal(example1: ModelParams, signal: SignalModel) -> None:
    equilibria = find_all_equilibria(example1, signal)
    assert equilibria
    for eq in equilibria:
        assert g_function(eq.pi, eq.alpha, eq.p, example1, signal) == pytest.approx(0.0, abs=1e-7)
        policy = Policy.for_equilibrium(eq, example1, signal)
        assert flow_oracle(policy, example1, signal) == pytest.approx(eq.pi, abs=1e-6)


@pytest.mark.parametrize("fixture", ["example1", "example2"])
def test_solver_with_tabulated_signal(
    fixture: str, request: pytest.FixtureRequest, triangular: SignalModel
) -> None:
    params: ModelParams = request.getfixturevalue(fixture)
    theta = np.linspace(0.0, 1.0, 1001)
    tabulated = SignalModel.from_grid(theta, 2.0 * theta, 2.0 * (1.0 - theta))
    expected = find_all_equilibria(params, triangular)
    found = find_all_equilibria(params, tabulated)
    assert [eq.kind for eq in found] == [eq.kind for eq in expected]
    for got, want in zip(found, expected):
        assert got.pi == pytest.approx(want.pi, abs=1e-4)
        assert got.p == pytest.approx(want.p, abs=1e-4)
