import numpy as np
import pytest

from segmarket.core.exceptions import DegenerateSignalError, InvalidSignalError
from segmarket.core.signal import (
    CornerFlag,
    SignalKind,
    SignalModel,
    expected_hire_profit,
    hire_probabilities,
    hiring_rule,
    hiring_threshold,
    posterior,
    rates_at_threshold,
)


def _notched() -> SignalModel:
    """Likelihood ratio theta/(1-theta), both densities vanish at 0.5."""
    return SignalModel(
        density_q=lambda t: 6.0 * t * (2.0 * t - 1.0) ** 2,
        density_u=lambda t: 6.0 * (1.0 - t) * (2.0 * t - 1.0) ** 2,
        cdf_q=lambda t: 6.0 * t**4 - 8.0 * t**3 + 3.0 * t**2,
        cdf_u=lambda t: 1.0 - (6.0 * (1.0 - t) ** 4 - 8.0 * (1.0 - t) ** 3 + 3.0 * (1.0 - t) ** 2),
    )


def test_posterior_values(triangular: SignalModel) -> None:
    assert posterior(triangular, 0.5, 0.3) == pytest.approx(0.3)
    assert posterior(triangular, 0.8, 0.25) == pytest.approx(4.0 / 7.0)
    assert posterior(triangular, 0.9, 0.0) == 0.0
    assert posterior(triangular, 0.1, 1.0) == 1.0


def test_posterior_is_monotone(triangular: SignalModel) -> None:
    values = [posterior(triangular, theta, 0.4) for theta in np.linspace(0.01, 0.99, 50)]
    assert np.all(np.diff(values) > 0)
    values = [posterior(triangular, 0.6, pi) for pi in np.linspace(0.01, 0.99, 50)]
    assert np.all(np.diff(values) > 0)


def test_posterior_degenerate_signal() -> None:
    with pytest.raises(DegenerateSignalError):
        posterior(_notched(), 0.5, 0.3)


def test_triangular_threshold_closed_form(triangular: SignalModel) -> None:
    assert hiring_threshold(triangular, 0.25, 1.0, -1.0) == pytest.approx(0.75)
    grid = np.linspace(0.05, 0.95, 19)
    np.testing.assert_allclose(hiring_threshold(triangular, grid, 1.0, -1.0), 1.0 - grid, atol=1e-12)


def test_hire_probabilities_at_unit_values(triangular: SignalModel) -> None:
    a_q, a_u = hire_probabilities(triangular, 0.25, 1.0, -1.0)
    assert a_q == pytest.approx(0.4375)
    assert a_u == pytest.approx(0.0625)
    grid = np.linspace(0.0, 1.0, 11)
    a_q, a_u = hire_probabilities(triangular, grid, 1.0, -1.0)
    np.testing.assert_allclose(a_q, grid * (2.0 - grid), atol=1e-12)
    np.testing.assert_allclose(a_u, grid**2, atol=1e-12)


def test_hire_profit_endpoints(triangular: SignalModel) -> None:
    assert expected_hire_profit(triangular, 0.0, 1.0, -1.0) == pytest.approx(0.0, abs=1e-12)
    assert expected_hire_profit(triangular, 1.0, 1.0, -1.0) == pytest.approx(1.0)
    # with W_q = 1 and W_u = -1 the triangular profit is pi squared
    assert expected_hire_profit(triangular, 0.3, 1.0, -1.0) == pytest.approx(0.09)


@pytest.mark.parametrize(
    ("model", "pi", "W_q", "W_u"),
    [
        (SignalModel.triangular(), 0.1, 1.0, -1.0),
        (SignalModel.triangular(), 0.25, 1.0, -1.0),
        (SignalModel.triangular(), 0.6, 1.0, -1.0),
        (SignalModel.triangular(), 0.25, 1.0, -0.5),
        (SignalModel.power(2.0), 0.3, 1.0, -1.0),
        (SignalModel.power(2.0), 0.7, 0.5, -2.0),
    ],
)
def test_threshold_matches_brute_force_cut(model: SignalModel, pi: float, W_q: float, W_u: float) -> None:
    cuts = np.linspace(0.0, 1.0, 100_001)
    a_q, a_u = rates_at_threshold(model, cuts)
    objective = pi * a_q * W_q + (1.0 - pi) * a_u * W_u
    best_cut = cuts[np.argmax(objective)]
    assert abs(best_cut - hiring_threshold(model, pi, W_q, W_u)) <= cuts[1] - cuts[0] + 1e-9
    assert expected_hire_profit(model, pi, W_q, W_u) >= np.max(objective) - 1e-9


def test_triangular_threshold_with_uneven_values(triangular: SignalModel) -> None:
    assert hiring_threshold(triangular, 0.25, 1.0, -0.5) == pytest.approx(0.6)


@pytest.mark.parametrize("model", [SignalModel.triangular(), SignalModel.power(2.0)], ids=["triangular", "power2"])
def test_hire_profit_increases_with_belief(model: SignalModel) -> None:
    grid = np.linspace(0.01, 0.99, 99)
    profit = expected_hire_profit(model, grid, 1.0, -1.0)
    assert np.all(np.diff(profit) > 0)
    a_q, a_u = hire_probabilities(model, grid, 1.0, -1.0)
    assert np.all(a_q > a_u)


def test_corner_flags(triangular: SignalModel) -> None:
    assert hiring_rule(triangular, 1.0, 1.0, -1.0).flag is CornerFlag.HIRE_ALL
    assert hiring_rule(triangular, 0.0, 1.0, -1.0).flag is CornerFlag.HIRE_NONE
    assert hiring_rule(triangular, 0.4, 1.0, -1.0).flag is CornerFlag.INTERIOR
    never = hiring_rule(triangular, 0.4, -0.5, -1.0)
    assert (never.flag, never.threshold) == (CornerFlag.NEVER_HIRE, 1.0)
    always = hiring_rule(triangular, 0.4, 1.0, 0.2)
    assert (always.flag, always.threshold) == (CornerFlag.ALWAYS_HIRE, 0.0)


def test_generic_power_threshold() -> None:
    model = SignalModel.power(2.0)
    assert model.kind is SignalKind.GENERIC
    assert hiring_threshold(model, 0.5, 1.0, -1.0) == pytest.approx(0.5, abs=1e-9)


def test_power_one_matches_triangular(triangular: SignalModel) -> None:
    grid = np.linspace(0.05, 0.95, 7)
    np.testing.assert_allclose(
        hiring_threshold(SignalModel.power(1.0), grid, 1.0, -1.0),
        hiring_threshold(triangular, grid, 1.0, -1.0),
        atol=1e-9,
    )


def test_tabulated_signal_matches_triangular() -> None:
    theta = np.linspace(0.0, 1.0, 101)
    model = SignalModel.from_grid(theta, 2.0 * theta, 2.0 * (1.0 - theta))
    assert hiring_threshold(model, 0.25, 1.0, -1.0) == pytest.approx(0.75, abs=1e-9)


def test_rejects_decreasing_likelihood_ratio() -> None:
    with pytest.raises(InvalidSignalError):
        SignalModel.from_grid([0.0, 0.5, 1.0], [2.0, 1.0, 0.0], [0.0, 1.0, 2.0])


def test_rejects_bad_tables() -> None:
    with pytest.raises(InvalidSignalError):
        SignalModel.from_grid([0.0, 1.0], [1.0, 1.0], [1.0, 1.0])
    with pytest.raises(InvalidSignalError):
        SignalModel.from_grid([0.1, 0.5, 1.0], [0.0, 1.0, 2.0], [2.0, 1.0, 0.0])
    with pytest.raises(InvalidSignalError):
        SignalModel.power(0.0)


def test_inverse_cdf(triangular: SignalModel) -> None:
    levels = np.linspace(0.0, 1.0, 21)
    np.testing.assert_allclose(triangular.cdf_q(triangular.inverse_cdf(levels, qualified=True)), levels, atol=1e-12)
    np.testing.assert_allclose(triangular.cdf_u(triangular.inverse_cdf(levels, qualified=False)), levels, atol=1e-12)

    theta = np.linspace(0.0, 1.0, 101)
    tabulated = SignalModel.from_grid(theta, 2.0 * theta, 2.0 * (1.0 - theta))
    found = tabulated.inverse_cdf(levels, qualified=True)
    np.testing.assert_allclose(tabulated.cdf_q(found), levels, atol=1e-9)
