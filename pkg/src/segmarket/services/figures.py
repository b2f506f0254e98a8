"""Data series behind the steady-state diagrams."""

from __future__ import annotations

from typing import Callable

import numpy as np
import pandas as pd
import structlog

from ..core.config import get_settings
from ..core.exceptions import UnknownFigureError
from ..core.numerics import first_root
from ..core.signal import SignalModel
from ..core.valuation import derive_valuations
from ..schemas.params import ModelParams
from .baseline_solver import alpha_unclipped, compute_bounds, g_function, hire_profit, hire_rates

logger = structlog.get_logger(__name__)


def _reduced_curve(params: ModelParams, signal: SignalModel, points: int) -> pd.DataFrame:
    """G along the path firms and workers would take at each pool quality.

    Below pi_low only low tech enters and everyone accepts; above pi_high only
    high tech enters; in between workers mix and p holds hire chances at Q*.
    """
    v = derive_valuations(params)
    bounds = compute_bounds(params, signal)
    pi = np.linspace(0.0, 1.0, points + 2)[1:-1]
    a_q = np.asarray(hire_rates(pi, params, signal)[0])

    low = np.asarray(g_function(pi, 1.0, 0.0, params, signal))
    with np.errstate(divide="ignore", invalid="ignore"):
        p_mix = np.where(a_q > 0.0, v.Q_star / a_q, np.nan)
    p_mix = np.where(p_mix <= 1.0, p_mix, np.nan)
    mixed = np.asarray(g_function(pi, alpha_unclipped(pi, params, signal), p_mix, params, signal))
    alpha_high = np.where(a_q < v.Q_star, 1.0, 0.0)
    high = np.asarray(g_function(pi, alpha_high, 1.0, params, signal))

    segment = np.where(pi < bounds.pi_low, "low_tech", np.where(pi > bounds.pi_high, "high_tech", "mixed"))
    g = np.where(segment == "low_tech", low, np.where(segment == "high_tech", high, mixed))
    return pd.DataFrame({"pi": pi, "g": g, "segment": segment})


def _entry_line(pi: float, alpha: float, points: int, params: ModelParams, signal: SignalModel) -> pd.DataFrame:
    p = np.linspace(0.0, 1.0, points)
    g = np.array([g_function(pi, alpha, float(x), params, signal) for x in p])
    return pd.DataFrame({"p": p, "g": g, "pi": pi})


def _discrimination_loci(params: ModelParams, signal: SignalModel, points: int) -> pd.DataFrame:
    """For each pi_f with mixing women, the pi_m each condition requires.

    ``pi_m_male`` keeps the refusing group stationary; ``pi_m_female`` makes
    the mixing group's acceptance consistent with stationarity and entry.
    Their crossings with ``pi_m > pi_f`` are discrimination equilibria.
    """
    settings = get_settings()
    v = derive_valuations(params)
    lam_f, lam_m = params.lambda_f, params.lambda_m
    grid = np.linspace(0.0, 1.0, points + 2)[1:-1]

    def root(func: Callable[[np.ndarray], np.ndarray]) -> float:
        found = first_root(func, 0.0, settings.PI_CEILING, settings.GROUP_GRID, settings.ROOT_XTOL)
        return np.nan if found is None else found

    male, female = [], []
    for pi_f in grid:
        pi_f = float(pi_f)
        a_q = float(hire_rates(pi_f, params, signal)[0])
        p = v.Q_star / a_q if a_q > 0.0 else np.inf
        if not p <= 1.0 or lam_m <= 0.0:
            male.append(np.nan)
            female.append(np.nan)
            continue
        male.append(root(lambda x: np.asarray(g_function(x, 0.0, p, params, signal))))

        g0 = float(g_function(pi_f, 0.0, p, params, signal))
        g1 = float(g_function(pi_f, 1.0, p, params, signal))
        if g0 == g1:
            female.append(np.nan)
            continue
        alpha_needed = g0 / (g0 - g1)
        own = float(hire_profit(pi_f, params, signal)) - (1.0 - pi_f) * v.W_l
        target = lam_f * (pi_f * v.W_l * alpha_needed - own)

        def other(x: np.ndarray, target: float = target) -> np.ndarray:
            surplus = np.asarray(hire_profit(x, params, signal)) - (1.0 - x) * v.W_l
            return lam_m * surplus - target

        female.append(root(other))

    return pd.DataFrame({"pi_f": grid, "pi_m_male": male, "pi_m_female": female})


FIGURE_IDS = ("G0", "G1-low", "G1-high", "disc")


def figure_series(
    figure_id: str, params: ModelParams, signal: SignalModel, points: int = 1001
) -> pd.DataFrame:
    """Series for one named diagram."""
    if figure_id == "G0":
        frame = _reduced_curve(params, signal, points)
    elif figure_id == "G1-low":
        frame = _entry_line(compute_bounds(params, signal).pi_low, 0.0, points, params, signal)
    elif figure_id == "G1-high":
        frame = _entry_line(compute_bounds(params, signal).pi_high, 1.0, points, params, signal)
    elif figure_id == "disc":
        frame = _discrimination_loci(params, signal, min(points, 400))
    else:
        raise UnknownFigureError(f"unknown figure {figure_id!r}; choose one of {', '.join(FIGURE_IDS)}", key="figure_id")
    logger.debug("figure_series_built", figure=figure_id, rows=len(frame))
    return frame
