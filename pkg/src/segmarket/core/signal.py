"""Signal technology: densities, posterior beliefs and the hiring threshold rule.

Every function here accepts a scalar or a numpy array for ``pi`` and returns
the same shape, so the solvers can evaluate whole scan grids in one call.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence, overload

import numpy as np
import structlog
from numpy.typing import ArrayLike, NDArray

from .config import get_settings
from .exceptions import DegenerateSignalError, InvalidSignalError

logger = structlog.get_logger(__name__)

Curve = Callable[[NDArray[np.float64]], NDArray[np.float64]]
FloatArray = NDArray[np.float64]


class SignalKind(str, Enum):
    TRIANGULAR = "triangular"
    GENERIC = "generic"


class CornerFlag(str, Enum):
    INTERIOR = "interior"
    HIRE_ALL = "hire_all"
    HIRE_NONE = "hire_none"
    ALWAYS_HIRE = "always_hire"
    NEVER_HIRE = "never_hire"


@dataclass(frozen=True)
class HiringRule:
    threshold: float
    flag: CornerFlag


def _triangular_q(theta: FloatArray) -> FloatArray:
    return 2.0 * theta


def _triangular_u(theta: FloatArray) -> FloatArray:
    return 2.0 * (1.0 - theta)


def _triangular_cdf_q(theta: FloatArray) -> FloatArray:
    return theta * theta


def _triangular_cdf_u(theta: FloatArray) -> FloatArray:
    return theta * (2.0 - theta)


@dataclass(frozen=True, eq=False)
class SignalModel:
    """Pair of signal distributions for qualified (q) and unqualified (u) workers.

    Construction validates the CDF endpoints, first-order dominance and a
    strictly increasing likelihood ratio on an interior grid.
    """

    density_q: Curve
    density_u: Curve
    cdf_q: Curve
    cdf_u: Curve
    kind: SignalKind = SignalKind.GENERIC
    quantile_q: Curve | None = field(default=None, repr=False)
    quantile_u: Curve | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        self._validate()

    @classmethod
    def triangular(cls) -> "SignalModel":
        return cls(
            density_q=_triangular_q,
            density_u=_triangular_u,
            cdf_q=_triangular_cdf_q,
            cdf_u=_triangular_cdf_u,
            kind=SignalKind.TRIANGULAR,
            quantile_q=np.sqrt,
            quantile_u=lambda u: 1.0 - np.sqrt(1.0 - u),
        )

    @classmethod
    def power(cls, k: float) -> "SignalModel":
        """f_q = (k+1) θ^k and f_u = (k+1)(1-θ)^k; ``k=1`` is the triangular pair."""
        if k <= 0:
            raise InvalidSignalError(f"power exponent must be positive, got {k}")
        return cls(
            density_q=lambda t: (k + 1.0) * np.power(t, k),
            density_u=lambda t: (k + 1.0) * np.power(1.0 - t, k),
            cdf_q=lambda t: np.power(t, k + 1.0),
            cdf_u=lambda t: 1.0 - np.power(1.0 - t, k + 1.0),
            quantile_q=lambda u: np.power(u, 1.0 / (k + 1.0)),
            quantile_u=lambda u: 1.0 - np.power(1.0 - u, 1.0 / (k + 1.0)),
        )

    @classmethod
    def from_grid(
        cls,
        theta: Sequence[float],
        density_q: Sequence[float],
        density_u: Sequence[float],
    ) -> "SignalModel":
        """Tabulated densities, normalised, linearly interpolated."""
        grid = np.asarray(theta, dtype=float)
        fq = np.asarray(density_q, dtype=float)
        fu = np.asarray(density_u, dtype=float)
        if grid.ndim != 1 or grid.size < 3 or fq.shape != grid.shape or fu.shape != grid.shape:
            raise InvalidSignalError("theta and densities must be equal-length 1-D tables")
        if grid[0] != 0.0 or grid[-1] != 1.0 or np.any(np.diff(grid) <= 0):
            raise InvalidSignalError("theta grid must increase from 0 to 1")
        if np.any(fq < 0) or np.any(fu < 0):
            raise InvalidSignalError("densities must be non-negative")

        def cumulative(f: FloatArray) -> FloatArray:
            steps = 0.5 * (f[1:] + f[:-1]) * np.diff(grid)
            cdf = np.concatenate(([0.0], np.cumsum(steps)))
            if cdf[-1] <= 0:
                raise InvalidSignalError("density integrates to zero")
            return cdf

        cq, cu = cumulative(fq), cumulative(fu)
        fq, fu = fq / cq[-1], fu / cu[-1]
        cq, cu = cq / cq[-1], cu / cu[-1]
        return cls(
            density_q=lambda t: np.interp(t, grid, fq),
            density_u=lambda t: np.interp(t, grid, fu),
            cdf_q=lambda t: np.interp(t, grid, cq),
            cdf_u=lambda t: np.interp(t, grid, cu),
        )

    def _validate(self) -> None:
        settings = get_settings()
        ends = np.array([0.0, 1.0])
        for name, cdf in (("cdf_q", self.cdf_q), ("cdf_u", self.cdf_u)):
            values = np.asarray(cdf(ends), dtype=float)
            if abs(values[0]) > 1e-9 or abs(values[1] - 1.0) > 1e-9:
                raise InvalidSignalError(f"{name} must run from 0 to 1, got {values.tolist()}")

        n = settings.MLR_GRID_POINTS
        grid = np.linspace(0.0, 1.0, n + 2)[1:-1]
        fq = np.asarray(self.density_q(grid), dtype=float)
        fu = np.asarray(self.density_u(grid), dtype=float)
        if np.any(fq < 0) or np.any(fu < 0):
            raise InvalidSignalError("densities must be non-negative")
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = fq / fu
        finite = np.isfinite(ratio)
        steps = np.diff(ratio[finite])
        if steps.size and np.any(steps <= settings.MLR_TOL):
            raise InvalidSignalError("likelihood ratio f_q/f_u is not strictly increasing")

        dominance = np.asarray(self.cdf_q(grid)) - np.asarray(self.cdf_u(grid))
        if np.any(dominance > settings.MLR_TOL):
            raise InvalidSignalError("cdf_q must lie below cdf_u")

    def inverse_cdf(self, u: ArrayLike, qualified: bool) -> FloatArray:
        """Signal quantiles; used for signal draws and pinned hiring rates."""
        quantile = self.quantile_q if qualified else self.quantile_u
        levels = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        if quantile is not None:
            return np.asarray(quantile(levels), dtype=float)
        cdf = self.cdf_q if qualified else self.cdf_u
        lo = np.zeros_like(levels)
        hi = np.ones_like(levels)
        for _ in range(_bisection_steps(get_settings().ROOT_XTOL)):
            mid = 0.5 * (lo + hi)
            below = np.asarray(cdf(mid)) < levels
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)


def _bisection_steps(xtol: float) -> int:
    return max(1, math.ceil(math.log2(1.0 / xtol)) + 1)


@overload
def _shape_like(values: FloatArray, like: float) -> float: ...


@overload
def _shape_like(values: FloatArray, like: FloatArray) -> FloatArray: ...


def _shape_like(values: FloatArray, like: float | FloatArray) -> float | FloatArray:
    if np.ndim(like) == 0:
        return float(np.asarray(values).reshape(-1)[0])
    return values


def posterior(model: SignalModel, theta: float, pi: float) -> float:
    """Probability a worker with signal ``theta`` is qualified, given prior ``pi``."""
    if pi <= 0.0:
        return 0.0
    if pi >= 1.0:
        return 1.0
    fq = float(np.asarray(model.density_q(np.array([theta])))[0])
    fu = float(np.asarray(model.density_u(np.array([theta])))[0])
    if fq == 0.0 and fu == 0.0:
        raise DegenerateSignalError(f"both signal densities vanish at theta={theta}")
    return pi * fq / (pi * fq + (1.0 - pi) * fu)


def _log_excess(model: SignalModel, theta: FloatArray, pi: FloatArray, k: float) -> FloatArray:
    """log[pi f_q / ((1 - pi) f_u)] - log k; increasing in theta."""
    with np.errstate(divide="ignore", invalid="ignore"):
        fq = np.asarray(model.density_q(theta), dtype=float)
        fu = np.asarray(model.density_u(theta), dtype=float)
        out = np.log(pi) + np.log(fq) - np.log1p(-pi) - np.log(fu) - math.log(k)
    return out


def _thresholds(model: SignalModel, pi: FloatArray, W_q: float, W_u: float) -> tuple[FloatArray, FloatArray]:
    """Thresholds and an integer corner code per pool quality.

    Codes: 0 interior, 1 hire all, 2 hire none.
    """
    pi = np.clip(np.asarray(pi, dtype=float), 0.0, 1.0)
    k = -W_u / W_q

    if model.kind is SignalKind.TRIANGULAR:
        # pi * 2s / ((1 - pi) * 2(1 - s)) = k
        s = k * (1.0 - pi) / (pi + k * (1.0 - pi))
        code = np.where(s <= 0.0, 1, np.where(s >= 1.0, 2, 0))
        return np.clip(s, 0.0, 1.0), code

    zeros = np.zeros_like(pi)
    ones = np.ones_like(pi)
    at_bottom = _log_excess(model, zeros, pi, k)
    at_top = _log_excess(model, ones, pi, k)
    hire_all = (at_bottom >= 0.0) | (pi >= 1.0)
    hire_none = ((at_top <= 0.0) | (pi <= 0.0)) & ~hire_all

    lo, hi = zeros.copy(), ones.copy()
    for _ in range(_bisection_steps(get_settings().ROOT_XTOL)):
        mid = 0.5 * (lo + hi)
        below = _log_excess(model, mid, pi, k) < 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    s = np.where(hire_all, 0.0, np.where(hire_none, 1.0, 0.5 * (lo + hi)))
    code = np.where(hire_all, 1, np.where(hire_none, 2, 0))
    return s, code


def hiring_rule(model: SignalModel, pi: float, W_q: float, W_u: float) -> HiringRule:
    """Optimal threshold at pool quality ``pi`` with its corner flag."""
    if W_q <= 0.0:
        logger.warning("invalid_valuations", W_q=W_q, W_u=W_u, corner="never_hire")
        return HiringRule(1.0, CornerFlag.NEVER_HIRE)
    if W_u >= 0.0:
        logger.warning("invalid_valuations", W_q=W_q, W_u=W_u, corner="always_hire")
        return HiringRule(0.0, CornerFlag.ALWAYS_HIRE)
    s, code = _thresholds(model, np.array([pi]), W_q, W_u)
    flag = (CornerFlag.INTERIOR, CornerFlag.HIRE_ALL, CornerFlag.HIRE_NONE)[int(code[0])]
    return HiringRule(float(s[0]), flag)


@overload
def hiring_threshold(model: SignalModel, pi: float, W_q: float, W_u: float) -> float: ...


@overload
def hiring_threshold(model: SignalModel, pi: FloatArray, W_q: float, W_u: float) -> FloatArray: ...


def hiring_threshold(
    model: SignalModel, pi: float | FloatArray, W_q: float, W_u: float
) -> float | FloatArray:
    """s(pi): hire iff the signal is at least this value."""
    grid = np.atleast_1d(np.asarray(pi, dtype=float))
    if W_q <= 0.0 or W_u >= 0.0:
        corner = hiring_rule(model, 0.5, W_q, W_u).threshold
        return _shape_like(np.full_like(grid, corner), pi)
    s, _ = _thresholds(model, grid, W_q, W_u)
    return _shape_like(s, pi)


@overload
def hire_probabilities(model: SignalModel, pi: float, W_q: float, W_u: float) -> tuple[float, float]: ...


@overload
def hire_probabilities(
    model: SignalModel, pi: FloatArray, W_q: float, W_u: float
) -> tuple[FloatArray, FloatArray]: ...


def hire_probabilities(
    model: SignalModel, pi: float | FloatArray, W_q: float, W_u: float
) -> tuple[float | FloatArray, float | FloatArray]:
    """(A_q, A_u): chance a met qualified / unqualified worker is hired."""
    s = np.atleast_1d(np.asarray(hiring_threshold(model, np.atleast_1d(np.asarray(pi, dtype=float)), W_q, W_u)))
    a_q = 1.0 - np.asarray(model.cdf_q(s), dtype=float)
    a_u = 1.0 - np.asarray(model.cdf_u(s), dtype=float)
    return _shape_like(a_q, pi), _shape_like(a_u, pi)


def rates_at_threshold(model: SignalModel, s: float | FloatArray) -> tuple[FloatArray, FloatArray]:
    """(A_q, A_u) for an arbitrary threshold, not necessarily optimal."""
    s_arr = np.asarray(s, dtype=float)
    return 1.0 - np.asarray(model.cdf_q(s_arr)), 1.0 - np.asarray(model.cdf_u(s_arr))


@overload
def expected_hire_profit(model: SignalModel, pi: float, W_q: float, W_u: float) -> float: ...


@overload
def expected_hire_profit(model: SignalModel, pi: FloatArray, W_q: float, W_u: float) -> FloatArray: ...


def expected_hire_profit(
    model: SignalModel, pi: float | FloatArray, W_q: float, W_u: float
) -> float | FloatArray:
    """Expected value of a meeting for a high-tech firm using the optimal threshold."""
    grid = np.atleast_1d(np.asarray(pi, dtype=float))
    a_q, a_u = hire_probabilities(model, grid, W_q, W_u)
    value = grid * a_q * W_q + (1.0 - grid) * a_u * W_u
    return _shape_like(value, pi)
