"""Root bracketing, refinement and damped Newton iteration."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
import structlog
from numpy.typing import NDArray
from scipy import optimize

from .config import get_settings

logger = structlog.get_logger(__name__)

ScalarFn = Callable[[float], float]
VectorFn = Callable[[NDArray[np.float64]], NDArray[np.float64]]


def sign_change_brackets(
    grid: NDArray[np.float64], values: NDArray[np.float64]
) -> list[tuple[float, float]]:
    """Return ``(a, b)`` pairs of adjacent grid points where ``values`` changes sign.

    Non-finite values break a bracket. An exact zero at a grid node yields the
    degenerate bracket ``(x, x)``.
    """
    brackets: list[tuple[float, float]] = []
    finite = np.isfinite(values)
    for i in range(len(grid) - 1):
        if not (finite[i] and finite[i + 1]):
            continue
        left, right = values[i], values[i + 1]
        if left == 0.0:
            if not brackets or brackets[-1] != (grid[i], grid[i]):
                brackets.append((float(grid[i]), float(grid[i])))
        elif left * right < 0.0:
            brackets.append((float(grid[i]), float(grid[i + 1])))
    if len(grid) and finite[-1] and values[-1] == 0.0:
        brackets.append((float(grid[-1]), float(grid[-1])))
    return brackets


def bisect_root(func: ScalarFn, lo: float, hi: float, xtol: float | None = None) -> float:
    """Refine a sign-change bracket with bisection."""
    if lo == hi:
        return lo
    xtol = xtol if xtol is not None else get_settings().ROOT_XTOL
    return float(optimize.bisect(func, lo, hi, xtol=xtol, maxiter=500))


def scan_roots(
    func: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    lo: float,
    hi: float,
    intervals: int,
    xtol: float | None = None,
) -> list[float]:
    """All roots of a vectorised ``func`` on ``[lo, hi]`` found by sign-change scan."""
    grid = np.linspace(lo, hi, intervals + 1)
    with np.errstate(all="ignore"):
        values = np.asarray(func(grid), dtype=float)

    def scalar(x: float) -> float:
        return float(np.asarray(func(np.array([x])), dtype=float)[0])

    roots = [bisect_root(scalar, a, b, xtol) for a, b in sign_change_brackets(grid, values)]
    return roots


def first_root(
    func: Callable[[NDArray[np.float64]], NDArray[np.float64]],
    lo: float,
    hi: float,
    intervals: int,
    xtol: float | None = None,
) -> float | None:
    """Smallest root of ``func`` on ``[lo, hi]``, or ``None``."""
    grid = np.linspace(lo, hi, intervals + 1)
    with np.errstate(all="ignore"):
        values = np.asarray(func(grid), dtype=float)
    brackets = sign_change_brackets(grid, values)
    if not brackets:
        return None

    def scalar(x: float) -> float:
        return float(np.asarray(func(np.array([x])), dtype=float)[0])

    a, b = brackets[0]
    return bisect_root(scalar, a, b, xtol)


def numerical_jacobian(
    func: VectorFn, x: NDArray[np.float64], step: float | None = None
) -> NDArray[np.float64]:
    """Central-difference Jacobian of ``func`` at ``x``."""
    step = step if step is not None else get_settings().NEWTON_STEP
    x = np.asarray(x, dtype=float)
    f0 = np.asarray(func(x), dtype=float)
    jac = np.empty((f0.size, x.size))
    for j in range(x.size):
        dx = np.zeros_like(x)
        dx[j] = step
        jac[:, j] = (np.asarray(func(x + dx)) - np.asarray(func(x - dx))) / (2.0 * step)
    return jac


@dataclass(frozen=True)
class NewtonResult:
    x: NDArray[np.float64]
    residual: float
    iterations: int
    converged: bool
    singular: bool = False


def damped_newton(
    func: VectorFn,
    x0: Sequence[float],
    *,
    tol: float = 1e-12,
    max_iter: int | None = None,
    lower: Sequence[float] | None = None,
    upper: Sequence[float] | None = None,
) -> NewtonResult:
    """Newton iteration with backtracking on the residual norm and box clipping.

    Returns with ``singular=True`` when the Jacobian cannot be solved; the
    caller then keeps whatever bracketed estimate seeded the iteration.
    """
    settings = get_settings()
    max_iter = max_iter if max_iter is not None else settings.NEWTON_MAX_ITER
    x = np.asarray(x0, dtype=float).copy()
    lo = np.asarray(lower, dtype=float) if lower is not None else None
    hi = np.asarray(upper, dtype=float) if upper is not None else None

    fx = np.asarray(func(x), dtype=float)
    norm = float(np.linalg.norm(fx))
    if not np.isfinite(norm):
        return NewtonResult(x, norm, 0, False)

    for iteration in range(1, max_iter + 1):
        if norm < tol:
            return NewtonResult(x, norm, iteration - 1, True)
        jac = numerical_jacobian(func, x, settings.NEWTON_STEP)
        try:
            if not np.all(np.isfinite(jac)) or np.linalg.cond(jac) > 1e14:
                raise np.linalg.LinAlgError("ill-conditioned jacobian")
            delta = np.linalg.solve(jac, -fx)
        except np.linalg.LinAlgError:
            logger.debug("newton_jacobian_singular", x=x.tolist(), residual=norm)
            return NewtonResult(x, norm, iteration, norm < tol, singular=True)

        step = 1.0
        while step > 1e-10:
            trial = x + step * delta
            if lo is not None:
                trial = np.maximum(trial, lo)
            if hi is not None:
                trial = np.minimum(trial, hi)
            f_trial = np.asarray(func(trial), dtype=float)
            trial_norm = float(np.linalg.norm(f_trial))
            if np.isfinite(trial_norm) and trial_norm < norm:
                break
            step *= 0.5
        else:
            return NewtonResult(x, norm, iteration, norm < tol)
        x, fx, norm = trial, f_trial, trial_norm

    return NewtonResult(x, norm, max_iter, norm < tol)


def dedupe_points(
    points: Sequence[Sequence[float]], tol: float | None = None
) -> list[int]:
    """Indices of the first occurrence of each point, comparing with sup-norm ``tol``."""
    tol = tol if tol is not None else get_settings().DEDUP_TOL
    kept: list[int] = []
    for i, point in enumerate(points):
        candidate = np.asarray(point, dtype=float)
        if all(
            np.max(np.abs(candidate - np.asarray(points[j], dtype=float))) >= tol
            for j in kept
        ):
            kept.append(i)
    return kept
