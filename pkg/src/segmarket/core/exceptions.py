"""Error hierarchy shared by the solvers and the command line."""

from __future__ import annotations

from typing import Sequence


class SegmarketError(Exception):
    """Base class; ``exit_code`` is what the CLI returns for this failure."""

    exit_code: int = 1


class ConfigError(SegmarketError):
    """A run configuration could not be parsed or validated."""

    exit_code = 2

    def __init__(self, message: str, key: str | None = None) -> None:
        self.key = key
        super().__init__(f"{key}: {message}" if key else message)


class UnknownFigureError(ConfigError):
    """Requested figure id has no series builder."""


class ParamDomainError(ConfigError, ValueError):
    """Model parameters violate an admissibility condition."""

    def __init__(self, violations: Sequence[str]) -> None:
        self.violations = list(violations)
        super().__init__("; ".join(self.violations), key="params")


class InvalidSignalError(ConfigError, ValueError):
    """Signal densities fail the monotone likelihood ratio or CDF checks."""

    def __init__(self, message: str) -> None:
        super().__init__(message, key="signal")


class PreconditionError(SegmarketError, ValueError):
    """An operation was called outside its numerical domain."""

    exit_code = 3


class DegenerateSignalError(PreconditionError):
    """Both densities vanish at the evaluated signal."""


class OutOfRegionError(PreconditionError):
    """Pool quality lies outside [pi_low, pi_high]."""


class NoBoundError(PreconditionError):
    """Bracketing failed for one of the indifference bounds."""

    def __init__(self, bound: str, f_low: float, f_high: float) -> None:
        self.bound = bound
        self.f_low = f_low
        self.f_high = f_high
        super().__init__(
            f"cannot bracket {bound}: residual {f_low:+.6g} at pi=0, {f_high:+.6g} at pi=1"
        )


class NoSymmetricMixedError(PreconditionError):
    """No symmetric equilibrium with mixing qualified workers exists."""


class NonConvergenceError(PreconditionError):
    """Flow iteration hit its iteration cap."""

    def __init__(self, iterations: int, last_steps: Sequence[float]) -> None:
        self.iterations = iterations
        self.last_steps = list(last_steps)
        sign_flips = sum(
            1 for a, b in zip(self.last_steps, self.last_steps[1:]) if a * b < 0
        )
        self.oscillating = sign_flips > len(self.last_steps) // 2
        super().__init__(
            f"no convergence after {iterations} iterations "
            f"(last step {self.last_steps[-1] if self.last_steps else float('nan'):+.3e}, "
            f"oscillating={self.oscillating})"
        )


class InternalInconsistencyError(SegmarketError):
    """A result contradicts a proven property of the model."""

    exit_code = 4
