"""Command-line interface for segmarket."""

from __future__ import annotations

from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterator, Optional

import numpy as np
import pandas as pd
import typer
from pydantic import ValidationError
from rich.console import Console

from .core.config import settings_override
from .core.exceptions import ConfigError, PreconditionError, SegmarketError
from .core.valuation import derive_valuations, with_overrides
from .schemas.equilibrium import QuotaMode
from .schemas.run_config import RunConfig, SimMode, load_run_config
from .services.baseline_solver import (
    compute_bounds,
    corollary_phi_scan,
    enumerate_candidates,
    find_all_equilibria,
)
from .services.figures import figure_series
from .services.group_solver import prop6_sweep, solve_all_groups
from .services.market_simulator import (
    Policy,
    flow_oracle,
    fragility_experiment,
    monte_carlo_run,
    run_flow,
)
from .services.quota import quota_check
from .storage.report_writer import OutputFormat, records_frame, write_report
from .utils.logging import LogContext, configure_logging, get_logger

err_console = Console(stderr=True)
logger = get_logger(__name__)

app = typer.Typer(
    name="segmarket",
    help="Steady-state equilibria, group discrimination and flow simulation for a two-sector search market.",
    add_completion=False,
    rich_markup_mode="rich",
)

ConfigOption = typer.Option(..., "--config", "-c", exists=False, help="Run file (JSON, or YAML by suffix)")
OutOption = typer.Option(None, "--out", "-o", help="Write the report here instead of stdout")
TolOption = typer.Option(None, "--tol", help="Root tolerance; also the oracle tolerance where one is used")

SWEEPABLE = ("beta", "phi", "r", "psi", "b", "y_l", "w_l", "y_h", "w_h", "K", "lambda_m")


@app.callback()
def main(
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Enable debug logging"),
) -> None:
    """Global application configuration."""
    configure_logging(debug=verbose)


@contextmanager
def _session(command: str, config_path: Path, tol: Optional[float]) -> Iterator[RunConfig]:
    """Load the run file, apply solver overrides and map failures to exit codes."""
    with LogContext(command=command, config=str(config_path)):
        try:
            config = load_run_config(config_path)
            overrides = config.solver.settings_overrides()
            if tol is not None:
                if tol <= 0.0:
                    raise ConfigError("must be positive", key="tol")
                overrides["ROOT_XTOL"] = tol
            with settings_override(**overrides):
                yield config
        except SegmarketError as exc:
            logger.error("command_failed", error=type(exc).__name__, exit_code=exc.exit_code)
            err_console.print(f"[bold red]{type(exc).__name__}:[/bold red] {exc}")
            raise typer.Exit(code=exc.exit_code) from exc


def _summary(message: str) -> None:
    err_console.print(message)


@app.command("bounds")
def cmd_bounds(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f"),
    tol: Optional[float] = TolOption,
) -> None:
    """Indifference bounds, sector values and the critical hire chance."""
    with _session("bounds", config, tol) as run:
        params, signal = run.model_params(), run.signal.build()
        bounds = compute_bounds(params, signal)
        values = derive_valuations(params)
        document = {"bounds": bounds, "valuations": values, "params": params}
        frame = pd.DataFrame([bounds.model_dump() | values.model_dump()])
        write_report(document, frame, fmt, out, title="Bounds")
        _summary(f"pi_low={bounds.pi_low:.6f} pi_high={bounds.pi_high:.6f} Q*={values.Q_star:.6f}")


@app.command("solve")
def cmd_solve(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f"),
    tol: Optional[float] = TolOption,
    oracle: bool = typer.Option(False, "--oracle", help="Verify each equilibrium by flow iteration"),
    candidates: bool = typer.Option(False, "--candidates", help="Also report rejected candidates"),
) -> None:
    """Every steady-state equilibrium of the one-group economy."""
    with _session("solve", config, tol) as run:
        params, signal = run.model_params(), run.signal.build()
        equilibria = find_all_equilibria(params, signal)
        frame = records_frame(equilibria)
        if oracle:
            oracle_tol = tol if tol is not None else run.sim.tol
            limits = [
                flow_oracle(Policy.for_equilibrium(eq, params, signal), params, signal, oracle_tol, run.sim.max_iter)
                for eq in equilibria
            ]
            frame["oracle_pi"] = limits
            frame["oracle_gap"] = [abs(limit - eq.pi) for limit, eq in zip(limits, equilibria)]
        document: dict[str, Any] = {"equilibria": frame.to_dict(orient="records")}
        if candidates:
            document["candidates"] = enumerate_candidates(params, signal)
        write_report(document, frame, fmt, out, title="Equilibria")
        _summary(f"{len(equilibria)} equilibria: {', '.join(eq.kind.value for eq in equilibria)}")


@app.command("groups")
def cmd_groups(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f"),
    tol: Optional[float] = TolOption,
    prop6: bool = typer.Option(False, "--prop6", help="Group masses supporting pure discrimination"),
    quota: bool = typer.Option(False, "--quota", help="Re-solve under an equal-hiring quota"),
    quota_mode: QuotaMode = typer.Option(QuotaMode.FLOW, "--quota-mode", help="Quota on hiring flows or employment stocks"),
    mirrors: bool = typer.Option(False, "--mirrors", help="Also report label-swapped equilibria"),
) -> None:
    """Symmetric and discriminatory equilibria with two payoff-identical groups."""
    with _session("groups", config, tol) as run:
        params, signal = run.model_params(), run.signal.build()
        if prop6:
            sweep = prop6_sweep(params, signal, run.solver.p_grid)
            frame = records_frame(sweep.rows)
            write_report(sweep.model_dump(), frame, fmt, out, title="Group masses")
            _summary(f"pi*={sweep.pi_star:.6f} p*={sweep.p_star:.6f} lambda_m increasing: {sweep.lambda_m_increasing}")
            return
        if quota:
            report = quota_check(params, signal, quota_mode)
            frame = pd.concat(
                [
                    records_frame(report.asymmetric_survivors).assign(set="asymmetric"),
                    records_frame(report.symmetric_set).assign(set="symmetric"),
                ],
                ignore_index=True,
            )
            document = report.model_dump() | {"survivor_count": len(report.asymmetric_survivors)}
            write_report(document, frame, fmt, out, title=f"Quota ({quota_mode.value})")
            _summary(f"{len(report.asymmetric_survivors)} asymmetric survivors under the {quota_mode.value} quota")
            return
        found = solve_all_groups(params, signal, include_mirrors=mirrors)
        frame = records_frame(found)
        if not frame.empty:
            frame["asymmetric"] = [eq.is_asymmetric for eq in found]
        write_report({"equilibria": found}, frame, fmt, out, title="Group equilibria")
        _summary(f"{len(found)} group equilibria, {sum(eq.is_asymmetric for eq in found)} asymmetric")


@app.command("figure")
def cmd_figure(
    figure_id: str = typer.Argument(..., help="G0, G1-low, G1-high or disc"),
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.CSV, "--format", "-f"),
    tol: Optional[float] = TolOption,
    points: int = typer.Option(1001, "--points", min=3, help="Grid points"),
) -> None:
    """Data series for a steady-state diagram."""
    with _session("figure", config, tol) as run:
        frame = figure_series(figure_id, run.model_params(), run.signal.build(), points)
        write_report({"figure": figure_id, "series": frame.to_dict(orient="records")}, frame, fmt, out, title=figure_id)


@app.command("simulate")
def cmd_simulate(
    config: Path = ConfigOption,
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.CSV, "--format", "-f"),
    tol: Optional[float] = TolOption,
    mode: Optional[SimMode] = typer.Option(None, "--mode", help="flow, mc or fragility; defaults to the run file"),
    seed: Optional[int] = typer.Option(None, "--seed"),
    periods: Optional[int] = typer.Option(None, "--periods", min=1),
    agents: Optional[int] = typer.Option(None, "--agents", min=100),
    epsilon: Optional[float] = typer.Option(None, "--epsilon"),
    equilibrium: Optional[int] = typer.Option(None, "--equilibrium", min=0, help="Index into the solved equilibria"),
) -> None:
    """Flow iteration, agent simulation or the fragility experiment."""
    with _session("simulate", config, tol) as run:
        params, signal = run.model_params(), run.signal.build()
        sim = run.sim.model_copy(
            update={
                key: value
                for key, value in {
                    "mode": mode,
                    "seed": seed,
                    "periods": periods,
                    "n_agents": agents,
                    "epsilon": epsilon,
                    "equilibrium_index": equilibrium,
                }.items()
                if value is not None
            }
        )

        if sim.mode is SimMode.FRAGILITY:
            report = fragility_experiment(params, signal, sim.epsilon, periods=sim.periods)
            frame = pd.DataFrame(
                {"period": np.arange(1, sim.periods + 1), "gap": report.gap_series, "p": report.p_series}
            )
            write_report(report, frame, fmt, out, title="Fragility")
            _summary(f"final gap {report.final_gap:+.3e}, diverged={report.diverged}, returned={report.returned}")
            return

        equilibria = find_all_equilibria(params, signal)
        if sim.equilibrium_index >= len(equilibria):
            raise ConfigError(f"only {len(equilibria)} equilibria exist", key="sim.equilibrium_index")
        target = equilibria[sim.equilibrium_index]
        policy = Policy.for_equilibrium(target, params, signal)

        if sim.mode is SimMode.MC:
            result = monte_carlo_run(sim.n_agents, sim.periods, sim.seed, policy, params, signal)
            frame = pd.DataFrame({"period": np.arange(1, sim.periods + 1), "pi": result.pi_series})
            write_report(result.model_dump() | {"equilibrium": target}, frame, fmt, out, title="Agent simulation")
            _summary(f"pi mean {result.pi_final_mean:.6f} (sd {result.pi_final_sd:.6f}) against {target.pi:.6f}")
            return

        frame = run_flow(policy, params, signal, sim.periods)
        oracle_tol = tol if tol is not None else sim.tol
        try:
            limit: float | None = flow_oracle(policy, params, signal, oracle_tol, sim.max_iter)
        except PreconditionError as exc:
            logger.warning("oracle_unavailable", error=str(exc))
            limit = None
        document = {"equilibrium": target, "limit": limit, "series": frame.to_dict(orient="records")}
        write_report(document, frame, fmt, out, title="Flow iteration")
        _summary(f"flow limit {limit if limit is None else round(limit, 6)} against {target.pi:.6f}")


@app.command("sweep")
def cmd_sweep(
    param: str = typer.Argument(..., help=f"One of {', '.join(SWEEPABLE)}"),
    config: Path = ConfigOption,
    start: float = typer.Option(..., "--start"),
    stop: float = typer.Option(..., "--stop"),
    num: int = typer.Option(11, "--num", min=2),
    recalibrate: bool = typer.Option(True, "--recalibrate/--no-recalibrate", help="Re-pin W_q = 1, W_u = -1 at each point"),
    corollary: bool = typer.Option(False, "--corollary", help="Find the separation rate below which high tech never operates alone"),
    out: Optional[Path] = OutOption,
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format", "-f"),
    tol: Optional[float] = TolOption,
) -> None:
    """Equilibrium counts and kinds along a parameter grid."""
    with _session("sweep", config, tol) as run:
        if param not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {param!r}", key="param")
        params, signal = run.model_params(), run.signal.build()
        grid = np.linspace(start, stop, num)

        if corollary:
            if param != "phi":
                raise ConfigError("the corollary scan runs over phi", key="param")
            scan = corollary_phi_scan(params, signal, grid.tolist(), recalibrate=recalibrate)
            frame = pd.DataFrame(scan.high_tech_exists, columns=["phi", "high_tech_only"])
            write_report(scan, frame, fmt, out, title="High-tech-only scan")
            _summary(f"phi*={scan.phi_star:.6f} flagged={scan.flagged}")
            return

        rows = []
        for value in grid:
            updates = {param: float(value)}
            if param == "lambda_m":
                updates["lambda_f"] = 1.0 - float(value)
            try:
                point = with_overrides(params, recalibrate=recalibrate, **updates)
                kinds = [eq.kind.value for eq in find_all_equilibria(point, signal)]
                rows.append({param: float(value), "count": len(kinds), "kinds": ";".join(kinds), "error": ""})
            except (SegmarketError, ValidationError) as exc:
                logger.warning("sweep_point_failed", value=float(value), error=str(exc))
                rows.append({param: float(value), "count": 0, "kinds": "", "error": type(exc).__name__})
        frame = pd.DataFrame(rows)
        write_report({"param": param, "points": rows}, frame, fmt, out, title=f"Sweep over {param}")
        _summary(f"{len(rows)} points, {sum(row['count'] > 1 for row in rows)} with multiple equilibria")


if __name__ == "__main__":
    app()
