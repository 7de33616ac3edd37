"""Command-line front end.

Exit codes: 0 success, 1 input error, 2 numeric non-convergence, 3 a built-in
example did not reproduce its expected values.
"""

from __future__ import annotations

import csv
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import click
import yaml

from . import repro as repro_mod
from .demand import DemandError
from .ledger_model import NonConvergenceError, SufficiencyResult
from .market import MarketError
from .oracle import GridConfig, Verdict, verify_equilibrium
from .scenario import Scenario, ScenarioError, load_profile, load_scenario
from .solve import EXTRA_COLUMNS, SWEEP_COLUMNS, CandidateReport, solve, sweep_row

EXIT_INPUT = 1
EXIT_NONCONVERGENCE = 2
EXIT_MISMATCH = 3


def _grid_options(fn):
    fn = click.option("--tol", type=float, default=None, help="Payoff tolerance for verdicts.")(fn)
    fn = click.option("--grid-r", type=int, default=None, help="Reserve grid points.")(fn)
    fn = click.option("--grid-q", type=int, default=None, help="Investment grid points.")(fn)
    return fn


def _grid(base: GridConfig, grid_q: int | None, grid_r: int | None, tol: float | None) -> GridConfig:
    try:
        return GridConfig(
            q_points=grid_q or base.q_points,
            r_points=grid_r or base.r_points,
            q_max_multiplier=base.q_max_multiplier,
            tolerance=tol if tol is not None else base.tolerance,
            refine_rounds=base.refine_rounds,
        )
    except ValueError as exc:
        raise click.UsageError(str(exc)) from exc


def _load(path: str) -> Scenario:
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


def _num(x: float) -> str:
    return f"{x:.10g}"


def _vec(xs) -> str:
    return "(" + ", ".join(_num(x) for x in xs) + ")"


def _verdict_line(verdict: Verdict) -> str:
    text = f"equilibrium={verdict.is_equilibrium} max_gain={verdict.max_gain:.3e}"
    w = verdict.witness
    if w is not None:
        text += f" witness: miner {w.miner} -> investment {_num(w.investment)}, reserve {_num(w.reserve)}"
    return text


def _candidate_lines(report: CandidateReport) -> list[str]:
    c = report.candidate
    lines = [
        f"  {c.label}: price {_num(c.clearing_price)}, total investment {_num(c.total_investment)}",
        f"    investments {_vec(c.investments)}",
        f"    reserves    {_vec(c.reserves)}",
        f"    payoffs     {_vec(c.payoffs)}",
        f"    oracle      {_verdict_line(report.verdict)}",
    ]
    lines += [f"    note        {flag}" for flag in c.flags]
    return lines


def _run_guarded(fn):
    """Map library errors onto exit codes."""
    try:
        return fn()
    except ScenarioError as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)
    except NonConvergenceError as exc:
        click.echo(f"error: {exc}; last iterates {exc.trace[-5:]}", err=True)
        sys.exit(EXIT_NONCONVERGENCE)
    except (MarketError, DemandError) as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(EXIT_INPUT)


@click.group()
def main() -> None:
    """Equilibria of the blockspace ledger market."""


@main.command("solve")
@click.argument("scenario_path", type=click.Path())
@_grid_options
@click.option("--out", type=click.Path(), default=None, help="Write candidates as CSV.")
def solve_command(scenario_path, grid_q, grid_r, tol, out):
    """Build and verify all equilibrium candidates of a scenario."""
    scenario = _load(scenario_path)
    grid = _grid(scenario.grid, grid_q, grid_r, tol)
    report = _run_guarded(lambda: solve(scenario, grid))
    market = scenario.market
    lines = [
        f"miners {market.n}, append supply {_num(market.append_supply)}, "
        f"block reward {_num(market.block_reward)}",
        f"market-clearing price {_num(market.clearing_price)}",
        f"reserve caps {_vec(report.reserve_caps)}",
        f"critical cost {_num(report.c_star)}, shares {_vec(report.shares)}",
        f"regular-demand test: {report.regular}",
    ]
    exact = report.exact
    if isinstance(exact, SufficiencyResult):
        lines.append(
            f"exact cover test: threshold {_num(exact.threshold)}, pass {exact.passed}"
            + ("" if exact.exact else
               " (sufficient only, block reward > 0)" if market.symmetric else
               " (evaluated at zero block reward)")
        )
    else:
        lines.append(f"exact cover test: {exact}")
    bound = report.block_reward_bound
    lines.append(
        f"block-reward bound: {_num(bound.bound)}" if not isinstance(bound, str) else f"block-reward bound: {bound}"
    )
    lines.append("candidates:")
    if report.market_clearing is not None:
        lines += _candidate_lines(report.market_clearing)
    for ps in report.price_setters:
        lines += _candidate_lines(ps)
    lines += [f"note: {n}" for n in report.notes]
    lines.append(f"pure equilibria found: {len(report.equilibria)}")
    click.echo("\n".join(lines))
    if out:
        candidates = ([report.market_clearing] if report.market_clearing else []) + list(report.price_setters)
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["kind", "setter", "clearing_price", "total_investment", "is_equilibrium",
                             "max_gain"] + [f"payoff_{k}" for k in range(market.n)])
            for r in candidates:
                c = r.candidate
                writer.writerow([c.kind.value, "" if c.setter is None else c.setter, repr(c.clearing_price),
                                 repr(c.total_investment), r.verdict.is_equilibrium,
                                 repr(r.verdict.max_gain)] + [repr(p) for p in c.payoffs])


@main.command("verify")
@click.argument("scenario_path", type=click.Path())
@click.argument("profile_path", type=click.Path())
@_grid_options
def verify_command(scenario_path, profile_path, grid_q, grid_r, tol):
    """Check whether an explicit profile is an equilibrium."""
    scenario = _load(scenario_path)
    grid = _grid(scenario.grid, grid_q, grid_r, tol)
    profile = _run_guarded(lambda: load_profile(profile_path, scenario.market.n))
    verdict = _run_guarded(lambda: verify_equilibrium(scenario.market, profile, grid))
    click.echo(_verdict_line(verdict))


def _sweep_worker(args):
    data, parameter, value, grid = args
    scenario = Scenario.from_dict(data).with_value(parameter, value)
    return sweep_row(scenario, value, grid)


def _csv_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "" if math.isnan(v) else repr(v)
    return str(v)


@main.command("sweep")
@click.argument("scenario_path", type=click.Path())
@click.option("--param", "parameter", default=None, help="Dotted scenario path, e.g. protocol.append_supply.")
@click.option("--values", default=None, help="Comma-separated values.")
@_grid_options
@click.option("--out", type=click.Path(), default=None, help="CSV path (default: stdout).")
@click.option("--workers", type=int, default=None, help="Worker processes (default: CPU count).")
@click.option("--plot", is_flag=True, help="Also write a PNG figure next to the CSV.")
def sweep_command(scenario_path, parameter, values, grid_q, grid_r, tol, out, workers, plot):
    """Evaluate a scenario over a list of parameter values and write CSV rows."""
    scenario = _load(scenario_path)
    spec = scenario.data.get("sweep", {})
    parameter = parameter or spec.get("parameter")
    out = out or spec.get("output")
    if values is not None:
        try:
            value_list = [yaml.safe_load(v) for v in values.split(",")]
        except yaml.YAMLError as exc:
            raise click.UsageError(f"bad --values: {exc}") from exc
    else:
        value_list = spec.get("values")
    if not parameter or not value_list:
        raise click.UsageError("give --param and --values or a sweep section in the scenario")
    if plot and not out:
        raise click.UsageError("--plot needs --out")
    grid = _grid(scenario.grid, grid_q, grid_r, tol)
    for v in value_list:
        _run_guarded(lambda v=v: scenario.with_value(parameter, v))
    jobs = [(scenario.to_dict(), parameter, v, grid) for v in value_list]
    workers = workers or min(len(jobs), os.cpu_count() or 1)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = _run_guarded(lambda: list(pool.map(_sweep_worker, jobs)))
    else:
        rows = _run_guarded(lambda: [_sweep_worker(job) for job in jobs])
    columns = SWEEP_COLUMNS + EXTRA_COLUMNS
    handle = open(out, "w", newline="") if out else sys.stdout
    try:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_csv_value(row[c]) for c in columns])
    finally:
        if out:
            handle.close()
    if plot:
        from .plotting import plot_sweep

        figure = plot_sweep(rows, parameter, Path(out).with_suffix(".png"))
        click.echo(f"figure written to {figure}", err=True)


@main.command("repro")
@click.argument("name")
@_grid_options
def repro_command(name, grid_q, grid_r, tol):
    """Run a built-in worked example and check its expected values."""
    if name not in repro_mod.SCENARIOS:
        click.echo(f"error: unknown example {name!r}; choose from {', '.join(repro_mod.SCENARIOS)}", err=True)
        sys.exit(EXIT_INPUT)
    base = repro_mod.scenario(name).grid
    checks = _run_guarded(lambda: repro_mod.run(name, _grid(base, grid_q, grid_r, tol)))
    for check in checks:
        click.echo(check.line())
    failed = sum(not c.passed for c in checks)
    click.echo(f"{name}: {len(checks) - failed}/{len(checks)} checks passed")
    if failed:
        sys.exit(EXIT_MISMATCH)


@main.command("oracle-check")
@click.argument("scenario_path", type=click.Path())
@_grid_options
@click.option("--rounds", type=int, default=2, show_default=True, help="Number of grid doublings.")
def oracle_check_command(scenario_path, grid_q, grid_r, tol, rounds):
    """Report whether oracle verdicts are stable as the search grid doubles."""
    scenario = _load(scenario_path)
    grid = _grid(scenario.grid, grid_q, grid_r, tol)
    report = _run_guarded(lambda: solve(scenario, grid))
    candidates = ([report.market_clearing] if report.market_clearing else []) + list(report.price_setters)
    unstable = 0
    for r in candidates:
        c = r.candidate
        verdicts = [r.verdict]
        g = grid
        for _ in range(rounds):
            g = g.refined()
            verdicts.append(_run_guarded(lambda g=g: verify_equilibrium(scenario.market, c.profile, g)))
        stable = len({v.is_equilibrium for v in verdicts}) == 1
        unstable += not stable
        gains = ", ".join(f"{v.max_gain:.3e}" for v in verdicts)
        click.echo(f"{c.label}: gains [{gains}] {'stable' if stable else 'UNSTABLE'}")
    click.echo(f"{unstable} unstable verdict(s)")


if __name__ == "__main__":
    main()
