"""Candidate construction plus oracle verdicts for one scenario."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .demand import DemandError
from .ledger_model import (
    BlockRewardBound,
    EquilibriumCandidate,
    MarketError,
    SufficiencyResult,
    contest_shares,
    market_clearing_candidate,
    min_block_reward,
    price_setter_candidate,
    sufficiency_regular,
    sufficiency_threshold,
)
from .market import reserve_cap
from .oracle import GridConfig, Verdict, verify_equilibrium
from .scenario import Scenario

SWEEP_COLUMNS = (
    "param_value",
    "clearing_price_mc",
    "mc_exists",
    "best_ps_price",
    "ps_exists_any",
    "max_oracle_gain",
    "c_star",
    "x_max",
)
EXTRA_COLUMNS = ("sufficiency_exact", "sufficiency_regular", "exact_threshold", "ps_count")


@dataclass(frozen=True)
class CandidateReport:
    candidate: EquilibriumCandidate
    verdict: Verdict


@dataclass(frozen=True)
class MarketReport:
    reserve_caps: tuple[float, ...]
    c_star: float
    shares: tuple[float, ...]
    market_clearing: CandidateReport | None
    price_setters: tuple[CandidateReport, ...]
    regular: bool | str
    exact: SufficiencyResult | str
    block_reward_bound: BlockRewardBound | str
    notes: tuple[str, ...] = field(default=())

    @property
    def equilibria(self) -> list[CandidateReport]:
        found = [r for r in self.price_setters if r.verdict.is_equilibrium]
        if self.market_clearing is not None and self.market_clearing.verdict.is_equilibrium:
            found.insert(0, self.market_clearing)
        return found


def _attempt(fn, *args):
    try:
        return fn(*args)
    except (MarketError, DemandError) as exc:
        return f"n/a ({exc})"


def solve(scenario: Scenario, grid: GridConfig | None = None) -> MarketReport:
    """Build every candidate the characterisation allows and verify each with the oracle."""
    market = scenario.market
    grid = grid or scenario.grid
    notes: list[str] = []
    contest = contest_shares(market, market.clearing_price)
    caps = tuple(reserve_cap(market, i) for i in range(market.n))

    mc_report = None
    try:
        mc = market_clearing_candidate(market)
        mc_report = CandidateReport(mc, verify_equilibrium(market, mc.profile, grid))
    except MarketError as exc:
        notes.append(f"market-clearing candidate unavailable: {exc}")

    setters = []
    for i in range(market.n):
        if contest.shares[i] <= 0:
            continue
        try:
            cand = price_setter_candidate(market, i, damping=scenario.damping)
        except MarketError as exc:
            notes.append(f"price-setter {i} unavailable: {exc}")
            continue
        if cand.clearing_price <= market.clearing_price:
            continue
        setters.append(CandidateReport(cand, verify_equilibrium(market, cand.profile, grid)))

    return MarketReport(
        reserve_caps=caps,
        c_star=contest.c_star,
        shares=contest.shares,
        market_clearing=mc_report,
        price_setters=tuple(setters),
        regular=_attempt(sufficiency_regular, market),
        exact=_attempt(sufficiency_threshold, market),
        block_reward_bound=_attempt(min_block_reward, market),
        notes=tuple(notes),
    )


def sweep_row(scenario: Scenario, value, grid: GridConfig | None = None) -> dict:
    """One CSV row of sweep output for the scenario at one parameter value."""
    report = solve(scenario, grid)
    mc = report.market_clearing
    best_ps = max(report.price_setters, key=lambda r: r.candidate.clearing_price, default=None)
    exact = report.exact
    return {
        "param_value": value,
        "clearing_price_mc": scenario.market.clearing_price,
        "mc_exists": bool(mc and mc.verdict.is_equilibrium),
        "best_ps_price": best_ps.candidate.clearing_price if best_ps else math.nan,
        "ps_exists_any": any(r.verdict.is_equilibrium for r in report.price_setters),
        "max_oracle_gain": mc.verdict.max_gain if mc else math.nan,
        "c_star": report.c_star,
        "x_max": max(report.shares),
        "sufficiency_exact": exact.passed if isinstance(exact, SufficiencyResult) else "",
        "sufficiency_regular": report.regular if isinstance(report.regular, bool) else "",
        "exact_threshold": exact.threshold if isinstance(exact, SufficiencyResult) else math.nan,
        "ps_count": len(report.price_setters),
    }
