"""Brute-force verification of ledger-game profiles.

The search is independent of the closed-form characterisation: for one miner it
scans investments and reserves jointly, ranks them with a vectorised copy of the
canonical clearing rule, and re-scores the best few with
:func:`blockspace.auction.canonical_clear` through :func:`all_payoffs`. Reported
payoffs therefore always come from the exact engine.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .market import LedgerMarket, StrategyProfile, all_payoffs, profile_payoff, reserve_cap

__all__ = [
    "GridConfig",
    "Deviation",
    "Verdict",
    "profile_payoff",
    "best_response",
    "verify_equilibrium",
    "reserve_payoffs",
    "FpaWinner",
    "fpa_rule_apply",
]


@dataclass(frozen=True)
class GridConfig:
    q_points: int = 512
    r_points: int = 512
    q_max_multiplier: float = 4.0
    tolerance: float = 1e-7
    refine_rounds: int = 2
    exact_checks: int = 8

    def __post_init__(self) -> None:
        if self.q_points < 2 or self.r_points < 2:
            raise ValueError("grid counts must be at least 2")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if self.q_max_multiplier <= 0:
            raise ValueError("q_max_multiplier must be positive")

    def refined(self, factor: int = 2) -> "GridConfig":
        return GridConfig(
            self.q_points * factor,
            self.r_points * factor,
            self.q_max_multiplier,
            self.tolerance,
            self.refine_rounds,
            self.exact_checks,
        )


@dataclass(frozen=True)
class Deviation:
    miner: int
    investment: float
    reserve: float
    payoff: float
    gain: float


@dataclass(frozen=True)
class Verdict:
    is_equilibrium: bool
    max_gain: float
    witness: Deviation | None
    tolerance: float


class _OthersBook:
    """Other miners' offers grouped into reserve levels, ready for vectorised clearing."""

    def __init__(self, market: LedgerMarket, profile: StrategyProfile, i: int):
        others = [k for k in range(market.n) if k != i]
        self.other_investment = math.fsum(profile.investments[k] for k in others)
        reserves = sorted({profile.reserves[k] for k in others})
        self.levels = np.array(reserves)
        # investment sitting exactly at each level
        self.level_investment = np.array(
            [math.fsum(profile.investments[k] for k in others if profile.reserves[k] == r) for r in reserves]
        )


def _clear_rows(
    market: LedgerMarket,
    book: _OthersBook,
    unit_cost: float,
    investments: np.ndarray,
    reserves: np.ndarray,
) -> np.ndarray:
    """Auction revenue of the deviator for each row's investment and each reserve in that row.

    ``investments`` has shape ``(rows,)`` and ``reserves`` shape ``(rows, cols)``.
    Mirrors :func:`canonical_clear` on the merged book of the deviator and the
    other miners' reserve levels.
    """
    curve = market.curve
    q_a = market.append_supply
    pot = investments + book.other_investment
    own = np.where(pot > 0, q_a * investments / np.where(pot > 0, pot, 1.0), 0.0)
    scale = np.where(pot > 0, q_a / np.where(pot > 0, pot, 1.0), 0.0)
    level_q = scale[:, None] * book.level_investment[None, :]
    cum = np.concatenate([np.zeros((len(own), 1)), np.cumsum(level_q, axis=1)], axis=1)

    # clearing-price candidates of the other levels, below or above the deviator's reserve
    low_alone = np.where(
        cum[:, 1:] > 0,
        np.maximum(book.levels[None, :], curve.lower_inverse_array(cum[:, 1:])),
        np.inf,
    )
    low_joint = np.maximum(book.levels[None, :], curve.lower_inverse_array(cum[:, 1:] + own[:, None]))
    prefix_min = np.concatenate(
        [np.full((len(own), 1), np.inf), np.minimum.accumulate(low_alone, axis=1)], axis=1
    )
    suffix_min = np.concatenate(
        [np.minimum.accumulate(low_joint[:, ::-1], axis=1)[:, ::-1], np.full((len(own), 1), np.inf)],
        axis=1,
    )
    reach = curve.lower_inverse_array(cum + own[:, None])

    idx_lt = np.searchsorted(book.levels, reserves, side="left")
    idx_le = np.searchsorted(book.levels, reserves, side="right")
    rows = np.arange(len(own))[:, None]
    own_price = np.maximum(reserves, reach[rows, idx_le])
    own_price = np.where(own[:, None] > 0, own_price, np.inf)
    price = np.minimum.reduce(
        [
            np.full(reserves.shape, curve.lower_inverse(0.0)),
            prefix_min[rows, idx_lt],
            suffix_min[rows, idx_lt],
            own_price,
        ]
    )
    below = cum[rows, idx_lt]
    at_level = cum[rows, idx_le] - below
    cleared = np.minimum(curve.eval_array(price), own[:, None] + cum[rows, idx_le])
    residual = np.maximum(0.0, cleared - below)
    tie_share = np.where(
        own[:, None] + at_level > 0, own[:, None] / np.maximum(own[:, None] + at_level, 1e-300), 0.0
    )
    sold = np.where(
        reserves < price, own[:, None], np.where(reserves == price, residual * tie_share, 0.0)
    )
    return sold * (price - unit_cost)


def _reserve_candidates(
    market: LedgerMarket,
    book: _OthersBook,
    i: int,
    investments: np.ndarray,
    grid: np.ndarray,
    extra: Sequence[float],
) -> np.ndarray:
    """Reserve grid plus per-row analytic points: segment optima, sell-out prices, undercuts."""
    curve = market.curve
    q_a = market.append_supply
    unit_cost = market.write_costs[i]
    pot = investments + book.other_investment
    scale = np.where(pot > 0, q_a / np.where(pot > 0, pot, 1.0), 0.0)
    own = scale * investments
    cum = np.concatenate(
        [np.zeros((len(own), 1)), np.cumsum(scale[:, None] * book.level_investment[None, :], axis=1)],
        axis=1,
    )
    columns = [np.broadcast_to(grid, (len(own), len(grid)))]
    fixed = list(extra) + list(book.levels)
    fixed += [np.nextafter(r, -math.inf) for r in book.levels if r > 0]
    columns.append(np.broadcast_to(np.array(fixed), (len(own), len(fixed))))
    totals = cum + own[:, None]
    columns.append(curve.upper_inverse_array(totals))
    columns.append(curve.lower_inverse_array(totals))
    for seg in curve.segments:
        if seg.slope <= 0:
            continue
        intercept = seg.m_lo + seg.slope * seg.lo
        stationary = (intercept - cum + seg.slope * unit_cost) / (2 * seg.slope)
        columns.append(np.clip(stationary, seg.lo, seg.hi))
    return np.maximum(np.concatenate(columns, axis=1), 0.0)


def _investment_grid(market: LedgerMarket, profile: StrategyProfile, book: _OthersBook,
                     i: int, grid: GridConfig) -> np.ndarray:
    total = profile.total_investment
    if total <= 0:
        best_margin = market.curve.v_max + market.block_reward
        total = market.append_supply * max(best_margin, 1e-12) / min(market.resource_costs)
    top = grid.q_max_multiplier * total
    parts = [
        np.linspace(0.0, top, grid.q_points),
        top * np.logspace(-8, 0, max(grid.q_points // 8, 2)),
        [profile.investments[i]],
    ]
    if book.other_investment > 0:
        shares = np.linspace(0.0, 1.0, grid.q_points + 1)[1:-1]
        parts.append(book.other_investment * shares / (1 - shares))
    return np.unique(np.concatenate([np.asarray(p, dtype=float) for p in parts]))


def _payoff_rows(market: LedgerMarket, book: _OthersBook, i: int, investments: np.ndarray,
                 reserve_grid: np.ndarray, extra: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    reserves = _reserve_candidates(market, book, i, investments, reserve_grid, extra)
    revenue = _clear_rows(market, book, market.write_costs[i], investments, reserves)
    pot = investments + book.other_investment
    share = np.where(pot > 0, investments / np.where(pot > 0, pot, 1.0), 0.0)
    fixed = market.block_reward * market.append_supply * share - investments * market.resource_costs[i]
    payoff = revenue + fixed[:, None]
    payoff[investments == 0, :] = 0.0
    return payoff, reserves


def best_response(
    market: LedgerMarket,
    profile: StrategyProfile,
    i: int,
    grid: GridConfig = GridConfig(),
    reserve_ceiling: float | None = None,
) -> tuple[float, Deviation]:
    """Best payoff miner ``i`` can reach by changing its own investment and reserve.

    Reserves are searched on ``[0, reserve_ceiling]`` (default: the miner's
    reserve cap) plus analytic points. The returned payoff is exact.
    """
    book = _OthersBook(market, profile, i)
    current = profile_payoff(market, profile, i)
    ceiling = reserve_cap(market, i) if reserve_ceiling is None else reserve_ceiling
    reserve_grid = np.linspace(0.0, ceiling, grid.r_points)
    extra = [0.0, ceiling, profile.reserves[i], market.clearing_price]

    investments = _investment_grid(market, profile, book, i, grid)
    ranked: list[tuple[float, float, float]] = []
    for _ in range(grid.refine_rounds + 1):
        payoff, reserves = _payoff_rows(market, book, i, investments, reserve_grid, extra)
        cols = np.argmax(payoff, axis=1)
        best = payoff[np.arange(len(investments)), cols]
        order = np.argsort(-best, kind="stable")[: grid.exact_checks]
        ranked += [(float(best[k]), float(investments[k]), float(reserves[k, cols[k]])) for k in order]
        k_star = int(order[0])
        lo = investments[max(k_star - 1, 0)]
        hi = investments[min(k_star + 1, len(investments) - 1)]
        if hi <= lo:
            break
        investments = np.linspace(lo, hi, 65)

    best_payoff, best_dev = current, (profile.investments[i], profile.reserves[i])
    ranked.sort(key=lambda t: -t[0])
    seen = set()
    for _, q, r in ranked:
        if (q, r) in seen:
            continue
        seen.add((q, r))
        if len(seen) > 2 * grid.exact_checks:
            break
        value = profile_payoff(market, profile.replace_miner(i, q, r), i)
        if value > best_payoff:
            best_payoff, best_dev = value, (q, r)
    deviation = Deviation(i, best_dev[0], best_dev[1], best_payoff, best_payoff - current)
    return best_payoff, deviation


def verify_equilibrium(
    market: LedgerMarket, profile: StrategyProfile, grid: GridConfig = GridConfig()
) -> Verdict:
    """Equilibrium iff no miner's best response beats its payoff by more than the tolerance.

    The witness is the largest violating deviation and is only set when the
    verdict fails.
    """
    witness: Deviation | None = None
    for i in range(market.n):
        _, dev = best_response(market, profile, i, grid)
        if witness is None or dev.gain > witness.gain:
            witness = dev
    assert witness is not None
    max_gain = max(witness.gain, 0.0)
    ok = max_gain <= grid.tolerance
    return Verdict(ok, max_gain, None if ok else witness, grid.tolerance)


def reserve_payoffs(
    market: LedgerMarket, profile: StrategyProfile, i: int, reserves: np.ndarray
) -> np.ndarray:
    """Exact payoff of miner ``i`` for each reserve, holding every investment fixed."""
    return np.array(
        [profile_payoff(market, profile.replace_miner(i, profile.investments[i], float(r)), i)
         for r in reserves]
    )


@dataclass(frozen=True)
class FpaWinner:
    bidder: int
    mass: float
    payment: float


def fpa_rule_apply(
    bids: Sequence[tuple[float, float]], capacity: float, reserve: float
) -> tuple[list[FpaWinner], float]:
    """One first-price auction with reserve over a finite bid population.

    ``bids`` are ``(mass, bid)`` pairs. The effective price is the larger of the
    reserve and the highest bid level at which bid mass still covers the
    capacity. Bids above it win in full, bids at it share what capacity is left
    pro rata, and every winner pays its own bid.
    """
    if any(m <= 0 for m, _ in bids):
        raise ValueError("bid masses must be positive")
    levels = sorted({b for _, b in bids}, reverse=True)
    cover = 0.0
    cutoff = 0.0
    for level in levels:
        cover += math.fsum(m for m, b in bids if b == level)
        if cover >= capacity:
            cutoff = level
            break
    price = max(cutoff, reserve)
    above = math.fsum(m for m, b in bids if b > price)
    at = math.fsum(m for m, b in bids if b == price)
    fill = min(1.0, max(0.0, capacity - above) / at) if at > 0 else 0.0
    winners = []
    for k, (m, b) in enumerate(bids):
        if b > price:
            winners.append(FpaWinner(k, m, b))
        elif b == price and fill > 0:
            winners.append(FpaWinner(k, m * fill, b))
    return winners, price
