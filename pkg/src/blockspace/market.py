"""The two-stage ledger game: miners buy blockspace, then resell it at auction.

Upstream, miners invest in a proportional contest and each receives a share of
the protocol's append supply ``Q_A`` (plus the same share of the block reward).
Downstream, every miner posts its appends with a reserve into simultaneous
first-price auctions against the user demand curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

from .auction import SellerBook, SellerOffer, canonical_clear
from .demand import DemandCurve, best_residual_revenue


class MarketError(ValueError):
    """Raised for invalid market parameters."""


@dataclass(frozen=True)
class LedgerMarket:
    curve: DemandCurve
    append_supply: float
    resource_costs: tuple[float, ...]
    write_costs: tuple[float, ...]
    block_reward: float = 0.0

    def __post_init__(self) -> None:
        costs = tuple(float(c) for c in self.resource_costs)
        writes = tuple(float(c) for c in self.write_costs)
        if len(writes) == 1 and len(costs) > 1:
            writes = writes * len(costs)
        object.__setattr__(self, "resource_costs", costs)
        object.__setattr__(self, "write_costs", writes)
        object.__setattr__(self, "append_supply", float(self.append_supply))
        object.__setattr__(self, "block_reward", float(self.block_reward))
        if len(costs) < 2:
            raise MarketError("a market needs at least two miners")
        if len(writes) != len(costs):
            raise MarketError("write costs must be a scalar or one value per miner")
        if min(costs) <= 0:
            raise MarketError("resource costs must be positive")
        if min(writes) < 0:
            raise MarketError("write costs must be non-negative")
        if not 0 < self.append_supply <= self.curve.eval(0.0):
            raise MarketError("append supply must be positive and at most the demand at price 0")
        if self.block_reward < 0:
            raise MarketError("block reward must be non-negative")

    @classmethod
    def build(
        cls,
        curve: DemandCurve,
        append_supply: float,
        resource_costs: Sequence[float],
        write_cost: float | Sequence[float] = 0.0,
        block_reward: float = 0.0,
    ) -> "LedgerMarket":
        if isinstance(write_cost, (int, float)):
            writes: tuple[float, ...] = (float(write_cost),) * len(resource_costs)
        else:
            writes = tuple(write_cost)
        return cls(curve, append_supply, tuple(resource_costs), writes, block_reward)

    @property
    def n(self) -> int:
        return len(self.resource_costs)

    @property
    def symmetric(self) -> bool:
        """Whether all miners share one write cost."""
        return len(set(self.write_costs)) == 1

    @property
    def write_cost(self) -> float:
        if not self.symmetric:
            raise MarketError("write costs differ across miners")
        return self.write_costs[0]

    @property
    def clearing_price(self) -> float:
        """Highest price at which users absorb the full append supply."""
        return self.curve.upper_inverse(self.append_supply)

    def with_block_reward(self, block_reward: float) -> "LedgerMarket":
        return replace(self, block_reward=float(block_reward))


@dataclass(frozen=True)
class StrategyProfile:
    investments: tuple[float, ...]
    reserves: tuple[float, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "investments", tuple(float(q) for q in self.investments))
        object.__setattr__(self, "reserves", tuple(float(r) for r in self.reserves))
        if len(self.investments) != len(self.reserves):
            raise MarketError("investments and reserves must have the same length")
        if min(self.investments) < 0 or min(self.reserves) < 0:
            raise MarketError("investments and reserves must be non-negative")

    @property
    def total_investment(self) -> float:
        return math.fsum(self.investments)

    def replace_miner(self, i: int, investment: float, reserve: float) -> "StrategyProfile":
        q = list(self.investments)
        r = list(self.reserves)
        q[i], r[i] = investment, reserve
        return StrategyProfile(tuple(q), tuple(r))


def append_quantities(market: LedgerMarket, profile: StrategyProfile) -> tuple[float, ...]:
    """Each miner's appends, proportional to investment; all zero if nobody invests."""
    total = profile.total_investment
    if total <= 0:
        return (0.0,) * market.n
    return tuple(market.append_supply * q / total for q in profile.investments)


def seller_book(market: LedgerMarket, profile: StrategyProfile) -> SellerBook:
    quantities = append_quantities(market, profile)
    return SellerBook(
        tuple(SellerOffer(q, r, k) for k, (q, r) in enumerate(zip(quantities, profile.reserves)))
    )


def all_payoffs(market: LedgerMarket, profile: StrategyProfile) -> tuple[float, ...]:
    """Auction revenue net of write costs, minus contest cost, plus block-reward share."""
    if len(profile.investments) != market.n:
        raise MarketError("profile size does not match the number of miners")
    total = profile.total_investment
    if total <= 0:
        return (0.0,) * market.n
    outcome = canonical_clear(seller_book(market, profile), market.curve)
    out = []
    for k in range(market.n):
        q = profile.investments[k]
        if q == 0:
            out.append(0.0)
            continue
        revenue = outcome.sold[k] * (outcome.price - market.write_costs[k])
        reward = market.block_reward * market.append_supply * q / total
        out.append(revenue - q * market.resource_costs[k] + reward)
    return tuple(out)


def profile_payoff(market: LedgerMarket, profile: StrategyProfile, i: int) -> float:
    return all_payoffs(market, profile)[i]


def reserve_cap(market: LedgerMarket, i: int) -> float:
    """Reserve above which miner ``i`` never gains: its capped monopoly price."""
    lower = market.curve.lower_inverse(market.append_supply)
    return best_residual_revenue(market.curve, market.write_costs[i], lower)[0]
