"""Closed-form equilibrium candidates and existence tests for the ledger game.

Every pure equilibrium has contest shares fixed by the critical cost and a
clearing price that is either the market-clearing price (all appends sell) or a
single miner's price-setting reserve. This module builds those candidates,
evaluates the analytic sufficiency tests, and handles block-reward changes.
Candidate payoffs always come from :func:`blockspace.market.all_payoffs`, the
same function the brute-force oracle uses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import minimize_scalar

from .demand import DemandError, capped_monopoly_revenue, check_regular, cover_function
from .market import LedgerMarket, MarketError, StrategyProfile, all_payoffs, reserve_cap
from .price_setting import PriceSettingInstance, price_setter_optimum, saturated_threshold
from .tullock import ContestShares, CostProfile, MonopolyUnsupportedError, c_star, c_star_asym

__all__ = [
    "CandidateKind",
    "EquilibriumCandidate",
    "SufficiencyResult",
    "BlockRewardBound",
    "DegenerateMarketError",
    "NonConvergenceError",
    "NoFiniteBoundError",
    "reserve_cap",
    "contest_shares",
    "market_clearing_candidate",
    "price_setter_candidate",
    "price_setter_candidates",
    "deviation_payoff_yz",
    "L_value",
    "sufficiency_regular",
    "sufficiency_threshold",
    "block_reward_rescale",
    "min_block_reward",
]

SHARE_SLACK = 1e-9


class DegenerateMarketError(MarketError):
    """Raised when a formula's denominator or reward per append is not positive."""


class NonConvergenceError(ArithmeticError):
    """Raised when the damped price iteration does not settle."""

    def __init__(self, message: str, trace: list[float]):
        super().__init__(message)
        self.trace = trace


class NoFiniteBoundError(MarketError):
    """Raised when no finite block reward is guaranteed to restore market clearing."""


class CandidateKind(str, Enum):
    MARKET_CLEARING = "market_clearing"
    PRICE_SETTER = "price_setter"


@dataclass(frozen=True)
class EquilibriumCandidate:
    kind: CandidateKind
    investments: tuple[float, ...]
    reserves: tuple[float, ...]
    clearing_price: float
    quantities: tuple[float, ...]
    shares: tuple[float, ...]
    payoffs: tuple[float, ...]
    c_star: float
    setter: int | None = None
    flags: tuple[str, ...] = field(default=())

    @property
    def profile(self) -> StrategyProfile:
        return StrategyProfile(self.investments, self.reserves)

    @property
    def total_investment(self) -> float:
        return math.fsum(self.investments)

    @property
    def label(self) -> str:
        if self.kind is CandidateKind.MARKET_CLEARING:
            return "market-clearing"
        return f"price-setter({self.setter})"


@dataclass(frozen=True)
class SufficiencyResult:
    threshold: float
    thresholds: tuple[float, ...]
    shares: tuple[float, ...]
    per_miner_pass: tuple[bool, ...]
    exact: bool

    @property
    def passed(self) -> bool:
        return all(self.per_miner_pass)


@dataclass(frozen=True)
class BlockRewardBound:
    bound: float
    epsilon: tuple[float, ...]
    revenue_cap: tuple[float, ...]
    share_level: float = 0.0


def contest_shares(market: LedgerMarket, price: float) -> ContestShares:
    """Contest shares when appends are worth ``price`` to the miners."""
    if market.symmetric:
        return c_star(market.resource_costs)
    profile = CostProfile(market.resource_costs, market.write_costs, market.block_reward, price)
    try:
        return c_star_asym(profile)
    except MonopolyUnsupportedError as exc:
        raise DegenerateMarketError(f"at price {price:.6g}: {exc}") from exc


def _total_investment(market: LedgerMarket, contest: ContestShares, price: float) -> float:
    if market.symmetric:
        margin = price + market.block_reward - market.write_cost
        if margin < 0:
            raise DegenerateMarketError(
                f"reward per append {margin:.6g} is negative at price {price:.6g}"
            )
        return market.append_supply * margin / contest.c_star
    return market.append_supply / contest.c_star


def _assemble(
    market: LedgerMarket,
    kind: CandidateKind,
    contest: ContestShares,
    price: float,
    reserves: tuple[float, ...],
    setter: int | None,
    flags: tuple[str, ...],
) -> EquilibriumCandidate:
    total = _total_investment(market, contest, price)
    investments = tuple(x * total for x in contest.shares)
    if total == 0:
        flags = flags + ("zero reward per append: nobody invests",)
        quantities = (0.0,) * market.n
    else:
        quantities = tuple(market.append_supply * x for x in contest.shares)
    profile = StrategyProfile(investments, reserves)
    return EquilibriumCandidate(
        kind=kind,
        investments=investments,
        reserves=reserves,
        clearing_price=price,
        quantities=quantities,
        shares=contest.shares,
        payoffs=all_payoffs(market, profile),
        c_star=contest.c_star,
        setter=setter,
        flags=flags,
    )


def market_clearing_candidate(market: LedgerMarket) -> EquilibriumCandidate:
    """All miners reserve at the market-clearing price and every append sells."""
    price = market.clearing_price
    contest = contest_shares(market, price)
    return _assemble(
        market, CandidateKind.MARKET_CLEARING, contest, price, (price,) * market.n, None, ()
    )


def _setter_price(market: LedgerMarket, contest: ContestShares, i: int) -> float:
    quantities = tuple(market.append_supply * x for x in contest.shares)
    if quantities[i] <= 0:
        raise DegenerateMarketError(f"miner {i} wins no appends and cannot set the price")
    instance = PriceSettingInstance(quantities, market.write_costs, market.curve)
    return price_setter_optimum(instance, i)[0]


def price_setter_candidate(
    market: LedgerMarket,
    i: int,
    *,
    damping: float = 0.5,
    max_iterations: int = 10_000,
    tolerance: float = 1e-9,
) -> EquilibriumCandidate:
    """Miner ``i`` prices the residual demand; everyone else reserves at 0.

    With a common write cost the shares do not depend on the price, so one
    argmax suffices. With miner-specific write costs the shares depend on the
    price, and the price on the shares; a damped fixed-point iteration couples
    the two.
    """
    p0 = market.clearing_price
    if market.symmetric:
        contest = contest_shares(market, p0)
        price = _setter_price(market, contest, i)
    else:
        price = p0
        trace = [price]
        for _ in range(max_iterations):
            contest = contest_shares(market, price)
            target = _setter_price(market, contest, i)
            step = target - price
            trace.append(target)
            if abs(step) <= tolerance:
                price = target
                break
            price += (1 - damping) * step
        else:
            raise NonConvergenceError(
                f"price-setter iteration for miner {i} did not converge", trace[-20:]
            )
        contest = contest_shares(market, price)
    flags: tuple[str, ...] = ()
    if price <= p0:
        flags = ("setter price does not exceed the market-clearing price",)
    reserves = tuple(price if k == i else 0.0 for k in range(market.n))
    return _assemble(market, CandidateKind.PRICE_SETTER, contest, price, reserves, i, flags)


def price_setter_candidates(market: LedgerMarket, **kwargs) -> list[EquilibriumCandidate]:
    """Candidates for every miner that wins appends and prices strictly above clearing."""
    out = []
    for i in range(market.n):
        try:
            cand = price_setter_candidate(market, i, **kwargs)
        except DegenerateMarketError:
            continue
        if cand.clearing_price > market.clearing_price:
            out.append(cand)
    return out


def _reward_at_clearing(market: LedgerMarket) -> float:
    return market.append_supply * (market.clearing_price + market.block_reward - market.write_cost)


def deviation_payoff_yz(market: LedgerMarket, i: int, y: float, z: float) -> float:
    """Payoff of miner ``i`` after leaving share ``y`` to others and selling ``z * Q_A`` in total.

    Others keep their market-clearing investments. The deviator wins ``1 - y``
    of the appends, prices at the level that clears ``z * Q_A`` and so sells
    ``(z - y) * Q_A``. The block-reward term vanishes when ``B = 0``.
    """
    if y <= 0:
        raise DegenerateMarketError("y = 0 requires unbounded investment")
    if not y <= z <= 1:
        raise ValueError("need 0 < y <= z <= 1")
    curve = market.curve
    w = market.write_cost
    q_a = market.append_supply
    contest = c_star(market.resource_costs)
    x = contest.shares[i]
    cost_ratio = market.resource_costs[i] / contest.c_star
    reward = _reward_at_clearing(market)
    sales = (1 - y / z) * z * q_a * (curve.upper_inverse(z * q_a) - w)
    subsidy = market.block_reward * q_a * (1 - y)
    return sales + subsidy - (1 / y - 1) * cost_ratio * (1 - x) * reward


def _deviation_cost_weight(market: LedgerMarket, i: int) -> tuple[float, float]:
    """Share ``x_i`` and the weight ``(c_i / c*) (1 - x_i)`` of the investment-cost term.

    For active miners ``c_i / c* = 1 - x_i``; inactive miners keep the cost ratio.
    """
    contest = c_star(market.resource_costs)
    x = contest.shares[i]
    return x, market.resource_costs[i] / contest.c_star * (1 - x)


def L_value(market: LedgerMarket, i: int, z: float) -> float:
    """Best deviation payoff of miner ``i`` at fixed ``z``, maximised over ``y`` (``B = 0``)."""
    if market.block_reward != 0:
        raise ValueError("the optimised deviation surface is defined for zero block reward")
    _, weight = _deviation_cost_weight(market, i)
    reward = _reward_at_clearing(market)
    if z == 1:
        return reward * (1 - math.sqrt(weight)) ** 2
    k = cover_function(market.curve, market.append_supply, market.write_cost, z)
    return reward * (k - 2 * math.sqrt(weight * k / z) + weight)


def optimal_y(market: LedgerMarket, i: int, z: float) -> float:
    """Others' share that maximises the deviation payoff at fixed ``z``, before capping at ``z``."""
    _, weight = _deviation_cost_weight(market, i)
    k = cover_function(market.curve, market.append_supply, market.write_cost, z)
    return math.sqrt(weight * z / k)


def _zero_reward_shares(market: LedgerMarket) -> tuple[float, ...]:
    if market.symmetric:
        return c_star(market.resource_costs).shares
    zero = market.with_block_reward(0.0)
    return contest_shares(zero, zero.clearing_price).shares


def sufficiency_regular(market: LedgerMarket) -> bool:
    """Demand-intercept test: largest share at most ``1 - 1/(D(0)/Q_A - 1)``.

    Returns ``False`` when the curve is not regular, since the test does not
    apply there.
    """
    ratio = market.curve.eval(0.0) / market.append_supply
    if ratio <= 1:
        raise DegenerateMarketError("demand at price 0 equals the append supply")
    if not check_regular(market.curve):
        return False
    if ratio <= 2:
        bound = -math.inf
    else:
        bound = 1 - 1 / (ratio - 1)
    return max(_zero_reward_shares(market)) <= bound + SHARE_SLACK


def _cover_ratio_sup(market: LedgerMarket, write_cost: float, grid: int = 4097) -> float:
    """``sup_z (k(z) - 1) / (2 (sqrt(k(z)/z) - 1))`` over ``z in (0, 1)``."""
    curve = market.curve
    q_a = market.append_supply
    p0 = market.clearing_price
    if p0 <= write_cost:
        raise DegenerateMarketError("market-clearing price does not exceed the write cost")

    def ratio(z: float) -> float:
        k = cover_function(curve, q_a, write_cost, z)
        denom = 2 * (math.sqrt(k / z) - 1)
        if denom <= 0:
            return -math.inf
        return (k - 1) / denom

    candidates = []
    # z -> 1: the ratio tends to 1 - (p0 - c) d(p0+) / Q_A when demand is continuous at p0
    if curve.eval_right(p0) >= q_a * (1 - 1e-12):
        slope = curve.slope_right(p0)
        if slope:
            candidates.append(1 - (p0 - write_cost) * slope / q_a)
    # z -> 0: k(z)/z tends to the relative margin at the top of the support
    top = curve.upper_inverse(0.0)
    rel = (top - write_cost) / (p0 - write_cost)
    if rel > 1:
        candidates.append(-1 / (2 * (math.sqrt(rel) - 1)))
    zs = np.linspace(0.0, 1.0, grid)[1:-1]
    values = np.array([ratio(float(z)) for z in zs])
    k_best = int(np.argmax(values))
    candidates.append(float(values[k_best]))
    lo = float(zs[max(k_best - 1, 0)])
    hi = float(zs[min(k_best + 1, len(zs) - 1)])
    if hi > lo:
        res = minimize_scalar(lambda z: -ratio(z), bounds=(lo, hi), method="bounded",
                              options={"xatol": 1e-12})
        if np.isfinite(res.fun):
            candidates.append(-float(res.fun))
    return max(candidates)


def sufficiency_threshold(market: LedgerMarket) -> SufficiencyResult:
    """Exact-cover test on the market-clearing candidate, miner by miner.

    The verdict is an if-and-only-if only when the block reward is zero. With a
    common write cost a pass stays sufficient for any reward; with
    miner-specific write costs the test is evaluated at zero reward.
    """
    shares = _zero_reward_shares(market)
    if market.symmetric:
        sup = _cover_ratio_sup(market, market.write_cost)
        thresholds = (sup,) * market.n
    else:
        thresholds = tuple(_cover_ratio_sup(market, w) for w in market.write_costs)
    passes = tuple(x <= 1 - t + SHARE_SLACK for x, t in zip(shares, thresholds))
    return SufficiencyResult(
        threshold=max(thresholds),
        thresholds=thresholds,
        shares=shares,
        per_miner_pass=passes,
        exact=market.block_reward == 0,
    )


def block_reward_rescale(
    market: LedgerMarket, candidate: EquilibriumCandidate, new_reward: float
) -> EquilibriumCandidate:
    """Candidate for a larger block reward: same reserves, investments scaled up."""
    if not market.symmetric:
        raise MarketError("rescaling applies to a common write cost only")
    if new_reward < market.block_reward:
        raise ValueError("the new block reward must not be smaller")
    margin = candidate.clearing_price + market.block_reward - market.write_cost
    if margin <= 0:
        raise DegenerateMarketError("reward per append is not positive")
    factor = (candidate.clearing_price + new_reward - market.write_cost) / margin
    target = market.with_block_reward(new_reward)
    investments = tuple(q * factor for q in candidate.investments)
    profile = StrategyProfile(investments, candidate.reserves)
    return replace(
        candidate,
        investments=investments,
        payoffs=all_payoffs(target, profile),
        flags=tuple(f for f in candidate.flags if not f.startswith("zero reward")),
    )


def _clearing_thresholds(market: LedgerMarket, quantities: tuple[float, ...]) -> tuple[float, ...]:
    """Largest append holding at which each miner still prefers to sell out at clearing."""
    instance = PriceSettingInstance(quantities, market.write_costs, market.curve)
    return tuple(saturated_threshold(instance, k) for k in range(market.n))


def min_block_reward(market: LedgerMarket, max_doublings: int = 80) -> BlockRewardBound:
    """A block reward large enough for the market-clearing candidate to be an equilibrium."""
    q_a = market.append_supply
    p0 = market.clearing_price
    base_shares = c_star(market.resource_costs).shares
    thresholds = _clearing_thresholds(market, tuple(q_a * x for x in base_shares))
    caps = tuple(capped_monopoly_revenue(market.curve, w, q_a) for w in market.write_costs)
    if market.symmetric:
        eps = thresholds[0] - q_a * max(base_shares)
        if eps <= 1e-12:
            raise NoFiniteBoundError(f"gap {eps:.3g} is not positive")
        return BlockRewardBound(2 * caps[0] / eps**2, (eps,) * market.n, caps)

    gaps = [t - q_a * x for t, x in zip(thresholds, base_shares)]
    if min(gaps) <= 1e-12:
        raise NoFiniteBoundError(f"gap {min(gaps):.3g} is not positive")

    def epsilons(reward: float) -> list[float]:
        shares = contest_shares(market.with_block_reward(reward), p0).shares
        return [t - q_a * x for t, x in zip(thresholds, shares)]

    level = max(1.0, market.block_reward)
    for _ in range(max_doublings):
        if min(epsilons(level)) > 0:
            break
        level *= 2
    else:
        raise NoFiniteBoundError("shares did not approach their limit within the search range")
    share_level = level
    reward = level
    for _ in range(200):
        eps = epsilons(reward)
        if min(eps) <= 0:
            reward *= 2
            continue
        need = max(
            2 * x_cap / (e * e * q_a) + w - p0
            for x_cap, e, w in zip(caps, eps, market.write_costs)
        )
        if need <= reward * (1 + 1e-12):
            break
        reward = need
    return BlockRewardBound(reward, tuple(eps), caps, share_level)
