"""Built-in worked examples with pinned expected values."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .ledger_model import (
    NoFiniteBoundError,
    market_clearing_candidate,
    min_block_reward,
    price_setter_candidate,
    sufficiency_threshold,
)
from .auction import canonical_clear
from .market import LedgerMarket, all_payoffs, seller_book
from .oracle import GridConfig, verify_equilibrium
from .price_setting import PriceSettingInstance, saturated_threshold
from .scenario import Scenario
from .tullock import c_star


@dataclass(frozen=True)
class Check:
    label: str
    expected: object
    actual: object
    passed: bool

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return f"{status}  {self.label}: expected {_fmt(self.expected)}, got {_fmt(self.actual)}"


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _close(label: str, expected: float, actual: float, tol: float) -> Check:
    return Check(label, expected, actual, abs(actual - expected) <= tol)


def _flag(label: str, expected: bool, actual: bool) -> Check:
    return Check(label, expected, actual, expected == actual)


SCENARIOS: dict[str, dict] = {
    "example-5-3-1": {
        "demand": {"family": "linear"},
        "protocol": {"append_supply": 1.0, "block_reward": 0.0},
        "miners": {"count": 3, "resource_cost": 1.0},
    },
    "qa-0.75-n3": {
        "demand": {"family": "linear"},
        "protocol": {"append_supply": 0.75, "block_reward": 0.0},
        "miners": {"count": 3, "resource_cost": 1.0},
    },
    "tightness-delta-0.25": {
        "demand": {"family": "tightness", "delta": 0.25},
        "protocol": {"append_supply": 1.0, "block_reward": 0.0},
        "miners": {"count": "auto", "resource_cost": 1.0},
    },
    "tightness-delta-0.5": {
        "demand": {"family": "tightness", "delta": 0.5},
        "protocol": {"append_supply": 1.0, "block_reward": 0.0},
        "miners": {"count": "auto", "resource_cost": 1.0},
    },
    "min-blockreward-demo": {
        "demand": {"family": "linear"},
        "protocol": {"append_supply": 0.5, "block_reward": 0.0},
        "miners": {"count": 3, "resource_cost": 1.0},
    },
}

TIGHTNESS_REWARDS = (0.0, 1.0, 100.0)


def scenario(name: str) -> Scenario:
    if name not in SCENARIOS:
        raise KeyError(name)
    return Scenario.from_dict(SCENARIOS[name])


def _example_531(market: LedgerMarket, grid: GridConfig) -> list[Check]:
    checks = [_close("critical cost", 1.5, c_star(market.resource_costs).c_star, 1e-12)]
    setter = price_setter_candidate(market, 0)
    outcome = canonical_clear(seller_book(market, setter.profile), market.curve)
    checks += [
        _close("price-setter reserve", 1 / 6, setter.clearing_price, 1e-9),
        _close("total investment", 1 / 9, setter.total_investment, 1e-9),
        _close("investment per miner", 1 / 27, setter.investments[0], 1e-9),
        _close("price-setter auction revenue", 1 / 36, outcome.sold[0] * outcome.price, 1e-9),
        _close("price-setter payoff", -1 / 108, all_payoffs(market, setter.profile)[0], 1e-9),
    ]
    quantities = (market.append_supply / market.n,) * market.n
    instance = PriceSettingInstance(quantities, market.write_costs, market.curve)
    checks.append(_close("saturated threshold", 0.0, saturated_threshold(instance, 0), 1e-12))
    candidates = [market_clearing_candidate(market)] + [
        price_setter_candidate(market, i) for i in range(market.n)
    ]
    verdicts = [verify_equilibrium(market, c.profile, grid) for c in candidates]
    checks.append(_flag("some candidate is an equilibrium", False, any(v.is_equilibrium for v in verdicts)))
    setter_gain = min(v.max_gain for v in verdicts[1:])
    checks.append(Check("price-setter witness gain", f">= {1 / 108 - grid.tolerance:.6g}",
                        setter_gain, setter_gain >= 1 / 108 - grid.tolerance))
    return checks


def _qa_075(market: LedgerMarket, grid: GridConfig) -> list[Check]:
    result = sufficiency_threshold(market)
    mc = market_clearing_candidate(market)
    verdict = verify_equilibrium(market, mc.profile, grid)
    lopsided = LedgerMarket.build(market.curve, market.append_supply, (1.0, 1e6), market.write_costs[0])
    lopsided_result = sufficiency_threshold(lopsided)
    return [
        _close("exact cover threshold", 2 / 3, result.threshold, 1e-6),
        _flag("exact sufficiency test passes", True, result.passed),
        _flag("oracle confirms market clearing", True, verdict.is_equilibrium),
        _flag("near-monopolist share passes", False, lopsided_result.passed),
    ]


def _tightness(market: LedgerMarket, grid: GridConfig) -> list[Check]:
    delta = market.curve.prices[1]
    shares = c_star(market.resource_costs).shares
    instance = PriceSettingInstance(
        tuple(market.append_supply * x for x in shares), market.write_costs, market.curve
    )
    checks = [
        _close("largest share", delta, max(shares), 1e-9),
        _close("saturated threshold", delta, saturated_threshold(instance, 0), 1e-9),
    ]
    try:
        min_block_reward(market)
        checks.append(_flag("no finite block-reward bound", True, False))
    except NoFiniteBoundError:
        checks.append(_flag("no finite block-reward bound", True, True))
    for reward in TIGHTNESS_REWARDS:
        target = market.with_block_reward(reward)
        verdict = verify_equilibrium(target, market_clearing_candidate(target).profile, grid)
        checks.append(
            Check(f"oracle finds a profitable deviation at B={reward:g}", f"> {grid.tolerance:g}",
                  verdict.max_gain, verdict.max_gain > grid.tolerance)
        )
    return checks


def _min_reward(market: LedgerMarket, grid: GridConfig) -> list[Check]:
    bound = min_block_reward(market).bound
    target = market.with_block_reward(bound)
    verdict = verify_equilibrium(target, market_clearing_candidate(target).profile, grid)
    return [
        _close("block-reward bound", 4.5, bound, 1e-9),
        Check("oracle gain at the bound", f"<= {grid.tolerance:g}", verdict.max_gain,
              verdict.is_equilibrium),
    ]


RUNNERS: dict[str, Callable[[LedgerMarket, GridConfig], list[Check]]] = {
    "example-5-3-1": _example_531,
    "qa-0.75-n3": _qa_075,
    "tightness-delta-0.25": _tightness,
    "tightness-delta-0.5": _tightness,
    "min-blockreward-demo": _min_reward,
}


def run(name: str, grid: GridConfig | None = None) -> list[Check]:
    """Run a named example; raises ``KeyError`` for unknown names."""
    sc = scenario(name)
    return RUNNERS[name](sc.market, grid or sc.grid)
