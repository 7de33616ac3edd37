import math

import numpy as np
import pytest

from blockspace.demand import DemandCurve
from blockspace.ledger_model import (
    CandidateKind,
    DegenerateMarketError,
    L_value,
    NoFiniteBoundError,
    NonConvergenceError,
    block_reward_rescale,
    deviation_payoff_yz,
    market_clearing_candidate,
    min_block_reward,
    optimal_y,
    price_setter_candidate,
    price_setter_candidates,
    sufficiency_regular,
    sufficiency_threshold,
)
from blockspace.market import LedgerMarket, StrategyProfile, profile_payoff, reserve_cap
from blockspace.oracle import GridConfig, best_response, reserve_payoffs, verify_equilibrium
from conftest import random_symmetric_market

LINEAR = DemandCurve.linear()
FAST = GridConfig(q_points=192, r_points=192)


def linear_market(q_a, n=3, write=0.0, reward=0.0, costs=None):
    return LedgerMarket.build(LINEAR, q_a, costs or [1.0] * n, write, reward)


class TestReserveCap:
    def test_monopoly_price_above_lower_inverse(self):
        assert reserve_cap(linear_market(0.75), 0) == pytest.approx(0.5)

    def test_lower_bound_binds(self):
        assert reserve_cap(linear_market(0.3), 0) == pytest.approx(0.7)

    def test_no_margin(self):
        market = linear_market(0.3, write=1.0)
        assert reserve_cap(market, 0) == pytest.approx(1.0)


class TestMarketClearingCandidate:
    def test_three_quarters(self):
        c = market_clearing_candidate(linear_market(0.75))
        assert c.kind is CandidateKind.MARKET_CLEARING
        assert c.clearing_price == pytest.approx(0.25)
        assert c.total_investment == pytest.approx(1 / 8)
        assert c.investments == pytest.approx((1 / 24,) * 3)
        assert sum(c.quantities) == pytest.approx(0.75)

    def test_full_supply_is_flagged(self):
        c = market_clearing_candidate(linear_market(1.0))
        assert c.clearing_price == 0.0 and c.total_investment == 0.0
        assert any("zero reward" in f for f in c.flags)

    def test_tightness(self):
        market = LedgerMarket.build(DemandCurve.shifted_linear(0.25), 1.0, [1.0] * 4, 0.0)
        c = market_clearing_candidate(market)
        assert c.clearing_price == pytest.approx(0.25)
        assert c.shares == pytest.approx((0.25,) * 4)
        assert c.total_investment == pytest.approx(3 / 16)

    def test_write_cost_above_price(self):
        with pytest.raises(DegenerateMarketError):
            market_clearing_candidate(linear_market(0.75, write=0.5))


class TestPriceSetterCandidate:
    def test_full_supply(self):
        c = price_setter_candidate(linear_market(1.0), 0)
        assert c.clearing_price == pytest.approx(1 / 6)
        assert c.total_investment == pytest.approx(1 / 9)
        assert c.investments == pytest.approx((1 / 27,) * 3)
        assert c.reserves[1:] == (0.0, 0.0)

    def test_boundary_optimum_is_flagged(self):
        market = linear_market(0.75)
        c = price_setter_candidate(market, 0)
        # argmax of x(1/2 - x) over x >= 1/4 sits at the clearing price itself
        assert c.clearing_price == pytest.approx(0.25)
        assert any("does not exceed" in f for f in c.flags)
        assert price_setter_candidates(market) == []

    def test_dominant_miner_prices_like_a_monopolist(self):
        market = LedgerMarket.build(LINEAR, 0.75, [1.0, 1e6], 0.0)
        c = price_setter_candidate(market, 0)
        assert c.shares[0] > 0.999
        assert c.clearing_price == pytest.approx(0.5, abs=1e-3)

    def test_asymmetric_iteration_converges(self):
        market = LedgerMarket.build(LINEAR, 0.9, [1.0, 1.0, 1.0], [0.0, 0.02, 0.04])
        c = price_setter_candidate(market, 0)
        assert c.clearing_price > market.clearing_price

    def test_asymmetric_iteration_cap(self):
        market = LedgerMarket.build(LINEAR, 0.9, [1.0, 1.0, 1.0], [0.0, 0.02, 0.04])
        with pytest.raises(NonConvergenceError) as info:
            price_setter_candidate(market, 0, max_iterations=1)
        assert info.value.trace

    def test_candidate_b_invariance(self):
        base = linear_market(1.0)
        prices = {price_setter_candidate(base.with_block_reward(b), 1).clearing_price for b in (0, 1, 10)}
        assert len(prices) == 1


class TestDeviationSurface:
    def test_equality_case(self):
        market = linear_market(0.75)
        cand = market_clearing_candidate(market)
        x = cand.shares[0]
        assert deviation_payoff_yz(market, 0, 1 - x, 1.0) == pytest.approx(cand.payoffs[0], abs=1e-12)

    def test_matches_exact_payoff(self):
        market = linear_market(0.75)
        cand = market_clearing_candidate(market)
        # y = 2/3 and z = 1 leave investments at equilibrium
        surface = deviation_payoff_yz(market, 0, 2 / 3, 1.0)
        assert surface == pytest.approx(profile_payoff(market, cand.profile, 0), abs=1e-9)

    def test_z_equal_y_loses(self):
        market = linear_market(0.75)
        assert deviation_payoff_yz(market, 0, 0.4, 0.4) < 0

    def test_zero_y_rejected(self):
        with pytest.raises(DegenerateMarketError):
            deviation_payoff_yz(linear_market(0.75), 0, 0.0, 0.5)

    def test_l_value_at_one(self):
        market = linear_market(0.75)
        reward = 0.75 * 0.25
        assert L_value(market, 0, 1.0) == pytest.approx(reward / 9)

    def test_l_value_dominates_y_grid(self):
        market = linear_market(0.75)
        z = 2 / 3
        ys = np.linspace(1e-4, z, 20_001)
        values = [deviation_payoff_yz(market, 0, float(y), z) for y in ys]
        assert L_value(market, 0, z) >= max(values) - 1e-9
        assert ys[int(np.argmax(values))] == pytest.approx(optimal_y(market, 0, z), abs=ys[1] - ys[0])

    def test_inactive_miner_keeps_its_cost_ratio(self):
        market = LedgerMarket.build(LINEAR, 0.5, [1.0, 1.0, 2.5], 0.0)
        z = 0.8
        ys = np.linspace(1e-4, z, 20_001)
        values = [deviation_payoff_yz(market, 2, float(y), z) for y in ys]
        best = ys[int(np.argmax(values))]
        assert min(optimal_y(market, 2, z), z) == pytest.approx(best, abs=ys[1] - ys[0])
        assert L_value(market, 2, z) >= max(values) - 1e-12


class TestSufficiency:
    @pytest.mark.parametrize("q_a,n,expected", [(1 / 3, 3, True), (0.5, 2, False)])
    def test_regular_examples(self, q_a, n, expected):
        assert sufficiency_regular(linear_market(q_a, n)) is expected

    def test_regular_full_supply_degenerate(self):
        with pytest.raises(DegenerateMarketError):
            sufficiency_regular(linear_market(1.0))

    def test_irregular_curve_reports_false(self):
        curve = DemandCurve.from_points([(0, 1), (0.5, 0.2), (2, 0)])
        assert sufficiency_regular(LedgerMarket.build(curve, 0.1, [1, 1, 1])) is False

    def test_threshold_three_quarters(self):
        result = sufficiency_threshold(linear_market(0.75))
        assert result.threshold == pytest.approx(2 / 3, abs=1e-6)
        assert result.passed and result.exact

    def test_dominant_miner_fails(self):
        result = sufficiency_threshold(LedgerMarket.build(LINEAR, 0.75, [1.0, 1e6], 0.0))
        assert not result.passed

    def test_positive_reward_not_exact(self):
        assert not sufficiency_threshold(linear_market(0.75, reward=1.0)).exact

    def test_agrees_with_oracle(self):
        rng = np.random.default_rng(21)
        seen = {True: 0, False: 0}
        attempts = 0
        while sum(seen.values()) < 16 and attempts < 200:
            attempts += 1
            market = random_symmetric_market(rng)
            result = sufficiency_threshold(market)
            margin = min(abs((1 - t) - x) for t, x in zip(result.thresholds, result.shares))
            if margin < 0.03:
                continue
            cand = market_clearing_candidate(market)
            verdict = verify_equilibrium(market, cand.profile, FAST)
            assert verdict.is_equilibrium == result.passed, (market, result, verdict)
            seen[result.passed] += 1
        assert seen[True] >= 3 and seen[False] >= 3


class TestBlockRewards:
    def test_rescale(self):
        market = linear_market(0.75)
        cand = market_clearing_candidate(market)
        scaled = block_reward_rescale(market, cand, 1.0)
        assert scaled.total_investment == pytest.approx(5 / 8)
        assert scaled.total_investment == pytest.approx(0.75 * 1.25 / 1.5)
        assert scaled.shares == cand.shares and scaled.reserves == cand.reserves

    def test_rescale_identity(self):
        market = linear_market(0.75)
        cand = market_clearing_candidate(market)
        assert block_reward_rescale(market, cand, 0.0).investments == cand.investments

    def test_rescale_matches_fresh_candidate(self):
        market = linear_market(0.6, write=0.1)
        scaled = block_reward_rescale(market, market_clearing_candidate(market), 3.0)
        fresh = market_clearing_candidate(market.with_block_reward(3.0))
        assert scaled.investments == pytest.approx(fresh.investments, rel=1e-12)

    def test_rescale_degenerate(self):
        market = linear_market(1.0)
        with pytest.raises(DegenerateMarketError):
            block_reward_rescale(market, market_clearing_candidate(market), 1.0)

    def test_min_reward_half_supply(self):
        bound = min_block_reward(linear_market(0.5))
        assert bound.epsilon[0] == pytest.approx(1 / 3)
        assert bound.revenue_cap[0] == pytest.approx(0.25)
        assert bound.bound == pytest.approx(4.5, abs=1e-9)

    def test_min_reward_tightness_has_none(self):
        market = LedgerMarket.build(DemandCurve.shifted_linear(0.25), 1.0, [1.0] * 4, 0.0)
        with pytest.raises(NoFiniteBoundError):
            min_block_reward(market)

    def test_min_reward_full_supply_has_none(self):
        with pytest.raises(NoFiniteBoundError):
            min_block_reward(linear_market(1.0))

    def test_min_reward_asymmetric_confirmed_by_oracle(self):
        market = LedgerMarket.build(LINEAR, 0.5, [1.0, 1.0, 1.0], [0.0, 0.02, 0.05])
        bound = min_block_reward(market)
        assert math.isfinite(bound.bound) and bound.bound > 0
        rich = market.with_block_reward(bound.bound)
        verdict = verify_equilibrium(rich, market_clearing_candidate(rich).profile, FAST)
        assert verdict.is_equilibrium


class TestSearchProperties:
    def test_reserves_above_cap_never_help(self):
        rng = np.random.default_rng(13)
        for _ in range(10):
            market = random_symmetric_market(rng)
            n = market.n
            profile = StrategyProfile(
                tuple(rng.uniform(0.01, 1.0, n)),
                tuple(rng.uniform(0, market.curve.v_max, n)),
            )
            for i in range(n):
                cap = reserve_cap(market, i)
                capped, _ = best_response(market, profile, i, FAST, reserve_ceiling=cap)
                above = np.linspace(cap, market.curve.v_max, 200)
                assert reserve_payoffs(market, profile, i, above).max() <= capped + 1e-12

    def test_verified_profiles_satisfy_necessary_conditions(self):
        rng = np.random.default_rng(17)
        checked = 0
        for _ in range(12):
            market = random_symmetric_market(rng)
            cand = market_clearing_candidate(market)
            for c in [cand] + price_setter_candidates(market):
                if not verify_equilibrium(market, c.profile, FAST).is_equilibrium:
                    continue
                total = c.total_investment
                shares = [q / total for q in c.investments]
                assert shares == pytest.approx(list(cand.shares), abs=1e-6)
                assert c.clearing_price >= market.clearing_price
                checked += 1
        assert checked > 0
