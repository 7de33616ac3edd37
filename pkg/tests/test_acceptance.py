"""Acceptance criteria, one test each, run at their stated tolerances.

Each test records a one-line verdict that the terminal summary prints under
"acceptance criteria".
"""

import math
import time

import numpy as np
import pytest

from blockspace.auction import SellerBook, canonical_clear, clearing_bounds, cleared_range, supply_profile
from blockspace.demand import DemandCurve, cover_function
from blockspace.ledger_model import (
    block_reward_rescale,
    market_clearing_candidate,
    min_block_reward,
    optimal_y,
    price_setter_candidate,
    price_setter_candidates,
    sufficiency_regular,
    sufficiency_threshold,
)
from blockspace.market import LedgerMarket, all_payoffs
from blockspace.oracle import GridConfig, best_response, fpa_rule_apply, verify_equilibrium
from blockspace.price_setting import make_instance, saturated_threshold
from blockspace.tullock import (
    c_star,
    equilibrium_investments,
    investment_loss_bound,
    share_increase_loss_bound,
    tullock_payoff,
)
from conftest import discretised_bids, random_curve, random_symmetric_market, record

LINEAR = DemandCurve.linear()
GRID = GridConfig()


def check(criterion, failures, started, extra=""):
    passed = not failures
    detail = f"{time.perf_counter() - started:5.1f}s"
    if extra:
        detail += f"  {extra}"
    if failures:
        detail += "  " + "; ".join(failures[:4]) + (f" (+{len(failures) - 4} more)" if len(failures) > 4 else "")
    record(criterion, passed, detail)
    assert passed, detail


def test_criterion_01_worked_example():
    started = time.perf_counter()
    failures = []
    market = LedgerMarket.build(LINEAR, 1.0, [1, 1, 1], 0.0)
    contest = c_star([1, 1, 1])
    residual = math.fsum(max(0.0, 1 - c / contest.c_star) for c in (1, 1, 1)) - 1
    if contest.c_star != 1.5 or abs(residual) > 1e-12:
        failures.append(f"c* {contest.c_star!r} residual {residual:.2e}")
    ps = price_setter_candidate(market, 0)
    revenue = all_payoffs(market, ps.profile)[0] + ps.investments[0]
    for name, got, want in [
        ("price", ps.clearing_price, 1 / 6),
        ("total investment", ps.total_investment, 1 / 9),
        ("investment", ps.investments[0], 1 / 27),
        ("revenue", revenue, 1 / 36),
        ("setter payoff", ps.payoffs[0], -1 / 108),
    ]:
        if abs(got - want) > 1e-9:
            failures.append(f"{name} {got!r} != {want!r}")
    threshold = saturated_threshold(make_instance([1 / 3] * 3, 0.0, LINEAR), 0)
    if threshold != 0.0 or not 1 / 3 > threshold:
        failures.append(f"saturated threshold {threshold!r}")
    candidates = [market_clearing_candidate(market)] + [price_setter_candidate(market, i) for i in range(3)]
    for c in candidates:
        verdict = verify_equilibrium(market, c.profile, GRID)
        if verdict.is_equilibrium:
            failures.append(f"{c.label} verified as equilibrium")
        if c.setter is not None and verdict.max_gain < 1 / 108 - GRID.tolerance:
            failures.append(f"{c.label} witness gain {verdict.max_gain:.3e}")
    check(1, failures, started)


def test_criterion_02_three_quarters():
    started = time.perf_counter()
    failures = []
    market = LedgerMarket.build(LINEAR, 0.75, [1, 1, 1], 0.0)
    result = sufficiency_threshold(market)
    if abs(result.threshold - 2 / 3) > 1e-6:
        failures.append(f"sup {result.threshold!r}")
    if not result.passed:
        failures.append("n=3 fails the exact test")
    verdict = verify_equilibrium(market, market_clearing_candidate(market).profile, GRID)
    if not verdict.is_equilibrium:
        failures.append(f"oracle gain {verdict.max_gain:.3e}")
    dominant = LedgerMarket.build(LINEAR, 0.75, [1.0, 1e6], 0.0)
    if sufficiency_threshold(dominant).passed:
        failures.append("dominant-share market passes")
    check(2, failures, started, f"sup={result.threshold:.9f}")


def test_criterion_03_regular_bound_boundary():
    started = time.perf_counter()
    failures = []
    for n in range(2, 7):
        bound = (n - 1) / (2 * n)
        for q_a, expected in [(bound - 1e-9, True), (bound + 1e-9, False)]:
            got = sufficiency_regular(LedgerMarket.build(LINEAR, q_a, [1.0] * n, 0.0))
            if got != expected:
                failures.append(f"n={n} Q_A={q_a:.9f}: {got}")
    check(3, failures, started)


def test_criterion_04_block_reward_invariance():
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(404)
    for m in range(20):
        base = random_symmetric_market(rng)
        w = base.write_cost
        ref = [market_clearing_candidate(base)] + price_setter_candidates(base)
        for b in (0.0, 1.0, 10.0):
            market = base.with_block_reward(b)
            cands = [market_clearing_candidate(market)] + price_setter_candidates(market)
            if len(cands) != len(ref):
                failures.append(f"market {m} B={b}: {len(cands)} vs {len(ref)} candidates")
                continue
            for c, r0 in zip(cands, ref):
                if abs(c.clearing_price - r0.clearing_price) > 1e-12:
                    failures.append(f"market {m} B={b} {c.label} price moved")
                if max(abs(a - s) for a, s in zip(c.shares, r0.shares)) > 1e-12:
                    failures.append(f"market {m} B={b} {c.label} shares moved")
                r = r0.clearing_price
                want = (r + b - w) / (r - w)
                got = c.total_investment / r0.total_investment
                if abs(got - want) > 1e-12 * want:
                    failures.append(f"market {m} B={b} {c.label} scale {got!r} vs {want!r}")
    check(4, failures, started)


def test_criterion_05_rescale_soundness():
    started = time.perf_counter()
    failures = []
    stable = 0
    rng = np.random.default_rng(505)
    for m in range(50):
        market = random_symmetric_market(rng)
        cand = market_clearing_candidate(market)
        if not verify_equilibrium(market, cand.profile, GRID).is_equilibrium:
            continue
        stable += 1
        scaled = block_reward_rescale(market, cand, 5.0)
        verdict = verify_equilibrium(market.with_block_reward(5.0), scaled.profile, GRID)
        if not verdict.is_equilibrium:
            failures.append(f"market {m}: gain {verdict.max_gain:.3e} at B=5")
    if stable == 0:
        failures.append("no market passed at B=0")
    check(5, failures, started, f"{stable}/50 stable at B=0")


def test_criterion_06_min_block_reward():
    started = time.perf_counter()
    failures = []
    market = LedgerMarket.build(LINEAR, 0.5, [1, 1, 1], 0.0)
    bound = min_block_reward(market).bound
    if abs(bound - 4.5) > 1e-9:
        failures.append(f"bound {bound!r}")
    rich = market.with_block_reward(bound)
    verdict = verify_equilibrium(rich, market_clearing_candidate(rich).profile, GRID)
    if not verdict.is_equilibrium:
        failures.append(f"oracle gain {verdict.max_gain:.3e}")
    check(6, failures, started, f"bound={bound!r}")


def test_criterion_07_tightness_family():
    started = time.perf_counter()
    failures = []
    gains = []
    for delta in (0.25, 0.5):
        curve = DemandCurve.shifted_linear(delta)
        n = round(1 / delta)
        base = LedgerMarket.build(curve, 1.0, [1.0] * n, 0.0)
        shares = c_star(base.resource_costs).shares
        if max(abs(x - delta) for x in shares) > 1e-9:
            failures.append(f"delta={delta}: shares {shares}")
        threshold = saturated_threshold(make_instance([delta] * n, 0.0, curve), 0)
        if abs(threshold - delta) > 1e-9:
            failures.append(f"delta={delta}: threshold {threshold!r}")
        for b in (0.0, 1.0, 100.0):
            market = base.with_block_reward(b)
            verdict = verify_equilibrium(market, market_clearing_candidate(market).profile, GRID)
            gains.append(f"{delta}/{b:g}:{verdict.max_gain:.1e}")
            if verdict.max_gain <= GRID.tolerance:
                failures.append(f"delta={delta} B={b:g}: no profitable deviation (gain {verdict.max_gain:.1e})")
    check(7, failures, started)


def _surface(market, i, ys, zs):
    """Deviation payoff over a (y, z) grid from the closed form, built directly in numpy."""
    q_a = market.append_supply
    w = market.write_cost
    contest = c_star(market.resource_costs)
    x = contest.shares[i]
    reward = q_a * (market.clearing_price - w)
    prices = market.curve.upper_inverse_array(zs * q_a)
    y, z = ys[:, None], zs[None, :]
    sales = (z - y) * q_a * (prices[None, :] - w)
    cost = (1 / y - 1) * (market.resource_costs[i] / contest.c_star) * (1 - x) * reward
    return np.where(y <= z, sales - cost, -np.inf), reward


def test_criterion_08_closed_form_matches_oracle():
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(808)
    worst = 0.0
    checked = 0
    while checked < 20:
        market = random_symmetric_market(rng)
        if market.clearing_price <= market.write_cost:
            continue
        checked += 1
        profile = market_clearing_candidate(market).profile
        ys = np.linspace(1e-4, 1.0, 2001)
        zs = np.linspace(1e-3, 1.0, 2001)
        for i in range(market.n):
            surface, reward = _surface(market, i, ys, zs)
            closed = float(surface.max())
            searched, _ = best_response(market, profile, i, GRID)
            gap = abs(closed - searched)
            worst = max(worst, gap / reward)
            if gap > 2 * reward / GRID.q_points:
                failures.append(f"market {checked} miner {i}: closed {closed:.6g} vs search {searched:.6g}")
            for z in (0.3, 0.6, 0.9):
                column = surface[:, np.searchsorted(zs, z)]
                z_grid = float(zs[np.searchsorted(zs, z)])
                argmax = float(ys[int(np.argmax(column))])
                predicted = min(optimal_y(market, i, z_grid), z_grid)
                if abs(argmax - predicted) > ys[1] - ys[0]:
                    failures.append(f"market {checked} miner {i} z={z}: y {argmax:.5f} vs {predicted:.5f}")
    check(8, failures, started, f"worst gap {worst:.2e} x reward")


def test_criterion_09_tullock_properties():
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(909)
    for trial in range(1000):
        n = int(rng.integers(2, 8))
        costs = list(rng.uniform(0.1, 10, n))
        base = c_star(costs)
        alpha = float(rng.uniform(0.01, 100))
        scaled = c_star([alpha * c for c in costs])
        if abs(scaled.c_star - alpha * base.c_star) > 1e-10 * alpha * base.c_star or max(
            abs(a - b) for a, b in zip(scaled.shares, base.shares)
        ) > 1e-9:
            failures.append(f"trial {trial}: scale invariance")
        i = int(rng.integers(n))
        bumped = c_star(costs[:i] + [costs[i] * float(rng.uniform(1.01, 3))] + costs[i + 1:])
        if bumped.shares[i] > base.shares[i] + 1e-12:
            failures.append(f"trial {trial}: own share rose with own cost")
        prize = float(rng.uniform(0.1, 10))
        total = prize / base.c_star
        for c, x in zip(costs, base.shares):
            if x > 0 and abs(prize * (1 - x) / total - c) > 1e-9 * c:
                failures.append(f"trial {trial}: stationarity residual")
        q = equilibrium_investments(prize, base)
        others = math.fsum(q) - q[i]
        before = tullock_payoff(prize, q[i], others, costs[i])
        z = float(rng.uniform(0, 5))
        after = tullock_payoff(prize, q[i] + z * prize / base.c_star, others, costs[i])
        if investment_loss_bound(prize, min(1.0, costs[i] / base.c_star), z) > before - after + 1e-12:
            failures.append(f"trial {trial}: investment bound above exact loss")
        x = base.shares[i]
        w = float(rng.uniform(0, 0.999 * (1 - x)))
        own = (x + w) * others / (1 - x - w)
        loss = before - tullock_payoff(prize, own, others, costs[i])
        if share_increase_loss_bound(prize, w) > loss + 1e-12:
            failures.append(f"trial {trial}: share bound above exact loss")
    check(9, failures, started)


def _discrete_price(curve, book, level):
    bids = discretised_bids(curve, level)
    price = curve.v_max
    for rho in sorted({o.reserve for o in book.offers}):
        supply = supply_profile(book, rho)[0]
        if supply > 0:
            price = min(price, fpa_rule_apply(bids, supply, rho)[1])
    return price


def test_criterion_10_clearing_engine():
    started = time.perf_counter()
    failures = []
    rng = np.random.default_rng(1010)
    levels = range(4, 11)
    for trial in range(200):
        curve = random_curve(rng)
        n = int(rng.integers(1, 6))
        quantities = rng.uniform(0, 1, n) * curve.eval(0.0) / max(n - 1, 1)
        reserves = rng.uniform(0, curve.v_max, n)
        reserves[rng.random(n) < 0.3] = 0.0
        book = SellerBook.from_pairs(list(zip(quantities, reserves)))
        p_min, p_max = clearing_bounds(book, curve)
        if p_min > p_max:
            failures.append(f"book {trial}: p_min > p_max")
        out = canonical_clear(book, curve)
        q_leq = supply_profile(book, out.price)[0]
        if abs(math.fsum(out.sold) - out.total_cleared) > 1e-12:
            failures.append(f"book {trial}: sold mass does not add up")
        if abs(out.total_cleared - min(curve.eval(out.price), q_leq)) > 1e-12:
            failures.append(f"book {trial}: cleared mass off the saturation rule")
        if math.isfinite(p_max):
            lo, hi = cleared_range(book, curve, out.price)
            if not lo - 1e-12 <= out.total_cleared <= hi + 1e-12:
                failures.append(f"book {trial}: cleared mass outside the feasible range")
        for offer, sold in zip(book.offers, out.sold):
            if (offer.reserve < out.price and sold != offer.quantity) or (offer.reserve > out.price and sold != 0):
                failures.append(f"book {trial}: seller saturation broken")
        gaps = [p_min - _discrete_price(curve, book, m) for m in levels]
        for m, gap in zip(levels, gaps):
            if not -1e-12 <= gap <= curve.v_max / 2**m + 1e-12:
                failures.append(f"book {trial} level {m}: gap {gap:.3e}")
        if any(b > a + 1e-12 for a, b in zip(gaps, gaps[1:])):
            failures.append(f"book {trial}: gap grew under refinement {gaps}")
    check(10, failures, started)
