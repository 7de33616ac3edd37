"""Shared generators and the acceptance summary hook."""

from __future__ import annotations

import numpy as np
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from blockspace.demand import DemandCurve
from blockspace.market import LedgerMarket

settings.register_profile(
    "default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def record(criterion: int, passed: bool, detail: str) -> None:
    line = f"criterion {criterion:2d}: {'PASS' if passed else 'FAIL'}  {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)


def random_curve(rng: np.random.Generator, *, jumps: bool = True, top_mass: float | None = None) -> DemandCurve:
    """Strictly decreasing piecewise-linear demand, optionally with downward jumps."""
    pieces = int(rng.integers(1, 5))
    v_max = float(rng.uniform(0.5, 2.0))
    prices = np.sort(rng.uniform(0.05, 0.95, pieces - 1)) * v_max
    mass = float(top_mass if top_mass is not None else rng.uniform(0.5, 2.0))
    points = [(0.0, mass)]
    for p in prices:
        mass *= float(rng.uniform(0.35, 0.95))
        points.append((float(p), mass))
        if jumps and rng.random() < 0.3:
            mass *= float(rng.uniform(0.4, 0.9))
            points.append((float(p), mass))
    points.append((v_max, 0.0))
    return DemandCurve.from_points(points)


def random_symmetric_market(rng: np.random.Generator, *, jumps: bool = False) -> LedgerMarket:
    """Symmetric-write-cost market with zero block reward and a positive clearing margin."""
    curve = random_curve(rng, jumps=jumps)
    n = int(rng.integers(2, 6))
    supply = float(rng.uniform(0.05, 0.95)) * curve.eval(0.0)
    costs = rng.uniform(0.5, 2.0, n)
    p0 = curve.upper_inverse(supply)
    write = float(rng.uniform(0.0, 0.5)) * p0
    return LedgerMarket.build(curve, supply, costs, write)


@st.composite
def curves(draw, jumps: bool = True) -> DemandCurve:
    """Hypothesis strategy for strictly decreasing piecewise-linear curves."""
    v_max = draw(st.floats(0.5, 3.0))
    cuts = sorted(draw(st.lists(st.floats(0.05, 0.95), min_size=0, max_size=4, unique=True)))
    mass = draw(st.floats(0.3, 3.0))
    points = [(0.0, mass)]
    for c in cuts:
        mass *= draw(st.floats(0.3, 0.95))
        points.append((c * v_max, mass))
        if jumps and draw(st.booleans()):
            mass *= draw(st.floats(0.3, 0.9))
            points.append((c * v_max, mass))
    points.append((v_max, 0.0))
    return DemandCurve.from_points(points)


def discretised_bids(curve: DemandCurve, level: int) -> list[tuple[float, float]]:
    """Finite bidder population on the grid ``v_max * k / 2**level``: mass ``D(v_k) - D(v_{k+1})`` bids ``v_k``."""
    grid = curve.v_max * np.arange(2**level + 1) / 2**level
    masses = [curve.eval(float(v)) for v in grid] + [0.0]
    bids = []
    for k, v in enumerate(grid):
        m = masses[k] - masses[k + 1]
        if m > 0:
            bids.append((m, float(v)))
    return bids
