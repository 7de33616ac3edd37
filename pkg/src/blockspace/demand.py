"""Piecewise-linear demand curves.

A curve maps a price ``p`` to the mass of users whose value is at least ``p``.
It is stored as an ordered list of ``(price, mass)`` breakpoints with linear
interpolation in between and zero mass beyond the last breakpoint. A price may
appear twice to encode a downward jump: the first pair holds the value at the
price (the curve is left-continuous) and the second pair the limit from above.
"""

from __future__ import annotations

import math
from bisect import bisect_left, bisect_right
from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np


class DemandError(ValueError):
    """Raised for invalid curves or out-of-domain queries."""


class InverseInterval(NamedTuple):
    """Closed interval of prices at which the curve crosses a mass level."""

    inf_price: float
    sup_price: float


class Segment(NamedTuple):
    """Linear piece of the curve on ``(lo, hi]``: mass goes from ``m_lo`` to ``m_hi``."""

    lo: float
    hi: float
    m_lo: float
    m_hi: float

    @property
    def slope(self) -> float:
        """Rate at which mass falls as price rises (``-D'``), non-negative."""
        return (self.m_lo - self.m_hi) / (self.hi - self.lo)

    def mass_at(self, p: float) -> float:
        return self.m_lo - self.slope * (p - self.lo)


@dataclass(frozen=True)
class DemandCurve:
    """Left-continuous, non-increasing demand given by linear breakpoints."""

    prices: tuple[float, ...]
    masses: tuple[float, ...]

    def __post_init__(self) -> None:
        prices = tuple(float(p) for p in self.prices)
        masses = tuple(float(m) for m in self.masses)
        object.__setattr__(self, "prices", prices)
        object.__setattr__(self, "masses", masses)
        if len(prices) != len(masses) or not prices:
            raise DemandError("demand needs at least one (price, mass) pair")
        if not all(math.isfinite(v) for v in prices + masses):
            raise DemandError("demand breakpoints must be finite")
        if prices[0] != 0.0:
            raise DemandError("first demand breakpoint must be at price 0")
        for k in range(1, len(prices)):
            if prices[k] < prices[k - 1]:
                raise DemandError(f"demand prices must be non-decreasing (breakpoint {k})")
            if masses[k] > masses[k - 1]:
                raise DemandError(f"demand masses must be non-increasing (breakpoint {k})")
            if k >= 2 and prices[k] == prices[k - 2]:
                raise DemandError(f"price {prices[k]} appears more than twice")
        if min(masses) < 0:
            raise DemandError("demand masses must be non-negative")

    @classmethod
    def from_points(cls, points: Iterable[Sequence[float]]) -> "DemandCurve":
        pts = [tuple(pt) for pt in points]
        if any(len(pt) != 2 for pt in pts):
            raise DemandError("each demand point must be a (price, mass) pair")
        return cls(tuple(p for p, _ in pts), tuple(m for _, m in pts))

    @classmethod
    def linear(cls, intercept: float = 1.0, top: float = 1.0) -> "DemandCurve":
        """Mass ``intercept`` at price 0 falling linearly to 0 at ``top``."""
        return cls((0.0, top), (intercept, 0.0))

    @classmethod
    def shifted_linear(cls, delta: float) -> "DemandCurve":
        """Unit mass of users with values uniform on ``[delta, 1 + delta]``."""
        if delta <= 0:
            raise DemandError("delta must be positive")
        return cls((0.0, delta, 1.0 + delta), (1.0, 1.0, 0.0))

    def points(self) -> list[list[float]]:
        return [[p, m] for p, m in zip(self.prices, self.masses)]

    @property
    def v_max(self) -> float:
        return self.prices[-1]

    @property
    def segments(self) -> tuple[Segment, ...]:
        """Linear pieces of positive length, in price order."""
        return tuple(
            Segment(self.prices[k], self.prices[k + 1], self.masses[k], self.masses[k + 1])
            for k in range(len(self.prices) - 1)
            if self.prices[k + 1] > self.prices[k]
        )

    def breakpoints(self) -> tuple[float, ...]:
        return tuple(sorted(set(self.prices)))

    def __call__(self, p: float) -> float:
        return self.eval(p)

    def eval(self, p: float) -> float:
        """Mass of users with value at least ``p``."""
        if p < 0:
            raise DemandError(f"price must be non-negative, got {p}")
        if p > self.v_max:
            return 0.0
        idx = bisect_left(self.prices, p)
        if self.prices[idx] == p:
            return self.masses[idx]
        return _interp(self.prices, self.masses, idx, p)

    def eval_right(self, p: float) -> float:
        """Mass of users with value strictly above ``p``."""
        if p < 0:
            raise DemandError(f"price must be non-negative, got {p}")
        if p >= self.v_max:
            return 0.0
        idx = bisect_right(self.prices, p)
        if self.prices[idx - 1] == p:
            return self.masses[idx - 1]
        return _interp(self.prices, self.masses, idx, p)

    def eval_array(self, p: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`eval`."""
        p = np.asarray(p, dtype=float)
        prices = np.asarray(self.prices)
        masses = np.asarray(self.masses)
        idx = np.clip(np.searchsorted(prices, p, side="left"), 1, len(prices) - 1)
        lo, hi = prices[idx - 1], prices[idx]
        m_lo, m_hi = masses[idx - 1], masses[idx]
        width = np.where(hi > lo, hi - lo, 1.0)
        out = m_lo + (m_hi - m_lo) * (p - lo) / width
        exact = np.searchsorted(prices, p, side="left")
        hit = exact < len(prices)
        hit[hit] = prices[exact[hit]] == p[hit]
        out = np.where(hit, masses[np.minimum(exact, len(prices) - 1)], out)
        return np.where(p > self.v_max, 0.0, out)

    def lower_inverse(self, y: float) -> float:
        """``inf{x >= 0 : D^>(x) <= y}``; equals ``v_max`` when no smaller price qualifies."""
        if self.masses[0] <= y:
            return 0.0
        for seg in self.segments:
            if seg.m_lo <= y:
                return seg.lo
            if seg.m_hi <= y:
                return _solve(seg, y)
        return self.v_max

    def lower_inverse_array(self, y: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`lower_inverse`."""
        y = np.asarray(y, dtype=float)
        out = np.full(y.shape, self.v_max)
        done = y >= self.masses[0]
        out[done] = 0.0
        for seg in self.segments:
            at_start = ~done & (seg.m_lo <= y)
            out[at_start] = seg.lo
            done |= at_start
            inside = ~done & (seg.m_hi <= y)
            if inside.any():
                x = seg.lo + (seg.m_lo - y[inside]) / seg.slope
                out[inside] = np.clip(x, seg.lo, seg.hi)
                done |= inside
        return out

    def upper_inverse(self, y: float) -> float:
        """``sup{x in [0, v_max] : D(x) >= y}``; requires ``y <= D(0)``."""
        if y > self.masses[0]:
            raise DemandError(f"mass {y} exceeds total demand {self.masses[0]}")
        best = 0.0
        for seg in self.segments:
            if seg.m_hi >= y:
                best = seg.hi
                continue
            if seg.m_lo > y:
                best = _solve(seg, y)
            break
        return best

    def upper_inverse_array(self, y: np.ndarray) -> np.ndarray:
        """Vectorised :meth:`upper_inverse`; masses above ``D(0)`` map to price 0."""
        y = np.asarray(y, dtype=float)
        out = np.zeros(y.shape)
        active = y <= self.masses[0]
        for seg in self.segments:
            full = active & (seg.m_hi >= y)
            out[full] = seg.hi
            part = active & ~full & (seg.m_lo > y)
            if part.any():
                x = seg.lo + (seg.m_lo - y[part]) / seg.slope
                out[part] = np.clip(x, seg.lo, seg.hi)
            active = full
        return out

    def inverse(self, y: float) -> InverseInterval:
        """All prices at which the curve's one-sided limits bracket ``y``."""
        if y < 0 or y > self.masses[0]:
            raise DemandError(f"mass {y} outside [0, {self.masses[0]}]")
        return InverseInterval(self.lower_inverse(y), self.upper_inverse(y))

    def segment_at(self, x: float) -> Segment | None:
        """Segment whose open interior contains ``x``, if any."""
        for seg in self.segments:
            if seg.lo < x < seg.hi:
                return seg
        return None

    def slope_right(self, x: float) -> float | None:
        """``-D'`` on the segment starting at or containing ``x``; ``None`` past the support."""
        for seg in self.segments:
            if seg.lo <= x < seg.hi:
                return seg.slope
        return None

    def virtual_value(self, x: float) -> float:
        """``x - D(x) / d(x)`` where ``d = -D'``, defined inside decreasing segments."""
        seg = self.segment_at(x)
        if seg is None or seg.slope <= 0:
            raise DemandError(f"derivative unavailable at price {x}")
        return x - seg.mass_at(x) / seg.slope


def _interp(prices: Sequence[float], masses: Sequence[float], idx: int, p: float) -> float:
    lo, hi = prices[idx - 1], prices[idx]
    m_lo, m_hi = masses[idx - 1], masses[idx]
    return m_lo + (m_hi - m_lo) * (p - lo) / (hi - lo)


def _solve(seg: Segment, y: float) -> float:
    """Price inside ``seg`` at which the mass equals ``y``."""
    if seg.m_lo == seg.m_hi:
        return seg.lo
    x = seg.lo + (seg.m_lo - y) / seg.slope
    return min(max(x, seg.lo), seg.hi)


def regularity_violation(
    curve: DemandCurve, grid_size: int = 64
) -> tuple[float, float] | None:
    """First pair of prices where the virtual value decreases, or ``None``.

    Flat stretches inside the support count as ``-inf``; a downward jump before
    ``v_max`` counts as the jump price itself (infinite density). The final drop
    to zero at ``v_max`` lies outside the support and is ignored.
    """
    if grid_size < 2:
        raise DemandError("grid_size must be at least 2")
    samples: list[tuple[float, float]] = []
    segs = curve.segments
    for k, seg in enumerate(segs):
        if k > 0 and segs[k - 1].m_hi > seg.m_lo:
            samples.append((seg.lo, seg.lo))
        if seg.m_hi <= 0 and seg.m_lo <= 0:
            break
        slope = seg.slope
        for x in np.linspace(seg.lo, seg.hi, grid_size):
            x = float(x)
            value = x - seg.mass_at(x) / slope if slope > 0 else -math.inf
            samples.append((x, value))
    for (x0, v0), (x1, v1) in zip(samples, samples[1:]):
        if v1 < v0 - 1e-12 * max(1.0, abs(v0)):
            return (x0, x1)
    return None


def check_regular(curve: DemandCurve, grid_size: int = 64) -> bool:
    """Whether the virtual value is non-decreasing over the support."""
    return regularity_violation(curve, grid_size) is None


def best_residual_revenue(
    curve: DemandCurve,
    unit_cost: float,
    lower_bound: float,
    *,
    offset: float = 0.0,
    cap: float = math.inf,
    strict: bool = False,
) -> tuple[float, float]:
    """Maximise ``(x - unit_cost) * min(D(x) + offset, cap)`` over ``x >= lower_bound``.

    With ``strict`` the search is over ``x > lower_bound`` and the returned value
    is a supremum that may only be approached. ``offset`` must be non-positive so
    the objective stays bounded beyond the support. Ties go to the smallest price.
    """
    if offset > 0:
        raise DemandError("offset must be non-positive")
    if lower_bound < 0:
        raise DemandError("lower bound must be non-negative")

    def value(x: float, mass: float) -> float:
        return (x - unit_cost) * min(mass + offset, cap)

    candidates: list[tuple[float, float]] = []
    if strict:
        candidates.append((lower_bound, value(lower_bound, curve.eval_right(lower_bound))))
    else:
        candidates.append((lower_bound, value(lower_bound, curve.eval(lower_bound))))
    for seg in curve.segments:
        if seg.hi <= lower_bound:
            continue
        lo = max(seg.lo, lower_bound)
        points = [seg.hi]
        if seg.lo > lower_bound:
            points.append(seg.lo)
        slope = seg.slope
        if slope > 0:
            intercept = seg.m_lo + slope * seg.lo + offset
            points.append((intercept + slope * unit_cost) / (2 * slope))
            if math.isfinite(cap):
                points.append((intercept - cap) / slope)
        for x in points:
            if lo < x <= seg.hi or (x == lo and not (strict and x == lower_bound)):
                candidates.append((x, value(x, curve.eval(x))))
    beyond = max(curve.v_max, lower_bound)
    if beyond > lower_bound or not strict:
        candidates.append((beyond, value(beyond, 0.0 if beyond > curve.v_max else curve.eval(beyond))))
    if offset == 0 and unit_cost > beyond:
        candidates.append((unit_cost, 0.0))
    best_value = max(v for _, v in candidates)
    slack = 1e-14 * max(1.0, abs(best_value))
    best_price = min(x for x, v in candidates if v >= best_value - slack)
    return best_price, best_value


def monopoly_revenue(
    curve: DemandCurve, unit_cost: float, lower_bound: float = 0.0
) -> tuple[float, float]:
    """Revenue-maximising price at or above ``lower_bound`` and its revenue."""
    if unit_cost < 0:
        raise DemandError("unit cost must be non-negative")
    if lower_bound > curve.v_max:
        raise DemandError("lower bound lies beyond the support")
    return best_residual_revenue(curve, unit_cost, lower_bound)


def capped_monopoly_revenue(curve: DemandCurve, unit_cost: float, quantity_cap: float) -> float:
    """``sup_{x <= cap} x * (upper_inverse(x) - unit_cost)``: best revenue from at most ``cap`` mass."""
    lower = curve.lower_inverse(quantity_cap)
    return best_residual_revenue(curve, unit_cost, lower, cap=quantity_cap)[1]


def cover_function(curve: DemandCurve, append_supply: float, unit_cost: float, z: float) -> float:
    """Revenue at quantity ``z * Q_A`` relative to revenue at ``Q_A`` (both net of unit cost)."""
    if not 0 < z <= 1:
        raise DemandError(f"z must lie in (0, 1], got {z}")
    if z == 1:
        return 1.0
    base = curve.upper_inverse(append_supply) - unit_cost
    if base <= 0:
        raise DemandError("market-clearing price does not exceed the unit cost")
    return (curve.upper_inverse(z * append_supply) - unit_cost) * z / base
