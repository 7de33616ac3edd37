"""Reserve-setting game among sellers with fixed quantities.

Each seller holds a fixed mass of items and a per-unit cost, and chooses only a
reserve. Every pure equilibrium either has all sellers saturated at the
market-clearing price, or a single price-setter selling the residual demand at
its own reserve while everyone else sells out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .demand import DemandCurve, DemandError, best_residual_revenue


class EquilibriumKind(str, Enum):
    SATURATED = "saturated"
    PRICE_SETTER = "price_setter"


@dataclass(frozen=True)
class PriceSettingInstance:
    quantities: tuple[float, ...]
    unit_costs: tuple[float, ...]
    curve: DemandCurve

    def __post_init__(self) -> None:
        object.__setattr__(self, "quantities", tuple(float(q) for q in self.quantities))
        object.__setattr__(self, "unit_costs", tuple(float(c) for c in self.unit_costs))
        if len(self.quantities) != len(self.unit_costs):
            raise ValueError("quantities and unit costs must have the same length")
        if any(q < 0 for q in self.quantities):
            raise ValueError("quantities must be non-negative")
        if self.total <= 0:
            raise ValueError("total quantity must be positive")

    @property
    def total(self) -> float:
        return math.fsum(self.quantities)

    @property
    def clearing_price(self) -> float:
        """Highest price at which demand absorbs the whole supply."""
        if self.total > self.curve.eval(0.0):
            raise DemandError("total quantity exceeds demand at price zero")
        return self.curve.upper_inverse(self.total)


@dataclass(frozen=True)
class PriceEquilibrium:
    kind: EquilibriumKind
    reserves: tuple[float, ...]
    clearing_price: float
    payoffs: tuple[float, ...]
    setter: int | None = None
    notes: tuple[str, ...] = field(default=())


def saturated_threshold(instance: PriceSettingInstance, i: int) -> float:
    """``inf_{x > p0} (x - c_i)(Q - D(x)) / (x - p0)`` with ``p0`` the clearing price.

    Seller ``i`` stays saturated at ``p0`` exactly when its quantity does not
    exceed this value. The infimum is taken segment by segment: on a linear
    piece the ratio's stationary points solve a quadratic, and the limit at
    ``p0`` from above is evaluated with the one-sided slope.
    """
    curve = instance.curve
    total = instance.total
    p0 = instance.clearing_price
    cost = instance.unit_costs[i]

    def ratio(x: float) -> float:
        return (x - cost) * (total - curve.eval(x)) / (x - p0)

    candidates: list[float] = []
    gap = total - curve.eval_right(p0)
    # a gap of a few ulps is rounding in the inverse, not a jump in demand
    if gap > 1e-12 * total:
        if p0 == cost:
            candidates.append(gap)
        else:
            candidates.append(math.inf if p0 > cost else -math.inf)
    else:
        slope = curve.slope_right(p0)
        candidates.append((p0 - cost) * (slope if slope is not None else 0.0))
    for seg in curve.segments:
        if seg.hi <= p0:
            continue
        lo = max(seg.lo, p0)
        if seg.hi > lo:
            candidates.append(ratio(seg.hi))
        if seg.lo > p0:
            # value just right of a breakpoint uses the post-jump mass
            candidates.append((seg.lo - cost) * (total - seg.m_lo) / (seg.lo - p0))
        b = seg.slope
        if b > 0:
            a = seg.m_lo + b * seg.lo
            const = cost * (total - a) - p0 * (total - a - b * cost)
            disc = p0 * p0 - const / b
            if disc >= 0:
                for x in (p0 - math.sqrt(disc), p0 + math.sqrt(disc)):
                    if lo < x < seg.hi:
                        candidates.append(ratio(x))
    # beyond the support the ratio is monotone between these two limits
    if curve.v_max > p0:
        candidates.append((curve.v_max - cost) * total / (curve.v_max - p0))
    candidates.append(total)
    return min(candidates)


def saturated_equilibrium(instance: PriceSettingInstance) -> PriceEquilibrium | None:
    """All sellers at the clearing-price reserve, if no one prefers to price-set."""
    p0 = instance.clearing_price
    n = len(instance.quantities)
    for i, q in enumerate(instance.quantities):
        if q > 0 and q > saturated_threshold(instance, i):
            return None
    payoffs = tuple(q * (p0 - c) for q, c in zip(instance.quantities, instance.unit_costs))
    return PriceEquilibrium(EquilibriumKind.SATURATED, (p0,) * n, p0, payoffs)


def price_setter_optimum(
    instance: PriceSettingInstance, i: int, *, strict: bool = False
) -> tuple[float, float]:
    """Best reserve for seller ``i`` acting alone on residual demand above ``p0``.

    Maximises ``(x - c_i)(D(x) + Q_i - Q)`` over ``x >= p0`` (``x > p0`` with
    ``strict``), returning the smallest maximiser and ``max(0, value)``.
    """
    q_i = instance.quantities[i]
    if q_i <= 0:
        raise ValueError("price-setter needs a positive quantity")
    p0 = instance.clearing_price
    price, value = best_residual_revenue(
        instance.curve,
        instance.unit_costs[i],
        p0,
        offset=q_i - instance.total,
        cap=q_i,
        strict=strict,
    )
    return price, max(0.0, value)


def undercut_value(instance: PriceSettingInstance, j: int, price: float) -> float:
    """``sup_{x > price} (x - c_j)(Q_j - Q + D(x))``: seller ``j``'s best move above ``price``."""
    q_j = instance.quantities[j]
    return best_residual_revenue(
        instance.curve,
        instance.unit_costs[j],
        price,
        offset=q_j - instance.total,
        cap=q_j,
        strict=True,
    )[1]


def price_setter_equilibrium(instance: PriceSettingInstance, i: int) -> PriceEquilibrium | None:
    """Profile with seller ``i`` setting its optimal price and others at reserve 0, if stable."""
    q_i = instance.quantities[i]
    if q_i <= 0:
        return None
    p0 = instance.clearing_price
    price, value = price_setter_optimum(instance, i)
    if price <= p0:
        return None
    c = instance.unit_costs
    if value < q_i * (p0 - c[i]):
        return None
    q = instance.quantities
    for j in range(len(q)):
        if j == i or q[j] <= 0:
            continue
        if q[j] * (price - c[j]) < undercut_value(instance, j, price) - 1e-12:
            return None
    sold_i = min(q_i, instance.curve.eval(price) + q_i - instance.total)
    payoffs = tuple(
        sold_i * (price - c[k]) if k == i else q[k] * (price - c[k]) for k in range(len(q))
    )
    reserves = tuple(price if k == i else 0.0 for k in range(len(q)))
    return PriceEquilibrium(EquilibriumKind.PRICE_SETTER, reserves, price, payoffs, setter=i)


def enumerate_equilibria(instance: PriceSettingInstance) -> list[PriceEquilibrium]:
    """Saturated equilibrium (if any) plus every stable single-price-setter profile."""
    found: list[PriceEquilibrium] = []
    saturated = saturated_equilibrium(instance)
    if saturated is not None:
        found.append(saturated)
    for i in range(len(instance.quantities)):
        eq = price_setter_equilibrium(instance, i)
        if eq is not None:
            found.append(eq)
    return found


def make_instance(
    quantities: Sequence[float], unit_costs: Sequence[float] | float, curve: DemandCurve
) -> PriceSettingInstance:
    """Convenience constructor that broadcasts a scalar cost."""
    if isinstance(unit_costs, (int, float)):
        unit_costs = [float(unit_costs)] * len(quantities)
    return PriceSettingInstance(tuple(quantities), tuple(unit_costs), curve)
