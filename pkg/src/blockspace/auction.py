"""Canonical outcome of simultaneous first-price auctions with reserves.

Sellers post a quantity and a reserve; a continuum of users described by a
:class:`~blockspace.demand.DemandCurve` bids. Every bidding equilibrium clears
at a single price. This module computes the interval of feasible clearing
prices and the canonical outcome: the minimal clearing price together with the
largest cleared mass at that price.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from .demand import DemandCurve


class InfeasiblePriceError(ValueError):
    """Raised when a price lies outside the feasible clearing interval."""


@dataclass(frozen=True)
class SellerOffer:
    quantity: float
    reserve: float
    seller_id: int = 0

    def __post_init__(self) -> None:
        if not self.quantity >= 0:
            raise ValueError(f"offer quantity must be non-negative, got {self.quantity}")
        if not self.reserve >= 0:
            raise ValueError(f"offer reserve must be non-negative, got {self.reserve}")


@dataclass(frozen=True)
class SellerBook:
    offers: tuple[SellerOffer, ...]

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "SellerBook":
        """Build a book from ``(quantity, reserve)`` pairs, numbering sellers in order."""
        return cls(tuple(SellerOffer(float(q), float(r), k) for k, (q, r) in enumerate(pairs)))

    @property
    def total(self) -> float:
        return math.fsum(o.quantity for o in self.offers)

    def levels(self) -> list[tuple[float, float]]:
        """Distinct reserves with the cumulative quantity offered at or below each."""
        out: list[tuple[float, float]] = []
        running = 0.0
        for offer in sorted(self.offers, key=lambda o: o.reserve):
            running += offer.quantity
            if out and out[-1][0] == offer.reserve:
                out[-1] = (offer.reserve, running)
            else:
                out.append((offer.reserve, running))
        return out


@dataclass(frozen=True)
class ClearingOutcome:
    price: float
    total_cleared: float
    sold: tuple[float, ...]


def supply_profile(book: SellerBook, b: float) -> tuple[float, float, float]:
    """Quantity offered at reserve ``<= b``, ``< b`` and exactly ``b``."""
    q_leq = math.fsum(o.quantity for o in book.offers if o.reserve <= b)
    q_lt = math.fsum(o.quantity for o in book.offers if o.reserve < b)
    q_eq = math.fsum(o.quantity for o in book.offers if o.reserve == b)
    return q_leq, q_lt, q_eq


def min_clearing_price(book: SellerBook, curve: DemandCurve) -> float:
    """``inf{b : D^>(b) <= Q^<=(b)}``.

    The offered quantity is a step function of price, so on each stretch between
    consecutive reserves the condition first holds at the stretch's reserve or at
    the lower inverse of the demand curve, whichever is larger. The overall
    infimum is the smallest of these per-stretch candidates.
    """
    best = curve.lower_inverse(0.0)
    for reserve, supply in book.levels():
        if supply > 0:
            best = min(best, max(reserve, curve.lower_inverse(supply)))
    return best


def max_clearing_price(book: SellerBook, curve: DemandCurve) -> float:
    """``sup{b : D(b) >= Q^<(b)}``; infinite when no seller has positive quantity."""
    levels = [(r, s) for r, s in book.levels()]
    if not levels or levels[-1][1] <= 0:
        return math.inf
    best = levels[0][0]
    for k, (reserve, supply) in enumerate(levels):
        if supply <= 0:
            best = levels[k + 1][0]
            continue
        if supply > curve.eval(0.0):
            continue
        reach = curve.upper_inverse(supply)
        if reach > reserve:
            nxt = levels[k + 1][0] if k + 1 < len(levels) else math.inf
            best = max(best, min(reach, nxt))
    return best


def clearing_bounds(book: SellerBook, curve: DemandCurve) -> tuple[float, float]:
    return min_clearing_price(book, curve), max_clearing_price(book, curve)


def cleared_range(book: SellerBook, curve: DemandCurve, p: float) -> tuple[float, float]:
    """Feasible cleared mass at clearing price ``p``."""
    p_min, p_max = clearing_bounds(book, curve)
    if not p_min <= p <= p_max:
        raise InfeasiblePriceError(f"price {p} outside [{p_min}, {p_max}]")
    q_leq, q_lt, _ = supply_profile(book, p)
    return max(curve.eval_right(p), q_lt), min(curve.eval(p), q_leq)


def canonical_clear(book: SellerBook, curve: DemandCurve) -> ClearingOutcome:
    """Minimal clearing price with maximal cleared mass.

    Sellers whose reserve is below the price sell out; sellers above it sell
    nothing; the residual is split among sellers at the price pro rata.
    """
    price = min_clearing_price(book, curve)
    q_leq, q_lt, q_eq = supply_profile(book, price)
    cleared = min(curve.eval(price), q_leq)
    residual = max(0.0, cleared - q_lt)
    sold = []
    for offer in book.offers:
        if offer.reserve < price:
            sold.append(offer.quantity)
        elif offer.reserve == price and q_eq > 0:
            sold.append(residual * offer.quantity / q_eq)
        else:
            sold.append(0.0)
    return ClearingOutcome(price, max(cleared, q_lt), tuple(sold))
