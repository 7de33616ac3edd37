"""Proportional (Tullock) contest for blockspace shares.

Miners invest at per-unit costs ``c_i`` and win shares proportional to their
investment. In equilibrium there is a critical cost ``c*`` solving
``sum_i max(0, 1 - c_i / c*) = 1`` and miner ``i`` wins share
``max(0, 1 - c_i / c*)``; total investment is the reward divided by ``c*``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from scipy.optimize import bisect

RESIDUAL_TOL = 1e-12


class MonopolyUnsupportedError(ValueError):
    """Raised when fewer than two miners take part in the contest."""


@dataclass(frozen=True)
class ContestShares:
    c_star: float
    shares: tuple[float, ...]


def _excess(costs: Sequence[float], x: float) -> float:
    return math.fsum(max(0.0, 1.0 - c / x) for c in costs) - 1.0


def c_star(costs: Sequence[float]) -> ContestShares:
    """Critical cost and equilibrium shares for resource costs ``costs``.

    Bisection brackets the root on ``[min c, n * max c]``. The active set read
    off the bisection result then gives the root in closed form,
    ``c* = sum_{active} c_i / (|active| - 1)``, which removes the last ulps of
    bisection error.
    """
    costs = [float(c) for c in costs]
    if len(costs) < 2:
        raise MonopolyUnsupportedError("the contest needs at least two miners")
    if min(costs) <= 0:
        raise ValueError("resource costs must be positive")
    lo, hi = min(costs), len(costs) * max(costs)
    root = bisect(lambda x: _excess(costs, x), lo, hi, xtol=1e-15, rtol=1e-15, maxiter=400)
    active = [c for c in costs if c < root * (1 + 1e-9)]
    if len(active) >= 2:
        closed = math.fsum(active) / (len(active) - 1)
        if abs(_excess(costs, closed)) <= abs(_excess(costs, root)):
            root = closed
    if abs(_excess(costs, root)) > RESIDUAL_TOL:
        raise ArithmeticError(f"critical cost residual {_excess(costs, root):.3e} too large")
    shares = tuple(max(0.0, 1.0 - c / root) for c in costs)
    return ContestShares(root, shares)


@dataclass(frozen=True)
class CostProfile:
    """Per-miner costs for the contest with miner-specific write costs."""

    resource_costs: tuple[float, ...]
    write_costs: tuple[float, ...]
    block_reward: float = 0.0
    reference_price: float = 0.0

    def effective_rewards(self) -> tuple[float, ...]:
        """Per-append reward ``r + B - c_i^W`` net of each miner's write cost."""
        return tuple(self.reference_price + self.block_reward - w for w in self.write_costs)


def c_star_asym(profile: CostProfile) -> ContestShares:
    """Critical level when each miner values an append at ``r + B - c_i^W``.

    Dividing resource costs by the per-append reward reduces this to
    :func:`c_star` over the viable miners; miners with no positive reward sit
    out with share 0.
    """
    rewards = profile.effective_rewards()
    viable = [k for k, v in enumerate(rewards) if v > 0]
    if len(viable) < 2:
        raise MonopolyUnsupportedError("fewer than two miners earn a positive reward per append")
    effective = [profile.resource_costs[k] / rewards[k] for k in viable]
    inner = c_star(effective)
    shares = [0.0] * len(rewards)
    for k, s in zip(viable, inner.shares):
        shares[k] = s
    return ContestShares(inner.c_star, tuple(shares))


def equilibrium_investments(total_reward: float, contest: ContestShares) -> tuple[float, ...]:
    """Investment profile ``q_i = x_i * Y / c*`` for a contest with prize ``Y``."""
    total = total_reward / contest.c_star
    return tuple(x * total for x in contest.shares)


def tullock_payoff(total_reward: float, own: float, others: float, unit_cost: float) -> float:
    """Prize share minus investment cost for investing ``own`` against ``others``."""
    pot = own + others
    won = total_reward * own / pot if pot > 0 else 0.0
    return won - unit_cost * own


def investment_loss_bound(total_reward: float, cost_ratio: float, z: float) -> float:
    """Lower bound on the loss from investing an extra ``z * Y / c*`` above equilibrium."""
    if z < 0 or total_reward <= 0:
        raise ValueError("need z >= 0 and a positive reward")
    return z * z / (1 + z) * total_reward * cost_ratio


def share_increase_loss_bound(total_reward: float, w: float) -> float:
    """Lower bound on the loss from pushing one's share up by ``w`` above equilibrium."""
    if not 0 <= w <= 1 or total_reward <= 0:
        raise ValueError("need w in [0, 1] and a positive reward")
    return w * w * total_reward / 2
