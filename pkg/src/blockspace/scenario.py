"""Scenario files: YAML description of a ledger market plus solver settings.

Schema::

    demand:            # either explicit points or a named family
      points: [[0, 1], [1, 0]]
      # family: linear | tightness
      # delta: 0.25    (tightness only)
    protocol:
      append_supply: 0.75
      block_reward: 0
    market:
      write_cost: 0    # default for miners without their own write_cost
    miners:            # a list, or the shorthand {count: 3, resource_cost: 1}
      - {resource_cost: 1}
      - {resource_cost: 1, write_cost: 0.1}
    solver:
      q_points: 512
      r_points: 512
      q_max_multiplier: 4
      tolerance: 1.0e-7
      damping: 0.5

With the tightness family, ``count: auto`` picks ``1/delta`` miners so that
every equilibrium share equals ``delta``.
"""

from __future__ import annotations

import copy
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .demand import DemandCurve, DemandError
from .market import LedgerMarket, MarketError, StrategyProfile
from .oracle import GridConfig


class ScenarioError(ValueError):
    """Invalid scenario content; the message starts with the offending field path."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


_TOP_KEYS = {"demand", "protocol", "market", "miners", "solver", "sweep"}
_SOLVER_KEYS = {"q_points", "r_points", "q_max_multiplier", "tolerance", "damping", "refine_rounds"}


def _number(value: Any, field: str, *, minimum: float | None = None, positive: bool = False) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(field, f"expected a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ScenarioError(field, "must be finite")
    if positive and value <= 0:
        raise ScenarioError(field, "must be positive")
    if minimum is not None and value < minimum:
        raise ScenarioError(field, f"must be at least {minimum}")
    return value


def _mapping(value: Any, field: str) -> dict:
    if not isinstance(value, dict):
        raise ScenarioError(field, "expected a mapping")
    return value


@dataclass(frozen=True)
class Scenario:
    """Validated scenario; ``data`` keeps the normalised document for round trips."""

    data: dict
    market: LedgerMarket
    grid: GridConfig
    damping: float

    @classmethod
    def from_dict(cls, raw: Any) -> "Scenario":
        data = copy.deepcopy(_mapping(raw, "<root>"))
        unknown = set(data) - _TOP_KEYS
        if unknown:
            raise ScenarioError(sorted(unknown)[0], "unknown section")
        for key in ("demand", "protocol", "miners"):
            if key not in data:
                raise ScenarioError(key, "missing section")
        curve, demand_doc = _parse_demand(data["demand"])
        protocol = _mapping(data["protocol"], "protocol")
        if "append_supply" not in protocol:
            raise ScenarioError("protocol.append_supply", "missing")
        append_supply = _number(protocol["append_supply"], "protocol.append_supply", positive=True)
        block_reward = _number(protocol.get("block_reward", 0.0), "protocol.block_reward", minimum=0.0)
        market_doc = _mapping(data.get("market", {}), "market")
        default_write = _number(market_doc.get("write_cost", 0.0), "market.write_cost", minimum=0.0)
        resource, writes, miners_doc = _parse_miners(data["miners"], default_write, demand_doc)
        solver = _mapping(data.get("solver", {}), "solver")
        unknown = set(solver) - _SOLVER_KEYS
        if unknown:
            raise ScenarioError(f"solver.{sorted(unknown)[0]}", "unknown setting")
        try:
            grid = GridConfig(
                q_points=int(_number(solver.get("q_points", 512), "solver.q_points", minimum=2)),
                r_points=int(_number(solver.get("r_points", 512), "solver.r_points", minimum=2)),
                q_max_multiplier=_number(
                    solver.get("q_max_multiplier", 4.0), "solver.q_max_multiplier", positive=True
                ),
                tolerance=_number(solver.get("tolerance", 1e-7), "solver.tolerance", positive=True),
                refine_rounds=int(_number(solver.get("refine_rounds", 2), "solver.refine_rounds", minimum=0)),
            )
        except ValueError as exc:
            if isinstance(exc, ScenarioError):
                raise
            raise ScenarioError("solver", str(exc)) from exc
        damping = _number(solver.get("damping", 0.5), "solver.damping", minimum=0.0)
        if damping >= 1:
            raise ScenarioError("solver.damping", "must be below 1")
        try:
            market = LedgerMarket(curve, append_supply, resource, writes, block_reward)
        except MarketError as exc:
            raise ScenarioError("protocol" if "supply" in str(exc) or "reward" in str(exc) else "miners",
                                str(exc)) from exc
        normalised = {
            "demand": demand_doc,
            "protocol": {"append_supply": append_supply, "block_reward": block_reward},
            "market": {"write_cost": default_write},
            "miners": miners_doc,
        }
        if solver:
            normalised["solver"] = dict(solver)
        if "sweep" in data:
            normalised["sweep"] = _parse_sweep(data["sweep"])
        return cls(normalised, market, grid, damping)

    def to_dict(self) -> dict:
        return copy.deepcopy(self.data)

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=None)

    def with_value(self, path: str, value: Any) -> "Scenario":
        """Copy of the scenario with the dotted ``path`` set to ``value``."""
        data = self.to_dict()
        data.pop("sweep", None)
        set_path(data, path, value)
        return Scenario.from_dict(data)

    def with_grid(self, grid: GridConfig) -> "Scenario":
        return Scenario(self.data, self.market, grid, self.damping)


def set_path(data: dict, path: str, value: Any) -> None:
    keys = path.split(".")
    node: Any = data
    for depth, key in enumerate(keys[:-1]):
        if not isinstance(node, dict) or key not in node:
            raise ScenarioError(".".join(keys[: depth + 1]), "path does not exist")
        node = node[key]
    if not isinstance(node, dict):
        raise ScenarioError(path, "parent is not a mapping")
    if keys[-1] not in node and not (keys[0] == "protocol" and keys[-1] == "block_reward"):
        raise ScenarioError(path, "path does not exist")
    node[keys[-1]] = value


def _parse_demand(raw: Any) -> tuple[DemandCurve, dict]:
    doc = _mapping(raw, "demand")
    if "points" in doc and "family" in doc:
        raise ScenarioError("demand", "give either points or family, not both")
    if "points" in doc:
        points = doc["points"]
        if not isinstance(points, list) or len(points) < 1:
            raise ScenarioError("demand.points", "expected a list of [price, mass] pairs")
        parsed = []
        for k, pt in enumerate(points):
            if not isinstance(pt, (list, tuple)) or len(pt) != 2:
                raise ScenarioError(f"demand.points[{k}]", "expected a [price, mass] pair")
            parsed.append(
                [_number(pt[0], f"demand.points[{k}][0]", minimum=0.0),
                 _number(pt[1], f"demand.points[{k}][1]", minimum=0.0)]
            )
        for k in range(1, len(parsed)):
            if parsed[k][0] < parsed[k - 1][0]:
                raise ScenarioError(f"demand.points[{k}]", "prices must be non-decreasing")
            if parsed[k][1] > parsed[k - 1][1]:
                raise ScenarioError(f"demand.points[{k}]", "masses must be non-increasing")
        try:
            curve = DemandCurve.from_points(parsed)
        except DemandError as exc:
            raise ScenarioError("demand.points", str(exc)) from exc
        return curve, {"points": parsed}
    family = doc.get("family")
    if family == "linear":
        intercept = _number(doc.get("intercept", 1.0), "demand.intercept", positive=True)
        top = _number(doc.get("top", 1.0), "demand.top", positive=True)
        return DemandCurve.linear(intercept, top), {"family": "linear", "intercept": intercept, "top": top}
    if family == "tightness":
        if "delta" not in doc:
            raise ScenarioError("demand.delta", "missing")
        delta = _number(doc["delta"], "demand.delta", positive=True)
        return DemandCurve.shifted_linear(delta), {"family": "tightness", "delta": delta}
    raise ScenarioError("demand", "expected points or family: linear | tightness")


def _parse_miners(raw: Any, default_write: float, demand_doc: dict):
    if isinstance(raw, dict):
        count = raw.get("count")
        if count == "auto":
            if demand_doc.get("family") != "tightness":
                raise ScenarioError("miners.count", "auto needs the tightness demand family")
            n_float = 1.0 / demand_doc["delta"]
            n = round(n_float)
            if abs(n - n_float) > 1e-9:
                raise ScenarioError("miners.count", "auto needs 1/delta to be a whole number")
        else:
            n = int(_number(count, "miners.count", minimum=2))
            if n != count:
                raise ScenarioError("miners.count", "must be a whole number")
        cost = _number(raw.get("resource_cost", 1.0), "miners.resource_cost", positive=True)
        write = _number(raw.get("write_cost", default_write), "miners.write_cost", minimum=0.0)
        doc = {"count": count, "resource_cost": cost}
        if "write_cost" in raw:
            doc["write_cost"] = write
        return (cost,) * n, (write,) * n, doc
    if not isinstance(raw, list):
        raise ScenarioError("miners", "expected a list or {count, resource_cost}")
    if len(raw) < 2:
        raise ScenarioError("miners", "need at least two miners")
    resource, writes, doc = [], [], []
    for k, entry in enumerate(raw):
        entry = _mapping(entry, f"miners[{k}]")
        if "resource_cost" not in entry:
            raise ScenarioError(f"miners[{k}].resource_cost", "missing")
        cost = _number(entry["resource_cost"], f"miners[{k}].resource_cost", positive=True)
        write = _number(entry.get("write_cost", default_write), f"miners[{k}].write_cost", minimum=0.0)
        resource.append(cost)
        writes.append(write)
        item = {"resource_cost": cost}
        if "write_cost" in entry:
            item["write_cost"] = write
        doc.append(item)
    return tuple(resource), tuple(writes), doc


def _parse_sweep(raw: Any) -> dict:
    doc = _mapping(raw, "sweep")
    if "parameter" not in doc or not isinstance(doc["parameter"], str):
        raise ScenarioError("sweep.parameter", "expected a dotted path")
    values = doc.get("values")
    if not isinstance(values, list) or not values:
        raise ScenarioError("sweep.values", "expected a non-empty list")
    out = {"parameter": doc["parameter"], "values": values}
    if "output" in doc:
        out["output"] = str(doc["output"])
    return out


def load_scenario(path: str | Path) -> Scenario:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ScenarioError(str(path), f"cannot read file ({exc.strerror})") from exc
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ScenarioError(str(path), f"invalid YAML ({exc})") from exc
    return Scenario.from_dict(raw)


def load_profile(path: str | Path, n: int) -> StrategyProfile:
    """Profile file with ``investments`` and ``reserves`` lists, one entry per miner."""
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ScenarioError(str(path), f"cannot read profile ({exc})") from exc
    doc = _mapping(raw, "profile")
    values = {}
    for key in ("investments", "reserves"):
        seq = doc.get(key)
        if not isinstance(seq, list) or len(seq) != n:
            raise ScenarioError(f"profile.{key}", f"expected a list of {n} numbers")
        values[key] = tuple(_number(v, f"profile.{key}[{k}]", minimum=0.0) for k, v in enumerate(seq))
    return StrategyProfile(values["investments"], values["reserves"])
