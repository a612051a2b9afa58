"""Agents: belief -> action mappings used by the harness and the policy-graph extractor."""

from __future__ import annotations

from ..core import GenerativeModel
from ..errors import InvalidAction, UnknownPolicy
from .despot import Despot, PlannerConfig
from .pomcp import Pomcp

FIXED_POLICIES = ("always-ra", "always-nop", "threshold-surgical")


def belief_memo_key(belief, model: GenerativeModel | None = None, lookahead: int = 0) -> frozenset:
    if model is None:
        return frozenset((s, round(p, 12)) for s, p in belief.items())
    return frozenset((model.planning_key(s, lookahead), round(p, 12)) for s, p in belief.items())


class Agent:
    name = "agent"

    def act(self, belief) -> int:
        raise NotImplementedError

    def __call__(self, belief) -> int:
        return self.act(belief)


class ConstantAgent(Agent):
    def __init__(self, name: str, action: int):
        self.name = name
        self.action = action

    def act(self, belief) -> int:
        return self.action


class ThresholdSurgicalAgent(Agent):
    """Reset each m-node whose posterior compromise probability exceeds ``tau``."""

    name = "threshold-surgical"

    def __init__(self, tau: float = 0.5):
        if not 0.0 <= tau <= 1.0:
            raise ValueError("tau must be a probability")
        self.tau = tau

    def act(self, belief) -> int:
        from ..micronet import NOP, RA, RM1, RM2, compromise_marginals

        p1, p2 = compromise_marginals(belief)
        hot1, hot2 = p1 > self.tau, p2 > self.tau
        if hot1 and hot2:
            return RA
        if hot1:
            return RM1
        if hot2:
            return RM2
        return NOP


class PlannerAgent(Agent):
    """Wraps a planner; results are memoized per belief since planning is deterministic."""

    def __init__(self, name: str, planner):
        self.name = name
        self.planner = planner
        self._memo: dict = {}

    def act(self, belief) -> int:
        key = belief_memo_key(belief, self.planner.base, self.planner.config.max_depth)
        hit = self._memo.get(key)
        if hit is None:
            hit = self.planner.plan(belief)
            self._memo[key] = hit
        return hit


def fixed_policy(name: str, model: GenerativeModel, params: dict | None = None) -> Agent:
    params = params or {}
    if name == "always-nop":
        return ConstantAgent(name, 0)
    if name == "always-ra":
        try:
            return ConstantAgent(name, model.action_index("RA"))
        except InvalidAction:
            raise UnknownPolicy(f"{name} needs an 'RA' action") from None
    if name == "threshold-surgical":
        if tuple(model.spec.action_names) != ("NOP", "Rm1", "Rm2", "RA"):
            raise UnknownPolicy(f"{name} is defined for the micro-network only")
        return ThresholdSurgicalAgent(float(params.get("tau", 0.5)))
    raise UnknownPolicy(f"unknown fixed policy {name!r}")


def make_agent(name: str, model: GenerativeModel, config: PlannerConfig | None = None,
               params: dict | None = None) -> Agent:
    """``despot``, ``pomcp`` or one of the fixed baselines."""
    if name == "despot":
        return PlannerAgent(name, Despot(model, config))
    if name == "pomcp":
        return PlannerAgent(name, Pomcp(model, config))
    return fixed_policy(name, model, params)
