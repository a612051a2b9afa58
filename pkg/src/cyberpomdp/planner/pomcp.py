"""UCT search over action/observation histories (the POMCP-style baseline)."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

from ..belief import sample_state
from ..core import GenerativeModel
from ..errors import EmptyBelief
from ..rng import RandomStream
from .bounds import RolloutPolicy, default_policy_rollout, resolve_rollout_policy
from .despot import PlannerConfig
from .macro import MacroModel


class _History:
    __slots__ = ("visits", "actions")

    def __init__(self, n_actions: int):
        self.visits = 0
        self.actions = [_ActionStats() for _ in range(n_actions)]


class _ActionStats:
    __slots__ = ("visits", "mean", "children")

    def __init__(self):
        self.visits = 0
        self.mean = 0.0
        self.children: dict = {}


@dataclass
class PomcpResult:
    action: int
    simulations: int
    visits: list[int]
    values: list[float]


class Pomcp:
    """Each simulation draws one start state, descends by UCB1, adds one history node,
    finishes with a default-policy rollout and backs the return up as running means.

    Simulation ``i`` draws its start state from ``seed.child(0).child(i)`` and the
    step at depth ``d`` from ``seed.child(1).child(i).child(d)``.
    """

    def __init__(self, model: GenerativeModel, config: PlannerConfig | None = None,
                 rollout_policy: RolloutPolicy | None = None):
        self.config = config or PlannerConfig()
        self.base = model
        self.model = MacroModel(model, self.config.max_depth) if self.config.macro else model
        self.gamma = model.spec.discount
        self.n_actions = model.spec.action_count
        self.c = self.config.exploration(model)
        self.policy = rollout_policy or resolve_rollout_policy(
            model, self.config.default_policy, self.config.default_policy_params)

    def plan(self, belief) -> int:
        return self.search(belief).action

    def search(self, belief) -> PomcpResult:
        cfg = self.config
        cfg.check_budget()
        if belief is None or len(belief) == 0:
            raise EmptyBelief("cannot plan from an empty belief")
        master = RandomStream(cfg.seed)
        starts, streams = master.child(0), master.child(1)
        root = _History(self.n_actions)
        deadline = None if cfg.budget_ms is None else time.perf_counter() + cfg.budget_ms / 1000.0
        limit = cfg.budget_expansions
        sims = live = 0
        while True:
            if sims > 0:
                if limit is not None and sims >= limit:
                    break
                if deadline is not None and time.perf_counter() >= deadline:
                    break
            state = sample_state(belief, starts.child(sims))
            if not self.base.is_terminal(state):
                self._simulate(root, state, streams.child(sims), 0, None)
                live += 1
            sims += 1
            if live == 0 and sims >= 64:
                raise EmptyBelief("belief samples only terminal states")
        visits = [a.visits for a in root.actions]
        best = max(range(self.n_actions), key=lambda a: (visits[a], -a))
        return PomcpResult(best, sims, visits, [a.mean for a in root.actions])

    def _select(self, node: _History) -> int:
        for a, stats in enumerate(node.actions):
            if stats.visits == 0:
                return a
        log_n = math.log(node.visits)
        best, best_score = 0, -math.inf
        for a, stats in enumerate(node.actions):
            score = stats.mean + self.c * math.sqrt(log_n / stats.visits)
            if score > best_score:
                best, best_score = a, score
        return best

    def _simulate(self, node: _History, state, stream: RandomStream, depth: int,
                  last_obs) -> float:
        a = self._select(node)
        if self.config.macro:
            out = self.model.step(state, a, stream.child(depth),
                                  max_elapsed=self.config.max_depth - depth)
        else:
            out = self.model.step(state, a, stream.child(depth))
        stats = node.actions[a]
        depth2 = depth + out.elapsed
        future = 0.0
        if not out.terminal and depth2 < self.config.max_depth:
            key = (out.observation, out.elapsed)
            child = stats.children.get(key)
            if child is None:
                stats.children[key] = _History(self.n_actions)
                future = self._rollout(out.next_state, stream, depth2, out.observation)
            else:
                future = self._simulate(child, out.next_state, stream, depth2, out.observation)
        total = out.reward + self.gamma ** out.elapsed * future
        node.visits += 1
        stats.visits += 1
        stats.mean += (total - stats.mean) / stats.visits
        return total

    def _rollout(self, state, stream: RandomStream, depth: int, last_obs) -> float:
        return default_policy_rollout(state, stream, self.config.max_depth - depth, self.base,
                                      self.policy, start_depth=depth, last_obs=last_obs)


def pomcp_plan(belief, model: GenerativeModel, config: PlannerConfig | None = None) -> int:
    return Pomcp(model, config).plan(belief)
