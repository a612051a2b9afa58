"""Determinized sparse partially observable tree search (anytime, branch and bound).

All node values are stored in root-relative weighted units: a belief node
holding ``n`` of the ``K`` scenarios at depth ``d`` contributes
``(n / K) * gamma**d`` times its per-scenario value. Backups are then plain
sums, and the root's values are per-scenario averages.
"""

from __future__ import annotations

import math
import os
import time
from dataclasses import dataclass, field

from ..belief import sample_state
from ..core import GenerativeModel, Scenario
from ..errors import BudgetZero, EmptyBelief
from ..rng import RandomStream
from .bounds import RolloutPolicy, ScenarioBounds, resolve_rollout_policy
from .macro import MacroModel

# Bound-sandwich assertions after every backup; the test suite switches them on.
CHECK_BOUNDS = os.environ.get("CYBERPOMDP_CHECK_BOUNDS", "") not in ("", "0")
_BOUND_TOL = 1e-7


@dataclass(frozen=True)
class PlannerConfig:
    scenarios: int = 500
    max_depth: int = 20
    budget_expansions: int | None = 1000
    budget_ms: float | None = None
    regularization: float = 0.0
    xi: float = 0.95
    target_gap: float = 0.01
    exploration_constant: float | None = None
    seed: int = 0
    macro: bool = False
    default_policy: str | None = None
    default_policy_params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.scenarios < 1:
            raise ValueError("need at least one scenario")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.regularization < 0:
            raise ValueError("regularization weight must be >= 0")
        if not 0.0 < self.xi <= 1.0:
            raise ValueError("xi must lie in (0, 1]")

    def check_budget(self) -> None:
        if self.budget_expansions is None and self.budget_ms is None:
            raise BudgetZero("no budget configured")
        if self.budget_expansions is not None and self.budget_expansions <= 0:
            raise BudgetZero("expansion budget must be positive")
        if self.budget_ms is not None and self.budget_ms <= 0:
            raise BudgetZero("time budget must be positive")

    def exploration(self, model: GenerativeModel) -> float:
        if self.exploration_constant is not None:
            return self.exploration_constant
        return 10.0 * math.sqrt(abs(model.spec.reward_max - model.spec.reward_min))


class _BeliefNode:
    __slots__ = ("parts", "depth", "last_obs", "scale", "lower0", "upper0",
                 "lower", "upper", "nu", "children")

    def __init__(self, parts, depth, last_obs, scale):
        self.parts = parts          # list of (scenario index, state)
        self.depth = depth
        self.last_obs = last_obs
        self.scale = scale          # gamma**depth / K
        self.children = None        # list of _ActionNode once expanded


class _ActionNode:
    __slots__ = ("action", "reward", "children", "lower", "upper", "nu")

    def __init__(self, action, reward, children):
        self.action = action
        self.reward = reward        # weighted immediate reward
        self.children = children


@dataclass
class SearchResult:
    action: int
    root_lower: float
    root_upper: float
    expansions: int
    trials: int
    action_lower: list[float]
    action_upper: list[float]
    lower_trace: list[float] = field(default_factory=list)
    nodes: int = 0
    bound_checks: int = 0


class Despot:
    """Anytime DESPOT planner over a generative model."""

    def __init__(self, model: GenerativeModel, config: PlannerConfig | None = None,
                 rollout_policy: RolloutPolicy | None = None):
        self.config = config or PlannerConfig()
        self.base = model
        self.model = MacroModel(model, self.config.max_depth) if self.config.macro else model
        self.gamma = model.spec.discount
        self.n_actions = model.spec.action_count
        policy = rollout_policy or resolve_rollout_policy(
            model, self.config.default_policy, self.config.default_policy_params)
        self.bounds = ScenarioBounds(model, policy, self.config.max_depth)
        self._bound_checks = 0

    # -- scenario sampling ----------------------------------------------------
    def sample_scenarios(self, belief) -> list[Scenario]:
        master = RandomStream(self.config.seed)
        starts, streams = master.child(0), master.child(1)
        return [
            Scenario(i, streams.child(i), sample_state(belief, starts.child(i)))
            for i in range(self.config.scenarios)
        ]

    # -- public API -------------------------------------------------------------
    def plan(self, belief) -> int:
        return self.search(belief).action

    def search(self, belief, record_trace: bool = False) -> SearchResult:
        cfg = self.config
        cfg.check_budget()
        if belief is None or len(belief) == 0:
            raise EmptyBelief("cannot plan from an empty belief")
        self._scenarios = scenarios = self.sample_scenarios(belief)
        parts = [(sc.scenario_id, sc.start_state) for sc in scenarios]
        if all(self.base.is_terminal(s) for _, s in parts):
            raise EmptyBelief("every sampled scenario starts in a terminal state")
        self._K = len(scenarios)
        self._nodes = 0
        root = self._make_node(parts, 0, None)

        deadline = None if cfg.budget_ms is None else time.perf_counter() + cfg.budget_ms / 1000.0
        limit = cfg.budget_expansions
        expansions = trials = 0
        trace = [root.lower] if record_trace else []
        while True:
            # the first trial always runs so the root has children to choose from
            if root.children is not None:
                if root.upper - root.lower <= cfg.target_gap:
                    break
                if limit is not None and expansions >= limit:
                    break
                if deadline is not None and time.perf_counter() >= deadline:
                    break
            made = self._trial(root, limit - expansions if limit is not None else None)
            trials += 1
            expansions += made
            if record_trace:
                trace.append(root.lower)
            if made == 0:
                break

        lows, ups = [], []
        best, best_val = 0, -math.inf
        for q in root.children:
            lows.append(q.lower)
            ups.append(q.upper)
            if q.nu > best_val + 1e-12:
                best, best_val = q.action, q.nu
        return SearchResult(best, root.lower, root.upper, expansions, trials, lows, ups,
                            trace, self._nodes, self._bound_checks)

    # -- tree machinery -----------------------------------------------------------
    def _make_node(self, parts, depth, last_obs) -> _BeliefNode:
        scale = self.gamma ** depth / self._K
        node = _BeliefNode(parts, depth, last_obs, scale)
        lo = up = 0.0
        if depth < self.config.max_depth:
            bounds = self.bounds
            terminal = self.base.is_terminal
            scenarios = self._scenarios
            for i, s in parts:
                if terminal(s):
                    continue
                lo += bounds.lower(scenarios[i], depth, s, last_obs)
                up += bounds.upper(depth, s)
        node.lower0 = node.lower = node.nu = lo * scale
        node.upper0 = node.upper = max(up * scale, node.lower)
        self._nodes += 1
        return node

    def _expand(self, node: _BeliefNode) -> None:
        model, terminal = self.model, self.base.is_terminal
        macro = self.config.macro
        remaining = self.config.max_depth - node.depth
        scenarios = self._scenarios
        live = [(i, s) for i, s in node.parts if not terminal(s)]
        children = []
        for a in range(self.n_actions):
            total = 0.0
            groups: dict = {}
            for i, s in live:
                stream = scenarios[i].stream_at(node.depth)
                if macro:
                    out = model.step(s, a, stream, max_elapsed=remaining)
                else:
                    out = model.step(s, a, stream)
                total += out.reward
                key = (out.observation, out.elapsed)
                bucket = groups.get(key)
                if bucket is None:
                    groups[key] = [(i, out.next_state)]
                else:
                    bucket.append((i, out.next_state))
            kids = [self._make_node(groups[key], node.depth + key[1], key[0])
                    for key in sorted(groups)]
            q = _ActionNode(a, total * node.scale, kids)
            self._backup_action(q)
            children.append(q)
        node.children = children
        self._backup_node(node)

    def _backup_action(self, q: _ActionNode) -> None:
        lo = up = nu = q.reward
        for c in q.children:
            lo += c.lower
            up += c.upper
            nu += c.nu
        q.lower, q.upper = lo, up
        q.nu = nu - self.config.regularization

    def _backup_node(self, node: _BeliefNode) -> None:
        lo, up, nu = node.lower0, -math.inf, node.lower0
        for q in node.children:
            if q.lower > lo:
                lo = q.lower
            if q.upper > up:
                up = q.upper
            if q.nu > nu:
                nu = q.nu
        node.lower, node.nu = lo, nu
        # the lower bound is achieved by a policy on these scenarios, so the
        # empirical optimum cannot sit below it
        node.upper = max(up, lo)
        if CHECK_BOUNDS:
            self._check(node)

    def _check(self, node: _BeliefNode) -> None:
        self._bound_checks += 1
        assert node.lower <= node.upper + _BOUND_TOL, (node.lower, node.upper)
        for q in node.children or ():
            assert q.lower <= q.upper + _BOUND_TOL, (q.action, q.lower, q.upper)

    def _weighted_excess(self, node: _BeliefNode, root_gap: float) -> float:
        """Root-weighted gap minus the share of the root gap the node may keep.

        Positive exactly when the node's own per-scenario gap exceeds
        ``xi * (n / K) * root_gap``.
        """
        share = len(node.parts) / self._K
        weight = share * self.gamma ** node.depth
        return (node.upper - node.lower) - weight * self.config.xi * share * root_gap

    def _trial(self, root: _BeliefNode, remaining: int | None) -> int:
        path = [root]
        node = root
        made = 0
        max_depth = self.config.max_depth
        root_gap = root.upper - root.lower
        while node.depth < max_depth:
            if node.children is None:
                if remaining is not None and made >= remaining:
                    break
                if all(self.base.is_terminal(s) for _, s in node.parts):
                    break
                self._expand(node)
                made += 1
            best_q = node.children[0]
            for q in node.children[1:]:
                if q.upper > best_q.upper + 1e-12:
                    best_q = q
            # observation child with the largest weighted excess uncertainty
            nxt, nxt_score = None, 0.0
            for c in best_q.children:
                score = self._weighted_excess(c, root_gap)
                if score > nxt_score:
                    nxt, nxt_score = c, score
            if nxt is None:
                break
            path.append(nxt)
            node = nxt
        for n in reversed(path):
            if n.children is not None:
                for q in n.children:
                    self._backup_action(q)
                self._backup_node(n)
        return made


def plan(belief, model: GenerativeModel, config: PlannerConfig | None = None) -> int:
    return Despot(model, config).plan(belief)
