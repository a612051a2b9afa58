"""Default-policy rollouts (lower bounds) and full-information upper bounds."""

from __future__ import annotations

from typing import Callable, Sequence

from ..core import GenerativeModel, Scenario
from ..errors import Unsupported, UnknownPolicy
from ..rng import RandomStream


class RolloutPolicy:
    """History-based default policy: the action may depend on depth and the last observation.

    Policies that ignore the state are what keep rollout values honest lower
    bounds; the true state is never consulted.
    """

    uses_observation = False

    def action(self, depth: int, last_obs: int | None) -> int:
        raise NotImplementedError


class PeriodicPolicy(RolloutPolicy):
    """``on`` every ``period`` steps of absolute depth, ``off`` otherwise."""

    def __init__(self, on: int, off: int, period: int = 1):
        if period < 1:
            raise ValueError("period must be >= 1")
        self.on, self.off, self.period = on, off, period

    def action(self, depth, last_obs):
        return self.on if depth % self.period == 0 else self.off


class ConstantPolicy(RolloutPolicy):
    def __init__(self, action: int):
        self.fixed = action

    def action(self, depth, last_obs):
        return self.fixed


class ObservationPolicy(RolloutPolicy):
    """Maps the previous observation to an action (``first`` is used at the root)."""

    uses_observation = True

    def __init__(self, respond: Callable[[int], int], first: int = 0):
        self.respond = respond
        self.first = first

    def action(self, depth, last_obs):
        return self.first if last_obs is None else self.respond(last_obs)


def resolve_rollout_policy(model: GenerativeModel, name: str | None = None,
                           params: dict | None = None) -> RolloutPolicy:
    factory = getattr(model, "rollout_policy", None)
    if factory is None:
        if name in (None, "nop"):
            return ConstantPolicy(0)
        raise UnknownPolicy(f"{type(model).__name__} has no rollout policy {name!r}")
    return factory(name, **(params or {}))


def default_policy_rollout(state, stream: RandomStream, depth_remaining: int,
                           model: GenerativeModel, policy: RolloutPolicy | None = None,
                           start_depth: int = 0, last_obs: int | None = None) -> float:
    """Discounted return of the default policy; step ``t`` draws from ``stream.child(start_depth + t)``."""
    policy = policy or resolve_rollout_policy(model)
    gamma = model.spec.discount
    total, g, depth = 0.0, 1.0, start_depth
    end = start_depth + depth_remaining
    while depth < end and not model.is_terminal(state):
        a = policy.action(depth, last_obs)
        out = model.step(state, a, stream.child(depth))
        total += g * out.reward
        g *= gamma
        depth += 1
        state, last_obs = out.next_state, out.observation
    return total


def fallback_upper(model: GenerativeModel, horizon: int) -> float:
    """rewardMax summed over the horizon; infinite horizon when ``horizon`` is None."""
    gamma, rmax = model.spec.discount, model.spec.reward_max
    if horizon is None:
        if gamma >= 1.0:
            raise ValueError("infinite-horizon bound needs discount < 1")
        return rmax / (1.0 - gamma)
    if gamma >= 1.0:
        return rmax * horizon
    return rmax * (1.0 - gamma ** horizon) / (1.0 - gamma)


def state_upper(model: GenerativeModel, state, horizon: int) -> float:
    if horizon <= 0 or model.is_terminal(state):
        return 0.0
    try:
        return model.full_information_value(state, horizon)
    except Unsupported:
        return fallback_upper(model, horizon)


def hindsight_upper_bound(scenarios: Sequence[Scenario], model: GenerativeModel,
                          depth: int) -> float:
    """Mean full-information value of the scenarios' start states over ``depth`` steps."""
    if not scenarios:
        raise ValueError("no scenarios")
    return sum(state_upper(model, sc.start_state, depth) for sc in scenarios) / len(scenarios)


class ScenarioBounds:
    """Per-scenario bound evaluation with memoized default-policy rollouts.

    Rollout values are keyed by (scenario stream seed, depth, state[, last
    observation]); because scenario streams are derived from the planner seed,
    the memo stays valid across plan calls that share it.
    """

    MAX_MEMO = 2_000_000

    def __init__(self, model: GenerativeModel, policy: RolloutPolicy, max_depth: int):
        self.model = model
        self.policy = policy
        self.max_depth = max_depth
        self.gamma = model.spec.discount
        self._lower: dict = {}
        self._upper: dict = {}

    def lower(self, scenario: Scenario, depth: int, state, last_obs: int | None) -> float:
        model, policy = self.model, self.policy
        seed = scenario.stream.seed
        use_obs = policy.uses_observation
        memo = self._lower
        chain = []
        value = 0.0
        while True:
            if depth >= self.max_depth or model.is_terminal(state):
                value = 0.0
                break
            key = (seed, depth, state, last_obs if use_obs else None)
            hit = memo.get(key)
            if hit is not None:
                value = hit
                break
            a = policy.action(depth, last_obs)
            out = model.step(state, a, scenario.stream_at(depth))
            chain.append((key, out.reward))
            depth += 1
            state, last_obs = out.next_state, out.observation
        g = self.gamma
        for key, r in reversed(chain):
            value = r + g * value
            memo[key] = value
        if len(memo) > self.MAX_MEMO:
            memo.clear()
        return value

    def upper(self, depth: int, state) -> float:
        key = (depth, state)
        hit = self._upper.get(key)
        if hit is None:
            hit = state_upper(self.model, state, self.max_depth - depth)
            self._upper[key] = hit
        return hit
