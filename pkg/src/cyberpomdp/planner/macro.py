"""Discrete-event macro-actions: collapse attacker-idle stretches into one lookahead step."""

from __future__ import annotations

import math

from ..core import GenerativeModel, StepOutcome
from ..errors import Unsupported
from ..rng import RandomStream

_DWELL_CHILD = 1 << 20
_HOOKS = ("dwell_probability", "step_attacker_active", "idle_step_reward", "sample_observation")


def geometric_sum(gamma: float, k: int) -> float:
    """1 + gamma + ... + gamma**(k-1)."""
    if gamma == 1.0:
        return float(k)
    return (1.0 - gamma ** k) / (1.0 - gamma)


class MacroModel(GenerativeModel):
    """Wraps a model exposing dwell introspection.

    When the defender NOPs and the attacker would idle with per-step
    probability q, the wrapper draws the dwell k ~ Geometric(1 - q) from the
    step's stream, credits k - 1 idle steps analytically and applies the first
    non-idle attacker move as step k. Dwell longer than ``max_elapsed`` is
    truncated into a pure idle chain of that length.
    """

    def __init__(self, model: GenerativeModel, max_dwell: int = 10_000):
        missing = [h for h in _HOOKS if not hasattr(model, h)]
        if missing:
            raise Unsupported(f"{type(model).__name__} lacks dwell introspection: {missing}")
        self.inner = model
        self.spec = model.spec
        self.max_dwell = max_dwell

    def __getattr__(self, name):
        return getattr(self.inner, name)

    def is_terminal(self, state) -> bool:
        return self.inner.is_terminal(state)

    def sample_dwell(self, q: float, stream: RandomStream) -> float:
        return stream.child(_DWELL_CHILD).next_geometric(1.0 - q)

    def step(self, state, action: int, stream: RandomStream,
             max_elapsed: int | None = None) -> StepOutcome:
        inner = self.inner
        q = inner.dwell_probability(state, action)
        if q is None:
            return inner.step(state, action, stream)
        cap = self.max_dwell if max_elapsed is None else max(1, min(max_elapsed, self.max_dwell))
        k = self.sample_dwell(q, stream)
        gamma = self.spec.discount
        idle = inner.idle_step_reward(state)
        if k > cap:
            obs = inner.sample_observation(state, stream)
            return StepOutcome(state, obs, idle * geometric_sum(gamma, cap), False, cap)
        k = int(k)
        out = inner.step_attacker_active(state, action, stream)
        reward = idle * geometric_sum(gamma, k - 1) + gamma ** (k - 1) * out.reward
        return StepOutcome(out.next_state, out.observation, reward, out.terminal, k)

    # exact machinery stays primitive
    def observation_prob(self, post_state, action, obs):
        return self.inner.observation_prob(post_state, action, obs)

    def transition_distribution(self, state, action):
        return self.inner.transition_distribution(state, action)

    def full_information_value(self, state, horizon):
        return self.inner.full_information_value(state, horizon)

    @property
    def enumerable(self) -> bool:
        return self.inner.enumerable

    @property
    def supports_observation_prob(self) -> bool:
        return self.inner.supports_observation_prob


def macro_wrap(model: GenerativeModel, max_dwell: int = 10_000) -> MacroModel:
    return MacroModel(model, max_dwell)


def mean_dwell(q: float) -> float:
    return math.inf if q >= 1.0 else 1.0 / (1.0 - q)
