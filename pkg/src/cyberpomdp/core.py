"""Generative-model contract shared by the domains, the filters and the planners."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Hashable, Iterable, Sequence

from .errors import InvalidAction, Unenumerable, Unsupported
from .rng import RandomStream

State = Hashable


@dataclass(frozen=True)
class ProblemSpec:
    discount: float
    action_names: tuple[str, ...]
    observation_count: int | None  # None: not enumerable
    reward_max: float
    reward_min: float

    def __post_init__(self):
        if not 0.0 < self.discount <= 1.0:
            raise ValueError(f"discount must lie in (0, 1], got {self.discount}")
        if self.reward_min > self.reward_max:
            raise ValueError("reward_min exceeds reward_max")
        if not self.action_names:
            raise ValueError("a problem needs at least one action")

    @property
    def action_count(self) -> int:
        return len(self.action_names)


@dataclass(frozen=True)
class StepOutcome:
    next_state: Any
    observation: int
    reward: float
    terminal: bool
    elapsed: int = 1  # primitive steps covered; >1 only for macro steps


@dataclass
class Scenario:
    """A determinized future: start state plus the stream that drives it.

    Step ``d`` of the scenario draws from ``stream.child(d)``, so the random
    numbers used at a given depth do not depend on the path taken to get there.
    """

    scenario_id: int
    stream: RandomStream
    start_state: Any
    _depth_streams: dict = field(default_factory=dict, repr=False)

    def stream_at(self, depth: int) -> RandomStream:
        base = self._depth_streams.get(depth)
        if base is None:
            base = self.stream.child(depth)
            self._depth_streams[depth] = base
        return base.copy()


class GenerativeModel:
    """Black-box simulator of a POMDP.

    Subclasses must implement :meth:`step` and :meth:`is_terminal`. Exact
    filtering and the oracle additionally need :meth:`observation_prob`,
    :meth:`transition_distribution` and :meth:`enumerate_states`.
    """

    spec: ProblemSpec

    # --- required ---------------------------------------------------------
    def step(self, state, action: int, stream: RandomStream) -> StepOutcome:
        raise NotImplementedError

    def is_terminal(self, state) -> bool:
        raise NotImplementedError

    def sample_next_state(self, state, action: int, stream: RandomStream) -> tuple[Any, bool]:
        """Successor state of :meth:`step` on the same stream, without the observation."""
        out = self.step(state, action, stream)
        return out.next_state, out.terminal

    # --- optional capabilities --------------------------------------------
    def observation_prob(self, post_state, action: int, obs: int) -> float:
        raise Unsupported(f"{type(self).__name__} cannot evaluate observation likelihoods")

    def transition_distribution(self, state, action: int) -> list[tuple[Any, float, float]]:
        """List of ``(next_state, probability, reward)``; probabilities sum to 1."""
        raise Unsupported(f"{type(self).__name__} has no analytic transition model")

    def enumerate_states(self) -> list:
        raise Unenumerable(f"{type(self).__name__} does not enumerate its states")

    def full_information_value(self, state, horizon: int) -> float:
        """Optimal value when the true state is visible; an upper bound on the POMDP value."""
        raise Unsupported("no full-information value")

    @property
    def supports_observation_prob(self) -> bool:
        return type(self).observation_prob is not GenerativeModel.observation_prob

    @property
    def enumerable(self) -> bool:
        return type(self).transition_distribution is not GenerativeModel.transition_distribution

    def initial_state(self):
        """Start state used when a scenario gives no initial belief."""
        raise Unsupported(f"{type(self).__name__} has no default start state")

    def termination_reason(self, state) -> str:
        """Why a terminal state ended the episode (``terminal`` or ``stepCap``)."""
        return "terminal"

    def planning_key(self, state, lookahead: int):
        """Key under which states plan identically within ``lookahead`` steps."""
        return state

    def initial_belief(self):
        from .belief import ExactBelief

        return ExactBelief.point(self.initial_state())

    def parse_state(self, text: str):
        raise Unsupported(f"{type(self).__name__} cannot parse state labels")

    # --- rendering / serialization ----------------------------------------
    def state_label(self, state) -> str:
        return repr(state)

    def observation_label(self, obs: int) -> str:
        return str(obs)

    def serialize(self, state) -> bytes:
        raise Unsupported("serialization")

    def deserialize(self, data: bytes):
        raise Unsupported("serialization")

    def action_name(self, action: int) -> str:
        return self.spec.action_names[action]

    def action_index(self, name: str) -> int:
        try:
            return self.spec.action_names.index(name)
        except ValueError:
            raise InvalidAction(f"unknown action {name!r}") from None

    def check_action(self, action: int) -> None:
        if not (isinstance(action, int) and 0 <= action < self.spec.action_count):
            raise InvalidAction(f"action {action!r} outside 0..{self.spec.action_count - 1}")

    @property
    def discount(self) -> float:
        return self.spec.discount


def observation_alphabet(model: GenerativeModel) -> Sequence[int]:
    n = model.spec.observation_count
    if n is None:
        raise Unenumerable("observation alphabet is not enumerable")
    return range(n)


def discounted_sum(rewards: Iterable[float], gamma: float) -> float:
    total, g = 0.0, 1.0
    for r in rewards:
        total += g * r
        g *= gamma
    return total
