"""Belief tracking: exact Bayes filtering and particle filtering."""

from __future__ import annotations

import logging
from typing import Any, Iterable, Mapping

from .core import GenerativeModel
from .errors import BeliefDepleted, EmptyBelief, ZeroEvidence
from .rng import RandomStream

log = logging.getLogger(__name__)

NORMALIZATION_TOL = 1e-9
DEPLETION_THRESHOLD = 1e-6
OVERSAMPLE_FACTOR = 4
OVERSAMPLE_ROUNDS = 3


class ExactBelief:
    """Probability per enumerated state, stored sparsely (zero entries dropped)."""

    __slots__ = ("_probs",)

    def __init__(self, probs: Mapping[Any, float] | Iterable[tuple[Any, float]]):
        items = probs.items() if isinstance(probs, Mapping) else probs
        table: dict = {}
        for s, p in items:
            if p < 0:
                raise ValueError(f"negative probability {p} for state {s!r}")
            if p > 0:
                table[s] = table.get(s, 0.0) + p
        if not table:
            raise EmptyBelief("belief has no support")
        total = sum(table.values())
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ValueError(f"belief sums to {total}, not 1")
        self._probs = table

    @classmethod
    def point(cls, state) -> ExactBelief:
        return cls({state: 1.0})

    @classmethod
    def uniform(cls, states: Iterable) -> ExactBelief:
        states = list(states)
        return cls({s: 1.0 / len(states) for s in states})

    @classmethod
    def normalized(cls, weights: Mapping[Any, float]) -> ExactBelief:
        total = sum(weights.values())
        if total <= 0:
            raise EmptyBelief("cannot normalize zero mass")
        return cls({s: w / total for s, w in weights.items() if w > 0})

    def items(self):
        return self._probs.items()

    def prob(self, state) -> float:
        return self._probs.get(state, 0.0)

    def support(self) -> list:
        return list(self._probs)

    def __len__(self) -> int:
        return len(self._probs)

    def most_likely(self) -> tuple[Any, float]:
        best, best_p = None, -1.0
        for s, p in self._probs.items():
            if p > best_p:
                best, best_p = s, p
        return best, best_p

    def key(self) -> tuple:
        return tuple(self._probs.items())

    def as_dict(self) -> dict:
        return dict(self._probs)

    def __repr__(self) -> str:
        return f"ExactBelief({self._probs!r})"


class ParticleBelief:
    """Multiset of sampled states with optional normalized weights."""

    __slots__ = ("particles", "weights")

    def __init__(self, particles: list, weights: list[float] | None = None):
        if not particles:
            raise EmptyBelief("particle belief needs at least one particle")
        if weights is not None:
            if len(weights) != len(particles):
                raise ValueError("weights and particles differ in length")
            if any(w < 0 for w in weights):
                raise ValueError("negative particle weight")
            if abs(sum(weights) - 1.0) > NORMALIZATION_TOL:
                raise ValueError("particle weights must sum to 1")
        self.particles = list(particles)
        self.weights = None if weights is None else list(weights)

    @classmethod
    def from_belief(cls, belief, n: int, stream: RandomStream) -> ParticleBelief:
        states, probs = zip(*belief.items())
        return cls(systematic_resample(list(states), list(probs), n, stream.next_unit()))

    def __len__(self) -> int:
        return len(self.particles)

    def items(self):
        table: dict = {}
        if self.weights is None:
            w = 1.0 / len(self.particles)
            for s in self.particles:
                table[s] = table.get(s, 0.0) + w
        else:
            for s, w in zip(self.particles, self.weights):
                table[s] = table.get(s, 0.0) + w
        return table.items()

    def prob(self, state) -> float:
        return dict(self.items()).get(state, 0.0)

    def most_likely(self) -> tuple[Any, float]:
        return max(self.items(), key=lambda kv: kv[1])

    def to_exact(self) -> ExactBelief:
        return ExactBelief.normalized(dict(self.items()))

    def key(self) -> tuple:
        return tuple(self.items())


def systematic_resample(states: list, weights: list[float], n: int, u: float) -> list:
    """Systematic resampling with a single uniform offset ``u`` in [0, 1)."""
    total = sum(weights)
    if total <= 0:
        raise BeliefDepleted("all weights are zero")
    out = []
    step = total / n
    pos = u * step
    cum = weights[0]
    i = 0
    last = len(states) - 1
    for _ in range(n):
        while pos > cum and i < last:
            i += 1
            cum += weights[i]
        out.append(states[i])
        pos += step
    return out


def sample_state(belief, stream: RandomStream):
    """Draw one state by weight; deterministic given the stream."""
    if isinstance(belief, ParticleBelief) and belief.weights is None:
        return belief.particles[stream.next_below(len(belief.particles))]
    u = stream.next_unit()
    acc = 0.0
    last = None
    for s, p in belief.items():
        acc += p
        last = s
        if u < acc:
            return s
    if last is None:
        raise EmptyBelief("cannot sample from an empty belief")
    return last


# ---------------------------------------------------------------------------
# Updates


def predict(belief, action: int, model: GenerativeModel) -> dict:
    """Unnormalized predictive distribution over next states (terminal states absorb)."""
    pred: dict = {}
    for s, p in belief.items():
        if model.is_terminal(s):
            pred[s] = pred.get(s, 0.0) + p
            continue
        for s2, q, _ in model.transition_distribution(s, action):
            pred[s2] = pred.get(s2, 0.0) + p * q
    return pred


def exact_update(belief, action: int, obs: int, model: GenerativeModel,
                 nonterminal: bool = False) -> ExactBelief:
    """b'(s') ∝ O(s', a, z) Σ_s T(s, a, s') b(s).

    With ``nonterminal`` the posterior is also conditioned on the episode not
    having ended, which is what an agent that is still acting knows.
    """
    post: dict = {}
    for s2, p in predict(belief, action, model).items():
        if nonterminal and model.is_terminal(s2):
            continue
        w = p * model.observation_prob(s2, action, obs)
        if w > 0.0:
            post[s2] = w
    total = sum(post.values())
    if total <= 0.0:
        raise ZeroEvidence(f"observation {obs} has zero predictive probability")
    return ExactBelief({s: w / total for s, w in post.items()})


def _propagate(states: list, weights: list[float], action: int, obs: int,
               model: GenerativeModel, stream: RandomStream, weighted: bool,
               nonterminal: bool) -> tuple[list, list[float]]:
    out_s, out_w = [], []
    for s, w, sub in zip(states, weights, stream.children(len(states))):
        if model.is_terminal(s):
            if nonterminal or not weighted:
                continue
            s2, lik = s, model.observation_prob(s, action, obs)
        elif weighted:
            s2, terminal = model.sample_next_state(s, action, sub)
            if nonterminal and terminal:
                continue
            lik = model.observation_prob(s2, action, obs)
        else:
            outcome = model.step(s, action, sub)
            s2 = outcome.next_state
            if nonterminal and outcome.terminal:
                continue
            lik = 1.0 if outcome.observation == obs else 0.0
        if lik > 0.0:
            out_s.append(s2)
            out_w.append(w * lik)
    return out_s, out_w


def particle_update(belief: ParticleBelief, action: int, obs: int, model: GenerativeModel,
                    stream: RandomStream, n: int | None = None, *,
                    weighted: bool | None = None, nonterminal: bool = False) -> ParticleBelief:
    """Propagate, weight (or reject), and systematically resample to ``n`` particles.

    ``weighted`` defaults to using observation likelihoods whenever the model
    supports them; ``False`` forces rejection against sampled observations.
    """
    if len(belief) == 0:
        raise EmptyBelief("empty particle belief")
    n = n or len(belief)
    if weighted is None:
        weighted = model.supports_observation_prob
    prior_states = belief.particles
    prior_w = belief.weights or [1.0 / len(prior_states)] * len(prior_states)

    states, weights = _propagate(prior_states, prior_w, action, obs, model,
                                 stream.child(0), weighted, nonterminal)
    for rnd in range(1, OVERSAMPLE_ROUNDS + 1):
        if sum(weights) >= DEPLETION_THRESHOLD:
            break
        m = len(prior_states) * OVERSAMPLE_FACTOR ** rnd
        round_stream = stream.child(rnd)
        drawn = systematic_resample(prior_states, prior_w, m, round_stream.next_unit())
        log.debug("particle depletion: oversampling round %d with %d particles", rnd, m)
        states, weights = _propagate(drawn, [1.0 / m] * m, action, obs, model,
                                     round_stream.child(0), weighted, nonterminal)
    if sum(weights) < DEPLETION_THRESHOLD:
        if model.enumerable and model.supports_observation_prob:
            exact = exact_update(ParticleBelief(prior_states, belief.weights).to_exact(),
                                 action, obs, model, nonterminal=nonterminal)
            return ParticleBelief.from_belief(exact, n, stream.child(OVERSAMPLE_ROUNDS + 1))
        raise BeliefDepleted(f"no particle consistent with observation {obs}")
    u = stream.child(OVERSAMPLE_ROUNDS + 2).next_unit()
    return ParticleBelief(systematic_resample(states, weights, n, u))


def belief_update(belief, action: int, obs: int, model: GenerativeModel,
                  stream: RandomStream, n: int | None = None, nonterminal: bool = False):
    """Dispatch on belief type."""
    if isinstance(belief, ExactBelief):
        return exact_update(belief, action, obs, model, nonterminal=nonterminal)
    return particle_update(belief, action, obs, model, stream, n, nonterminal=nonterminal)


def total_variation(p, q) -> float:
    a, b = dict(p.items()), dict(q.items())
    return 0.5 * sum(abs(a.get(s, 0.0) - b.get(s, 0.0)) for s in set(a) | set(b))
