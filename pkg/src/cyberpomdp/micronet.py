"""Four-node micro-network: two middle hosts guarding two targets.

States and observations are ints in ``0..15`` whose 4-character binary
rendering is ordered ``m1 m2 t1 t2`` ("1000" = only m1 compromised). Any state
with a compromised target is terminal.
"""

from __future__ import annotations

from dataclasses import dataclass, asdict

from .core import GenerativeModel, ProblemSpec, StepOutcome
from .errors import StepOnTerminal, UnknownPolicy
from .rng import RandomStream

M1, M2, T1, T2 = 8, 4, 2, 1
NODES = (M1, M2, T1, T2)
TARGETS = T1 | T2
ALL_NODES = 15

NOP, RM1, RM2, RA = 0, 1, 2, 3
ACTION_NAMES = ("NOP", "Rm1", "Rm2", "RA")

NON_TERMINAL = (0b0000, 0b0100, 0b1000, 0b1100)
_TARGET_OF = {M1: T1, M2: T2}


def format_state(bits: int) -> str:
    return format(bits, "04b")


def parse_state(text: str) -> int:
    text = text.strip()
    if len(text) != 4 or any(c not in "01" for c in text):
        raise ValueError(f"expected a 4-character bit string, got {text!r}")
    return int(text, 2)


def is_terminal_bits(bits: int) -> bool:
    return bool(bits & TARGETS)


def enumerate_micro_states() -> list[int]:
    return list(range(16))


@dataclass(frozen=True)
class MicroConfig:
    fpr: float = 0.0
    fnr: float = 0.0
    p_nil: float = 0.0
    p_succ: float = 1.0
    step_reward: float = 10.0
    terminal_penalty: float = -800.0
    surgical_cost: float = -30.0
    global_cost: float = -50.0
    discount: float = 0.95

    def __post_init__(self):
        for name in ("fpr", "fnr", "p_nil", "p_succ"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must be a probability, got {v}")
        if not self.terminal_penalty < 0 <= self.step_reward:
            raise ValueError("need terminal_penalty < 0 <= step_reward")
        if self.surgical_cost > 0 or self.global_cost > 0:
            raise ValueError("action costs are penalties and must be <= 0")

    def to_dict(self) -> dict:
        return asdict(self)


# ---------------------------------------------------------------------------
# Pure transition pieces


def defend(bits: int, action: int) -> tuple[int, int]:
    """Apply the defender's reset. Returns (state, blocked-node mask)."""
    if action == RM1:
        return bits & ~M1, M1
    if action == RM2:
        return bits & ~M2, M2
    if action == RA:
        return 0, ALL_NODES
    return bits, 0


def attack_candidates(bits: int, blocked: int) -> tuple[int, ...]:
    """Nodes the greedy attacker may go after this step (escalation first)."""
    escalate = tuple(
        _TARGET_OF[m] for m in (M1, M2)
        if bits & m and not blocked & m and not blocked & _TARGET_OF[m]
    )
    if escalate:
        return escalate
    return tuple(m for m in (M1, M2) if not bits & m and not blocked & m)


class MicroNet(GenerativeModel):
    def __init__(self, config: MicroConfig | None = None):
        self.config = config or MicroConfig()
        c = self.config
        self._costs = (0.0, c.surgical_cost, c.surgical_cost, c.global_cost)
        self.spec = ProblemSpec(
            discount=c.discount,
            action_names=ACTION_NAMES,
            observation_count=16,
            reward_max=c.step_reward,
            reward_min=min(self._costs) + c.terminal_penalty,
        )
        self._mdp_values: list[dict[int, float]] = [{s: 0.0 for s in NON_TERMINAL}]
        self._obs_factor = self._build_obs_factor()

    def __repr__(self) -> str:
        return f"MicroNet({self.config})"

    # -- contract --------------------------------------------------------
    def is_terminal(self, state: int) -> bool:
        return bool(state & TARGETS)

    def initial_state(self) -> int:
        return 0

    def action_cost(self, action: int) -> float:
        return self._costs[action]

    def reward(self, action: int, next_state: int) -> float:
        c = self.config
        outcome = c.terminal_penalty if next_state & TARGETS else c.step_reward
        return self._costs[action] + outcome

    def step(self, state: int, action: int, stream: RandomStream) -> StepOutcome:
        return self._step(state, action, stream, force_attack=False)

    def _step(self, state: int, action: int, stream: RandomStream, force_attack: bool) -> StepOutcome:
        if state & TARGETS:
            raise StepOnTerminal(f"state {format_state(state)} is terminal")
        self.check_action(action)
        c = self.config
        # fixed draw budget per step: idle, tie, success, four sensors
        u_idle = stream.next_unit()
        u_tie = stream.next_unit()
        u_succ = stream.next_unit()
        bits, blocked = defend(state, action)
        if force_attack or u_idle >= c.p_nil:
            cands = attack_candidates(bits, blocked)
            if cands and u_succ < c.p_succ:
                bits |= cands[int(u_tie * len(cands))]
        obs = self.sample_observation(bits, stream)
        terminal = bool(bits & TARGETS)
        return StepOutcome(bits, obs, self.reward(action, bits), terminal)

    def sample_next_state(self, state: int, action: int, stream: RandomStream) -> tuple[int, bool]:
        # same leading draws as _step, sensors skipped
        if state & TARGETS:
            raise StepOnTerminal(f"state {format_state(state)} is terminal")
        self.check_action(action)
        c = self.config
        u_idle = stream.next_unit()
        u_tie = stream.next_unit()
        u_succ = stream.next_unit()
        bits, blocked = defend(state, action)
        if u_idle >= c.p_nil:
            cands = attack_candidates(bits, blocked)
            if cands and u_succ < c.p_succ:
                bits |= cands[int(u_tie * len(cands))]
        return bits, bool(bits & TARGETS)

    def sample_observation(self, bits: int, stream: RandomStream) -> int:
        fpr, fnr = self.config.fpr, self.config.fnr
        obs = 0
        for node in NODES:
            u = stream.next_unit()
            if bits & node:
                if u < 1.0 - fnr:
                    obs |= node
            elif u < fpr:
                obs |= node
        return obs

    def _build_obs_factor(self):
        fpr, fnr = self.config.fpr, self.config.fnr
        table = {}
        for bits in range(16):
            row = []
            for obs in range(16):
                p = 1.0
                for node in NODES:
                    bad = bool(obs & node)
                    if bits & node:
                        p *= (1.0 - fnr) if bad else fnr
                    else:
                        p *= fpr if bad else (1.0 - fpr)
                row.append(p)
            table[bits] = tuple(row)
        return table

    def observation_prob(self, post_state: int, action: int, obs: int) -> float:
        return self._obs_factor[post_state][obs]

    def transition_distribution(self, state: int, action: int) -> list[tuple[int, float, float]]:
        if state & TARGETS:
            raise StepOnTerminal(f"state {format_state(state)} is terminal")
        self.check_action(action)
        c = self.config
        bits, blocked = defend(state, action)
        dist: dict[int, float] = {}

        def add(s: int, p: float) -> None:
            if p > 0.0:
                dist[s] = dist.get(s, 0.0) + p

        add(bits, c.p_nil)
        cands = attack_candidates(bits, blocked)
        act = 1.0 - c.p_nil
        if not cands:
            add(bits, act)
        else:
            share = act / len(cands)
            for node in cands:
                add(bits | node, share * c.p_succ)
                add(bits, share * (1.0 - c.p_succ))
        return [(s, p, self.reward(action, s)) for s, p in sorted(dist.items())]

    def enumerate_states(self) -> list[int]:
        return enumerate_micro_states()

    # -- discrete-event macro support -------------------------------------
    def dwell_probability(self, state: int, action: int) -> float | None:
        """Per-step probability that the attacker stays idle, when dwell applies."""
        if action != NOP or state & TARGETS:
            return None
        return self.config.p_nil

    def step_attacker_active(self, state: int, action: int, stream: RandomStream) -> StepOutcome:
        """One primitive step conditioned on the attacker not idling."""
        return self._step(state, action, stream, force_attack=True)

    def idle_step_reward(self, state: int) -> float:
        return self.config.step_reward

    # -- default policies for lower bounds --------------------------------
    def rollout_policy(self, name: str | None = None, **params):
        """Observation-history policies used as rollout lower bounds.

        ``periodic-ra`` (default) resets everything every ``period`` steps and
        waits otherwise; ``sensor-reactive`` resets exactly the m-nodes its
        last observation flagged; ``nop`` never acts.
        """
        from .planner.bounds import ConstantPolicy, ObservationPolicy, PeriodicPolicy

        name = name or "periodic-ra"
        if name == "periodic-ra":
            return PeriodicPolicy(RA, NOP, int(params.get("period", 1)))
        if name == "sensor-reactive":
            return ObservationPolicy(_reactive_action, first=NOP)
        if name == "nop":
            return ConstantPolicy(NOP)
        raise UnknownPolicy(f"unknown micro-net rollout policy {name!r}")

    # -- full-information (MDP) bound --------------------------------------
    def full_information_value(self, state: int, horizon: int) -> float:
        if state & TARGETS or horizon <= 0:
            return 0.0
        self._extend_mdp(horizon)
        return self._mdp_values[horizon][state]

    def full_information_action(self, state: int, horizon: int) -> int:
        self._extend_mdp(horizon)
        return max(range(4), key=lambda a: (self._q_value(state, a, horizon), -a))

    def _q_value(self, state: int, action: int, horizon: int) -> float:
        g = self.spec.discount
        prev = self._mdp_values[horizon - 1]
        return sum(
            p * (r + (0.0 if s2 & TARGETS else g * prev[s2]))
            for s2, p, r in self.transition_distribution(state, action)
        )

    def _extend_mdp(self, horizon: int) -> None:
        while len(self._mdp_values) <= horizon:
            h = len(self._mdp_values)
            self._mdp_values.append(
                {s: max(self._q_value(s, a, h) for a in range(4)) for s in NON_TERMINAL}
            )

    # -- rendering ----------------------------------------------------------
    def state_label(self, state: int) -> str:
        return format_state(state)

    def observation_label(self, obs: int) -> str:
        return format_state(obs)

    def serialize(self, state: int) -> bytes:
        return format_state(state).encode("ascii")

    def deserialize(self, data: bytes) -> int:
        return parse_state(data.decode("ascii"))

    def parse_state(self, text: str) -> int:
        return parse_state(text)


def _reactive_action(obs: int) -> int:
    flagged = obs & (M1 | M2)
    if flagged == M1 | M2:
        return RA
    if flagged == M1:
        return RM1
    if flagged == M2:
        return RM2
    return NOP


def compromise_marginals(belief) -> tuple[float, float]:
    """Posterior probability that m1 and m2 are compromised."""
    p1 = p2 = 0.0
    for s, p in belief.items():
        if s & M1:
            p1 += p
        if s & M2:
            p2 += p
    return p1, p2
