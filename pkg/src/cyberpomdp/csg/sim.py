"""CSG-lite generative model: defender response, scripted attacker, sensors, mission reward."""

from __future__ import annotations

import json
from dataclasses import dataclass, replace

from ..core import GenerativeModel, ProblemSpec, StepOutcome
from ..errors import StepOnTerminal, UnknownPolicy
from ..rng import RandomStream
from .terrain import CsgConfig, Effect, ScriptStep

UNAUTHORIZED = Effect.UNAUTHORIZED_USE.value
INTERCEPTION = Effect.INTERCEPTION.value
MODIFICATION = Effect.MODIFICATION.value
DEGRADATION = Effect.DEGRADATION.value

Incident = tuple  # (asset, effect, level)


@dataclass(frozen=True, slots=True)
class CsgState:
    effects: frozenset          # of (asset, effect, level)
    disabled: frozenset         # disabled credentials
    step_index: int = 0
    attacker_active: bool = True

    def has(self, asset: str, effect: str) -> bool:
        return any(a == asset and e == effect for a, e, _ in self.effects)

    def effects_on(self, asset: str) -> set[str]:
        return {e for a, e, _ in self.effects if a == asset}

    @property
    def presence(self) -> frozenset:
        """Hosts where the attacker has unauthorized use."""
        return frozenset(a for a, e, _ in self.effects if e == UNAUTHORIZED)

    @property
    def held_credentials(self) -> frozenset:
        return frozenset(a for a, e, _ in self.effects if e == INTERCEPTION)

    def dump(self) -> str:
        """Canonical text: sorted assets, sorted effect names."""
        by_asset: dict[str, list[str]] = {}
        for a, e, level in self.effects:
            tag = f"{e}={level:g}" if e == DEGRADATION else e
            by_asset.setdefault(a, []).append(tag)
        parts = [f"{a}:{'+'.join(sorted(v))}" for a, v in sorted(by_asset.items())]
        return (f"t={self.step_index} active={int(self.attacker_active)} "
                f"disabled=[{','.join(sorted(self.disabled))}] effects=[{' '.join(parts)}]")


def parse_dump(text: str) -> CsgState:
    fields = dict(tok.split("=", 1) for tok in _split_dump(text))
    effects = set()
    body = fields["effects"].strip("[]")
    for item in body.split():
        asset, tags = item.split(":", 1)
        for tag in tags.split("+"):
            if "=" in tag:
                name, level = tag.split("=")
                effects.add((asset, name, float(level)))
            else:
                effects.add((asset, tag, 1.0))
    disabled = fields["disabled"].strip("[]")
    return CsgState(frozenset(effects), frozenset(x for x in disabled.split(",") if x),
                    int(fields["t"]), fields["active"] == "1")


def _split_dump(text: str) -> list[str]:
    head, _, effects = text.strip().partition(" effects=")
    return head.split() + ["effects=" + effects]


class CsgModel(GenerativeModel):
    """Step order: defender action, attacker script step, sensors, reward."""

    def __init__(self, config: CsgConfig):
        self.config = config
        self.terrain = config.terrain
        self.mission = config.mission
        self.attacker = config.attacker
        self.sensors = config.sensors
        self.actions = config.actions
        self.max_steps = config.max_steps
        costs = [a.cost for a in self.actions]
        worst = self.mission.impact_penalty * len(self.mission.activities)
        self.spec = ProblemSpec(
            discount=config.discount,
            action_names=tuple(a.name for a in self.actions),
            observation_count=2 ** len(self.sensors),
            reward_max=self.mission.full_value,
            reward_min=min(costs) + min(worst, 0.0),
        )
        self._terminal = frozenset(self.mission.terminal_effects)
        self._trans_cache: dict = {}
        self._step_cache: dict = {}  # (state, action, idle, success) -> (next, reward, terminal)
        self._impact_cache: dict = {}
        self._pairs_cache: dict = {}
        self._fi_cache: dict = {}

    def __repr__(self) -> str:
        return f"CsgModel({len(self.terrain.assets)} assets, {len(self.actions)} actions)"

    # -- states -------------------------------------------------------------------
    def initial_state(self, attacker_present: bool = True) -> CsgState:
        effects = set()
        active = self.attacker is not None and attacker_present
        if active:
            effects.add((self.terrain.foothold, UNAUTHORIZED, 1.0))
        return CsgState(frozenset(effects), frozenset(), 0, active)

    def initial_belief(self):
        from ..belief import ExactBelief

        p = self.attacker.present_prob if self.attacker else 0.0
        if p >= 1.0 or self.attacker is None:
            return ExactBelief.point(self.initial_state(self.attacker is not None))
        if p <= 0.0:
            return ExactBelief.point(self.initial_state(False))
        return ExactBelief({self.initial_state(True): p, self.initial_state(False): 1.0 - p})

    def is_terminal(self, state: CsgState) -> bool:
        if state.step_index >= self.max_steps:
            return True
        hit = self._impact_cache.get(state.effects)
        if hit is None:
            hit = any((a, e) in self._terminal for a, e, _ in state.effects)
            self._impact_cache[state.effects] = hit
        return hit

    def termination_reason(self, state: CsgState) -> str:
        if any((a, e) in self._terminal for a, e, _ in state.effects):
            return "terminal"
        return "stepCap"

    def planning_key(self, state: CsgState, lookahead: int):
        # dynamics ignore the step counter until the cap is within reach
        if state.step_index + lookahead < self.max_steps:
            return (state.effects, state.disabled, state.attacker_active)
        return state

    # -- dynamics -----------------------------------------------------------------
    def _defend(self, state: CsgState, action: int) -> tuple[set, frozenset, str | None]:
        act = self.actions[action]
        effects = set(state.effects)
        disabled = state.disabled
        blocked = None
        if act.kind == "RestoreHost":
            host = act.target
            wiped = {host, *self.terrain.hosted_on(host)}
            effects = {x for x in effects if x[0] not in wiped}
            blocked = host
        elif act.kind == "DisableAccount":
            disabled = disabled | {act.target}
        return effects, disabled, blocked

    def next_script_step(self, effects: set) -> ScriptStep | None:
        """Earliest step whose incident is not yet in place."""
        present = {(a, e) for a, e, _ in effects}
        for step in self.attacker.steps:
            asset, effect, _ = step.incident()
            if (asset, effect) not in present:
                return step
        return None

    def _enabled(self, step: ScriptStep, effects: set, disabled: frozenset,
                 blocked: str | None) -> bool:
        presence = {a for a, e, _ in effects if e == UNAUTHORIZED}
        if not presence:
            return False
        if step.op == "StealCredential":
            return step.host in presence and step.host != blocked
        if step.op == "LateralMove":
            held = any(a == step.credential and e == INTERCEPTION for a, e, _ in effects)
            return held and step.credential not in disabled and step.target != blocked
        home = self.terrain.home_host(step.asset)
        if home is None:
            return bool(presence - {blocked})
        return home in presence and home != blocked

    def _advance(self, state: CsgState, action: int, idle: bool, success: bool) -> CsgState:
        """Deterministic successor given the attacker's idle and success outcomes."""
        effects, disabled, blocked = self._defend(state, action)
        active = state.attacker_active
        if active and not idle:
            step = self.next_script_step(effects)
            if step is not None:
                if self._enabled(step, effects, disabled, blocked):
                    if success:
                        effects.add(step.incident())
                elif not self.attacker.persistent:
                    active = False
        return CsgState(frozenset(effects), disabled, state.step_index + 1, active)

    def _attack_pending(self, state: CsgState, action: int) -> bool:
        """Whether the idle/success draws can change the successor."""
        if not state.attacker_active:
            return False
        effects, disabled, blocked = self._defend(state, action)
        step = self.next_script_step(effects)
        return step is not None

    def step(self, state: CsgState, action: int, stream: RandomStream) -> StepOutcome:
        if self.is_terminal(state):
            raise StepOnTerminal(f"state {state.dump()} is terminal")
        self.check_action(action)
        u_idle = stream.next_unit()
        u_succ = stream.next_unit()
        idle = success = False
        if self.attacker is not None:
            idle = u_idle < self.attacker.idle_prob
            success = u_succ < self.attacker.success_prob
        key = (state, action, idle, success)
        hit = self._step_cache.get(key)
        if hit is None:
            nxt = self._advance(state, action, idle, success)
            hit = (nxt, self.reward(action, nxt), self.is_terminal(nxt))
            self._step_cache[key] = hit
        nxt, reward, terminal = hit
        obs = self.sample_observation(nxt, stream)
        return StepOutcome(nxt, obs, reward, terminal)

    def reward(self, action: int, post_state: CsgState) -> float:
        return mission_reward(post_state, self.mission) + self.actions[action].cost

    # -- sensors --------------------------------------------------------------------
    def sample_observation(self, state: CsgState, stream: RandomStream) -> int:
        truth = self._sensor_truth(state)
        obs = 0
        for i, s in enumerate(self.sensors):
            u = stream.next_unit()
            if truth[i]:
                if u < 1.0 - s.fnr:
                    obs |= 1 << i
            elif u < s.fpr:
                obs |= 1 << i
        return obs

    def _sensor_truth(self, state: CsgState) -> tuple[bool, ...]:
        hit = self._pairs_cache.get(state.effects)
        if hit is None:
            pairs = {(a, e) for a, e, _ in state.effects}
            hit = tuple((s.asset, s.effect) in pairs for s in self.sensors)
            self._pairs_cache[state.effects] = hit
        return hit

    def observation_prob(self, post_state: CsgState, action: int, obs: int) -> float:
        p = 1.0
        truth = self._sensor_truth(post_state)
        for i, s in enumerate(self.sensors):
            bit = (obs >> i) & 1
            if truth[i]:
                p *= (1.0 - s.fnr) if bit else s.fnr
            else:
                p *= s.fpr if bit else (1.0 - s.fpr)
        return p

    # -- analytic model -----------------------------------------------------------------
    def transition_distribution(self, state: CsgState, action: int):
        key = (state, action)
        hit = self._trans_cache.get(key)
        if hit is not None:
            return hit
        if self.is_terminal(state):
            raise StepOnTerminal(f"state {state.dump()} is terminal")
        self.check_action(action)
        dist: dict = {}

        def add(s, p):
            if p > 0.0:
                dist[s] = dist.get(s, 0.0) + p

        if self.attacker is None or not self._attack_pending(state, action):
            add(self._advance(state, action, True, False), 1.0)
        else:
            q, ps = self.attacker.idle_prob, self.attacker.success_prob
            add(self._advance(state, action, True, False), q)
            add(self._advance(state, action, False, True), (1.0 - q) * ps)
            add(self._advance(state, action, False, False), (1.0 - q) * (1.0 - ps))
        out = [(s, p, self.reward(action, s)) for s, p in sorted(dist.items(), key=lambda kv: kv[0].dump())]
        self._trans_cache[key] = out
        return out

    def enumerate_states(self) -> list[CsgState]:
        """Breadth-first closure of the initial states under every action and outcome."""
        seen = {}
        frontier = [s for s, _ in self.initial_belief().items()]
        for s in frontier:
            seen[s] = None
        while frontier:
            nxt = []
            for s in frontier:
                if self.is_terminal(s):
                    continue
                for a in range(len(self.actions)):
                    for s2, _, _ in self.transition_distribution(s, a):
                        if s2 not in seen:
                            seen[s2] = None
                            nxt.append(s2)
            frontier = nxt
        return list(seen)

    def full_information_value(self, state: CsgState, horizon: int) -> float:
        """Optimal expected discounted reward when the incident state is visible."""
        horizon = min(horizon, self.max_steps - state.step_index)
        if horizon <= 0 or self.is_terminal(state):
            return 0.0
        key = (state.effects, state.disabled, state.attacker_active, horizon)
        hit = self._fi_cache.get(key)
        if hit is not None:
            return hit
        g = self.spec.discount
        best = -float("inf")
        for a in range(len(self.actions)):
            q = 0.0
            for s2, p, r in self.transition_distribution(state, a):
                q += p * (r + g * self.full_information_value(s2, horizon - 1))
            best = max(best, q)
        self._fi_cache[key] = best
        return best

    # -- default policies ----------------------------------------------------------------
    def rollout_policy(self, name: str | None = None, **params):
        """``restore-on-alert`` (default): restore the host behind the first firing sensor."""
        from ..planner.bounds import ConstantPolicy, ObservationPolicy

        name = name or "restore-on-alert"
        if name == "restore-on-alert":
            return ObservationPolicy(self._alert_response, first=0)
        if name == "nop":
            return ConstantPolicy(0)
        raise UnknownPolicy(f"unknown csg rollout policy {name!r}")

    def _alert_response(self, obs: int) -> int:
        for i, s in enumerate(self.sensors):
            if (obs >> i) & 1:
                host = self.terrain.home_host(s.asset)
                for a, act in enumerate(self.actions):
                    if act.kind == "RestoreHost" and act.target == host:
                        return a
        return 0

    # -- rendering ----------------------------------------------------------------------
    def state_label(self, state: CsgState) -> str:
        return state.dump()

    def observation_label(self, obs: int) -> str:
        return "".join(str((obs >> i) & 1) for i in range(len(self.sensors))) or "-"

    def parse_state(self, text: str) -> CsgState:
        return parse_dump(text)

    def serialize(self, state: CsgState) -> bytes:
        doc = {"effects": sorted([a, e, lv] for a, e, lv in state.effects),
               "disabled": sorted(state.disabled), "step": state.step_index,
               "active": state.attacker_active}
        return json.dumps(doc, sort_keys=True, separators=(",", ":")).encode()

    def deserialize(self, data: bytes) -> CsgState:
        doc = json.loads(data)
        return CsgState(frozenset((a, e, float(lv)) for a, e, lv in doc["effects"]),
                        frozenset(doc["disabled"]), doc["step"], doc["active"])

    def action_index_of(self, kind: str, target: str) -> int:
        for i, act in enumerate(self.actions):
            if act.kind == kind and act.target == target:
                return i
        raise KeyError((kind, target))


def csg_observation(state: CsgState, sensors, stream: RandomStream) -> int:
    """One bit per sensor (bit i = sensor i), each drawn independently."""
    obs = 0
    for i, s in enumerate(sensors):
        u = stream.next_unit()
        if state.has(s.asset, s.effect):
            if u < 1.0 - s.fnr:
                obs |= 1 << i
        elif u < s.fpr:
            obs |= 1 << i
    return obs


def corrupted_assets(state: CsgState, mission) -> set[str]:
    """Modified assets plus the outputs of activities that consume them, to a fixpoint."""
    corrupt = {a for a, e, _ in state.effects if e == MODIFICATION}
    changed = True
    while changed:
        changed = False
        for act in mission.activities:
            if any(r in corrupt for r in act.required_assets):
                for o in act.outputs:
                    if o not in corrupt:
                        corrupt.add(o)
                        changed = True
    return corrupt


def impacted_activities(state: CsgState, mission) -> list[str]:
    corrupt = corrupted_assets(state, mission)
    out = []
    for act in mission.activities:
        inputs = [r for r in act.required_assets if r not in act.outputs]
        hit = any(e in act.disabling_effects and e != DEGRADATION
                  for r in act.required_assets for e in state.effects_on(r))
        if not hit and MODIFICATION in act.disabling_effects:
            hit = any(r in corrupt for r in inputs)
        if hit:
            out.append(act.name)
    return out


def mission_reward(state: CsgState, mission) -> float:
    """Per-step mission value: full value for intact activities, the impact penalty otherwise.

    Degradation of a required asset scales the activity's value by ``1 - level``.
    """
    impacted = set(impacted_activities(state, mission))
    total = 0.0
    for act in mission.activities:
        if act.name in impacted:
            total += mission.impact_penalty
            continue
        value = act.per_step_value
        for r in act.required_assets:
            for a, e, level in state.effects:
                if a == r and e == DEGRADATION:
                    value *= 1.0 - level
        total += value
    return total
