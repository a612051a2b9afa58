"""Scenario files, episode runner and benchmark statistics."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import jsonschema

from .belief import ExactBelief, ParticleBelief, belief_update, sample_state
from .core import GenerativeModel
from .errors import ConfigError, PomdpError, SchemaError
from .planner.despot import PlannerConfig
from .planner.policies import Agent, make_agent
from .rng import RandomStream, derive_seed

SCENARIO_DIR = Path(__file__).parent / "scenarios"

_NUM = {"type": "number"}
_INT = {"type": "integer", "minimum": 0}

SCENARIO_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["domain"],
    "properties": {
        "domain": {"enum": ["micro-net", "csg"]},
        "description": {"type": "string"},
        "domainParams": {"type": "object"},
        "planner": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "scenarios": {"type": "integer", "minimum": 1},
                "maxDepth": {"type": "integer", "minimum": 1},
                "budgetExpansions": {"type": ["integer", "null"], "minimum": 1},
                "budgetMs": {"type": ["number", "null"], "exclusiveMinimum": 0},
                "lambda": {"type": "number", "minimum": 0},
                "xi": _NUM,
                "targetGap": _NUM,
                "explorationConstant": {"type": ["number", "null"]},
                "seed": _INT,
                "macro": {"type": "boolean"},
                "defaultPolicy": {"type": "string"},
                "defaultPolicyParams": {"type": "object"},
            },
        },
        "evaluation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "episodes": {"type": "integer", "minimum": 1},
                "maxSteps": {"type": "integer", "minimum": 1},
                "seed": _INT,
                "agents": {"type": "array", "items": {"type": "string"}, "minItems": 1},
                "initialBelief": {"type": ["string", "object"]},
                "filter": {"enum": ["exact", "particle"]},
                "particles": {"type": "integer", "minimum": 1},
                "policyParams": {"type": "object"},
                "oracleHorizon": {"type": "integer", "minimum": 0},
            },
        },
    },
}

_PLANNER_FIELDS = {
    "scenarios": "scenarios", "maxDepth": "max_depth", "budgetExpansions": "budget_expansions",
    "budgetMs": "budget_ms", "lambda": "regularization", "xi": "xi", "targetGap": "target_gap",
    "explorationConstant": "exploration_constant", "seed": "seed", "macro": "macro",
    "defaultPolicy": "default_policy", "defaultPolicyParams": "default_policy_params",
}


def _schema_path(err: jsonschema.ValidationError) -> str:
    return "/" + "/".join(str(p) for p in err.absolute_path)


@dataclass
class ScenarioConfig:
    domain: str
    domain_params: dict
    planner: dict
    evaluation: dict
    name: str = "inline"

    @classmethod
    def from_dict(cls, data: dict, name: str = "inline") -> ScenarioConfig:
        try:
            jsonschema.validate(data, SCENARIO_SCHEMA)
        except jsonschema.ValidationError as err:
            raise SchemaError(_schema_path(err), err.message) from None
        return cls(data["domain"], copy.deepcopy(data.get("domainParams", {})),
                   copy.deepcopy(data.get("planner", {})),
                   copy.deepcopy(data.get("evaluation", {})), name)

    def to_dict(self) -> dict:
        return {"domain": self.domain, "domainParams": self.domain_params,
                "planner": self.planner, "evaluation": self.evaluation}

    def planner_config(self, **overrides) -> PlannerConfig:
        kwargs = {_PLANNER_FIELDS[k]: v for k, v in self.planner.items()}
        kwargs.update({k: v for k, v in overrides.items() if v is not None})
        try:
            return PlannerConfig(**kwargs)
        except ValueError as err:
            raise ConfigError(f"planner: {err}") from None

    def config_hash(self, extra: dict | None = None) -> str:
        payload = {"scenario": self.to_dict(), "extra": extra or {}}
        blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()


def resolve_scenario_path(path: str | Path) -> Path:
    """Existing path as given, else a bundled scenario by file name (``.json`` optional)."""
    p = Path(path)
    if p.exists():
        return p
    name = p.name if p.suffix == ".json" else p.name + ".json"
    bundled = SCENARIO_DIR / name
    if bundled.exists():
        return bundled
    raise ConfigError(f"scenario file not found: {path}")


def load_scenario(path: str | Path) -> ScenarioConfig:
    p = resolve_scenario_path(path)
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as err:
        raise ConfigError(f"{p}: invalid JSON ({err})") from None
    return ScenarioConfig.from_dict(data, p.stem)


def bundled_scenarios() -> list[str]:
    return sorted(p.stem for p in SCENARIO_DIR.glob("*.json"))


def build_model(cfg: ScenarioConfig, discount: float | None = None) -> GenerativeModel:
    params = dict(cfg.domain_params)
    if discount is not None:
        params["discount"] = discount
    if cfg.domain == "micro-net":
        from .micronet import MicroConfig, MicroNet

        known = set(MicroConfig.__dataclass_fields__)
        aliases = {"pNil": "p_nil", "pSucc": "p_succ", "stepReward": "step_reward",
                   "terminalPenalty": "terminal_penalty", "surgicalCost": "surgical_cost",
                   "globalCost": "global_cost"}
        kwargs = {}
        for key, value in params.items():
            field_name = aliases.get(key, key)
            if field_name not in known:
                raise SchemaError(f"/domainParams/{key}", "unknown micro-net parameter")
            kwargs[field_name] = value
        try:
            return MicroNet(MicroConfig(**kwargs))
        except (TypeError, ValueError) as err:
            raise ConfigError(f"domainParams: {err}") from None
    from .csg.sim import CsgModel
    from .csg.terrain import load_terrain

    return CsgModel(load_terrain(params))


def initial_belief(model: GenerativeModel, cfg: ScenarioConfig | None = None) -> ExactBelief:
    spec = (cfg.evaluation.get("initialBelief") if cfg else None)
    if spec is None:
        return model.initial_belief()
    return parse_belief(model, spec)


def parse_belief(model: GenerativeModel, spec) -> ExactBelief:
    """``"1000"`` (point mass) or ``{"1000": 0.5, "0000": 0.5}``."""
    try:
        if isinstance(spec, str):
            return ExactBelief.point(model.parse_state(spec))
        return ExactBelief({model.parse_state(k): float(v) for k, v in spec.items()})
    except (ValueError, AttributeError) as err:
        raise ConfigError(f"bad belief {spec!r}: {err}") from None


# ---------------------------------------------------------------------------
# Episodes


@dataclass
class TraceStep:
    step_index: int
    belief_state: str
    belief_prob: float
    action: str
    observation: str
    reward: float
    cumulative_discounted: float
    cumulative_undiscounted: float
    attacker_score: float
    true_state: str


@dataclass
class EpisodeTrace:
    agent: str
    seed: int
    steps: list[TraceStep] = field(default_factory=list)
    termination: str = "stepCap"
    start_state: str = ""
    states: list = field(default_factory=list, repr=False, compare=False)  # post-step true states

    @property
    def total_reward(self) -> float:
        return self.steps[-1].cumulative_undiscounted if self.steps else 0.0

    @property
    def discounted_return(self) -> float:
        return self.steps[-1].cumulative_discounted if self.steps else 0.0

    def __len__(self) -> int:
        return len(self.steps)

    def to_dict(self) -> dict:
        return {"agent": self.agent, "seed": self.seed, "startState": self.start_state,
                "termination": self.termination, "totalReward": self.total_reward,
                "discountedReturn": self.discounted_return,
                "steps": [asdict(s) for s in self.steps]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        cols = list(TraceStep.__dataclass_fields__)
        lines = [",".join(cols)]
        for s in self.steps:
            lines.append(",".join(_csv_cell(getattr(s, c)) for c in cols))
        return "\n".join(lines) + "\n"


def _csv_cell(value) -> str:
    if isinstance(value, float):
        return repr(value)
    text = str(value)
    return f'"{text}"' if "," in text else text


def run_episode(model: GenerativeModel, agent: Agent, seed: int, max_steps: int,
                belief: ExactBelief | None = None, filter: str = "exact",
                particles: int = 10_000) -> EpisodeTrace:
    """Plan, step the hidden state, filter, record; until terminal entry or ``max_steps``.

    The episode stream splits into the true start state (child 0), the
    environment steps (child 1, one child per step) and the particle filter
    (child 2, one child per step).
    """
    if max_steps < 1:
        raise ValueError("max_steps must be >= 1")
    if filter not in ("exact", "particle"):
        raise ValueError(f"unknown filter {filter!r}")
    stream = RandomStream(seed)
    belief = belief if belief is not None else model.initial_belief()
    state = sample_state(belief, stream.child(0))
    if filter == "particle":
        belief = ParticleBelief.from_belief(belief, particles, stream.child(3))
    env, filt = stream.child(1), stream.child(2)
    trace = EpisodeTrace(agent.name, seed, start_state=model.state_label(state))
    gamma = model.spec.discount
    disc = undisc = 0.0
    g = 1.0
    for t in range(max_steps):
        try:
            action = agent.act(belief)
            out = model.step(state, action, env.child(t))
        except PomdpError as err:
            raise type(err)(f"step {t}: {err}") from err
        disc += g * out.reward
        undisc += out.reward
        g *= gamma
        label, prob = belief.most_likely()
        trace.steps.append(TraceStep(
            t, model.state_label(label), prob, model.action_name(action),
            model.observation_label(out.observation), out.reward, disc, undisc, -undisc,
            model.state_label(out.next_state)))
        trace.states.append(out.next_state)
        state = out.next_state
        if out.terminal:
            trace.termination = model.termination_reason(out.next_state)
            break
        try:
            belief = belief_update(belief, action, out.observation, model,
                                   stream=filt.child(t), nonterminal=True)
        except PomdpError as err:
            raise type(err)(f"step {t}: {err}") from err
    return trace


# ---------------------------------------------------------------------------
# Benchmarks


@dataclass
class AgentReport:
    agent: str
    episodes: int
    mean: float
    stderr: float | None
    ci_lo: float | None
    ci_hi: float | None
    mean_len: float
    terminal_rate: float
    mean_discounted: float
    totals: list[float] | None = None

    CSV_COLUMNS = ("agent", "episodes", "mean", "stderr", "ci_lo", "ci_hi", "mean_len",
                   "terminal_rate")


@dataclass
class BenchmarkReport:
    scenario: str
    master_seed: int
    config_hash: str
    agents: list[AgentReport]
    episode_seeds: list[int]

    def agent(self, name: str) -> AgentReport:
        for a in self.agents:
            if a.agent == name:
                return a
        raise KeyError(name)

    def to_dict(self, keep_episodes: bool = False) -> dict:
        rows = []
        for a in self.agents:
            row = {c: getattr(a, c) for c in AgentReport.CSV_COLUMNS}
            row["mean_discounted"] = a.mean_discounted
            if keep_episodes:
                row["totals"] = a.totals
            rows.append(row)
        out = {"scenario": self.scenario, "masterSeed": self.master_seed,
               "configHash": self.config_hash, "agents": rows}
        if keep_episodes:
            out["episodeSeeds"] = self.episode_seeds
        return out

    def to_json(self, keep_episodes: bool = False) -> str:
        return json.dumps(self.to_dict(keep_episodes), indent=2) + "\n"

    def to_csv(self) -> str:
        lines = [",".join(AgentReport.CSV_COLUMNS)]
        for a in self.agents:
            cells = []
            for c in AgentReport.CSV_COLUMNS:
                v = getattr(a, c)
                cells.append("NA" if v is None else (repr(v) if isinstance(v, float) else str(v)))
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


def summarize(agent: str, traces: list[EpisodeTrace], keep: bool = False) -> AgentReport:
    totals = [t.total_reward for t in traces]
    n = len(totals)
    mean = math.fsum(totals) / n
    if n > 1:
        var = math.fsum((x - mean) ** 2 for x in totals) / (n - 1)
        stderr = math.sqrt(var / n)
        lo, hi = mean - 1.96 * stderr, mean + 1.96 * stderr
    else:
        stderr = lo = hi = None
    return AgentReport(
        agent, n, mean, stderr, lo, hi,
        mean_len=sum(len(t) for t in traces) / n,
        terminal_rate=sum(t.termination == "terminal" for t in traces) / n,
        mean_discounted=math.fsum(t.discounted_return for t in traces) / n,
        totals=totals if keep else None,
    )


def benchmark(cfg: ScenarioConfig, agents: list[str] | None = None, episodes: int | None = None,
              seed: int | None = None, keep_episodes: bool = False, discount: float | None = None,
              planner_overrides: dict | None = None, max_steps: int | None = None,
              return_traces: bool = False):
    """Runs every agent on the same derived episode seeds (common random numbers)."""
    ev = cfg.evaluation
    agents = list(agents or ev.get("agents") or ["despot"])
    episodes = episodes if episodes is not None else ev.get("episodes", 100)
    seed = seed if seed is not None else ev.get("seed", 0)
    max_steps = max_steps if max_steps is not None else ev.get("maxSteps", 100)
    if episodes < 1 or not agents:
        raise ConfigError("benchmark needs at least one agent and one episode")
    # everything that could fail is built before the first episode
    model = build_model(cfg, discount)
    pcfg = cfg.planner_config(**(planner_overrides or {}))
    belief = initial_belief(model, cfg)
    built = [make_agent(a, model, pcfg, ev.get("policyParams")) for a in agents]
    if any(a in ("despot", "pomcp") for a in agents):
        pcfg.check_budget()
    seeds = [derive_seed(seed, e) for e in range(episodes)]
    filt = ev.get("filter", "exact")
    particles = ev.get("particles", 10_000)
    reports, all_traces = [], {}
    for agent in built:
        traces = [run_episode(model, agent, s, max_steps, belief, filt, particles) for s in seeds]
        reports.append(summarize(agent.name, traces, keep_episodes))
        if return_traces:
            all_traces[agent.name] = traces
    extra = {"agents": agents, "episodes": episodes, "seed": seed, "maxSteps": max_steps,
             "discount": model.spec.discount, "planner": asdict(pcfg)}
    report = BenchmarkReport(cfg.name, seed, cfg.config_hash(extra), reports, seeds)
    return (report, all_traces) if return_traces else report
