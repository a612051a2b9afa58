"""End-to-end acceptance checks, one test per criterion, each under its own time limit."""

from __future__ import annotations

import hashlib
import math
import subprocess
import sys
import time
from pathlib import Path

import pytest

from cyberpomdp.belief import ExactBelief, ParticleBelief, exact_update, particle_update, total_variation
from cyberpomdp.csg import CsgModel
from cyberpomdp.harness import benchmark, build_model, load_scenario, run_episode
from cyberpomdp.micronet import ACTION_NAMES, RM1, MicroConfig, MicroNet, parse_state
from cyberpomdp.oracle import OracleAgent, emit_dot, exact_value, extract_policy_graph
from cyberpomdp.planner import (
    Despot, PlannerConfig, default_policy_rollout, hindsight_upper_bound, macro_wrap, plan,
)
from cyberpomdp.planner.bounds import resolve_rollout_policy
from cyberpomdp.planner.policies import Agent
from cyberpomdp.rng import RandomStream

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parents[1]
POINT_STATES = ["0000", "0100", "1000", "1100"]
DETERMINISTIC = MicroConfig(fpr=0.0, fnr=0.0, p_nil=0.0, p_succ=1.0, discount=0.95)


class RandomActionAgent(Agent):
    """Ignores the belief and picks a uniformly random action."""

    def __init__(self, seed: int, n_actions: int = 4):
        self.name = "random"
        self.stream = RandomStream(seed)
        self.n_actions = n_actions

    def act(self, belief) -> int:
        return self.stream.next_below(self.n_actions)


class Timer:
    def __init__(self, limit: float):
        self.limit = limit

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.elapsed = time.perf_counter() - self.start
        if exc[0] is None:
            assert self.elapsed < self.limit, f"took {self.elapsed:.1f}s, limit {self.limit}s"


def test_criterion_01_reward_constants():
    # [PAPER] +10 per safe step, -800 on reaching a target, -30 surgical, -50 global
    cost = {"NOP": 0.0, "Rm1": -30.0, "Rm2": -30.0, "RA": -50.0}
    with Timer(10):
        rs = RandomStream(2024)
        checked = 0
        episode = 0
        while checked < 10_000:
            knobs = rs.child(episode)
            net = MicroNet(MicroConfig(fpr=knobs.next_unit() * 0.3, fnr=knobs.next_unit() * 0.3,
                                       p_nil=knobs.next_unit(), p_succ=knobs.next_unit()))
            trace = run_episode(net, RandomActionAgent(10_000 + episode), episode, 50)
            for step, state in zip(trace.steps, trace.states):
                outcome = -800.0 if net.is_terminal(state) else 10.0
                assert step.action in ACTION_NAMES
                assert step.reward == cost[step.action] + outcome
                checked += 1
            episode += 1
    assert checked >= 10_000


def test_criterion_02_oracle_agreement():
    # [DERIVED] horizon-3 exact solver is the independent reference
    net = MicroNet(DETERMINISTIC)
    config = PlannerConfig(scenarios=500, budget_expansions=10_000, seed=0)
    with Timer(60):
        for label in POINT_STATES:
            belief = ExactBelief.point(parse_state(label))
            _, oracle_action = exact_value(belief, net, 3)
            assert plan(belief, net, config) == oracle_action, label
        value, action = exact_value(ExactBelief.point(parse_state("1000")), net, 1)
    # [PAPER] removing the compromised node costs 30, the safe step earns 10
    assert (value, action) == (-20.0, RM1)


@pytest.mark.parametrize("cfg", [
    DETERMINISTIC,
    MicroConfig(fpr=0.1, fnr=0.0, p_nil=0.9),
    MicroConfig(fpr=0.1, fnr=0.1, p_nil=0.5, p_succ=0.8),
    MicroConfig(p_nil=1.0),
], ids=["deterministic", "fig2", "noisy", "idle"])
def test_criterion_03_bound_sandwich(cfg):
    # [DERIVED] rollout lower estimate <= exact value <= full-information value
    horizon, n = 4, 2000
    net = MicroNet(cfg)
    policy = resolve_rollout_policy(net)
    with Timer(60 / 4):
        for label in POINT_STATES:
            state = parse_state(label)
            values = [default_policy_rollout(state, RandomStream(77).child(i), horizon, net, policy)
                      for i in range(n)]
            mean = math.fsum(values) / n
            sd = math.sqrt(math.fsum((v - mean) ** 2 for v in values) / (n - 1))
            stderr = sd / math.sqrt(n)
            exact, _ = exact_value(ExactBelief.point(state), net, horizon)
            searcher = Despot(net, PlannerConfig(scenarios=100, budget_expansions=200, max_depth=horizon))
            upper = hindsight_upper_bound(searcher.sample_scenarios(ExactBelief.point(state)), net, horizon)
            assert mean - 2 * stderr <= exact + 1e-9, label
            assert exact <= upper + 1e-9, label
            result = searcher.search(ExactBelief.point(state))
            assert result.bound_checks > 0
            assert result.root_lower <= result.root_upper + 1e-7


def test_criterion_04_particle_filter_matches_exact():
    # [DERIVED] exact Bayes filter is the reference
    net = MicroNet(MicroConfig(fpr=0.1, fnr=0.1, p_nil=0.5, p_succ=0.8))
    worst, histories, seed = 0.0, 0, 4000
    with Timer(60):
        while histories < 100:
            rs = RandomStream(seed)
            seed += 1
            state, exact = 0, ExactBelief.point(0)
            particles = ParticleBelief.from_belief(exact, 10_000, rs.child(99))
            distances = []
            for t in range(5):
                action = rs.child(50 + t).next_below(4)
                out = net.step(state, action, rs.child(t))
                if out.terminal:
                    break
                exact = exact_update(exact, action, out.observation, net, nonterminal=True)
                particles = particle_update(particles, action, out.observation, net,
                                            rs.child(100 + t), nonterminal=True)
                distances.append(total_variation(particles, exact))
                state = out.next_state
            else:
                histories += 1
                worst = max(worst, *distances)
    assert worst <= 0.05


def test_criterion_05_macro_fidelity():
    idle = macro_wrap(MicroNet(MicroConfig(p_nil=1.0)))
    fig2 = macro_wrap(MicroNet(MicroConfig(fpr=0.1, p_nil=0.9)))
    det = MicroNet(DETERMINISTIC)
    with Timer(30):
        # [PAPER] pure NOP chain reward is the geometric series of +10
        for k in range(1, 51):
            out = idle.step(0, 0, RandomStream(k), max_elapsed=k)
            assert out.elapsed == k
            assert abs(out.reward - 10 * (1 - 0.95 ** k) / (1 - 0.95)) <= 1e-9
        # [DERIVED] primitive planner is the reference
        for label in POINT_STATES:
            belief = ExactBelief.point(parse_state(label))
            on = plan(belief, det, PlannerConfig(scenarios=200, budget_expansions=2000, macro=True))
            off = plan(belief, det, PlannerConfig(scenarios=200, budget_expansions=2000))
            assert on == off, label
        # [TRIVIAL] Geometric(0.1) has mean 10
        n = 100_000
        dwell = math.fsum(fig2.sample_dwell(0.9, RandomStream(5).child(i)) for i in range(n)) / n
    assert abs(dwell - 10.0) <= 0.2


def test_criterion_06_fig2_instance_performance():
    # [DERIVED] the seed-pinned benchmark itself
    cfg = load_scenario("micro-fig2")
    with Timer(600):
        report = benchmark(cfg, ["despot", "always-ra", "always-nop"], episodes=1000)
    despot = report.agent("despot")
    for baseline in ("always-ra", "always-nop"):
        other = report.agent(baseline)
        assert despot.mean >= other.mean, baseline
        assert despot.ci_lo > other.ci_hi, baseline


def _detection_step(trace) -> int | None:
    """First step the attacker newly holds server1 and the sensor on it fires."""
    before = False
    for t, (step, state) in enumerate(zip(trace.steps, trace.states)):
        now = state.has("server1", "UnauthorizedUse")
        if now and not before:
            return t if step.observation[0] == "1" else None
        before = now
    return None


def test_criterion_07_fig4_response_behavior():
    # [PAPER] restore the compromised server promptly; disabling the account is preferred
    with Timer(600):
        rx_report, rx = benchmark(load_scenario("fig4-fusion"), ["despot"], episodes=1000,
                                  return_traces=True)
        da_report, da = benchmark(load_scenario("fig4-fusion-da"), ["despot"], episodes=1000,
                                  return_traces=True)
    detected = restored = disabled = 0
    for rx_trace, da_trace in zip(rx["despot"], da["despot"]):
        t = _detection_step(rx_trace)
        if t is None or t + 1 >= len(rx_trace.steps):
            continue
        detected += 1
        restored += any(s.action == "RX(server1)" for s in rx_trace.steps[t + 1:t + 3])
        disabled += any(s.action.startswith("DA(") for s in da_trace.steps[:t + 3])
    assert detected >= 100
    assert restored / detected >= 0.95
    assert disabled / detected >= 0.95
    assert da_report.agent("despot").mean > rx_report.agent("despot").mean


def test_criterion_08_disable_account_blocks_modification():
    # [DERIVED] exhaustive branch closure after disabling the only credential
    cfg = load_scenario("fig4-fusion-da")
    model = build_model(cfg)
    assert isinstance(model, CsgModel)
    da = model.action_index_of("DisableAccount", "cred")
    with Timer(10):
        starts = [s for s in model.enumerate_states()
                  if not model.is_terminal(s)
                  and not s.has("server1", "UnauthorizedUse")
                  and not any(e == "Modification" for _, e, _ in s.effects)]
        seen, frontier = set(), []
        for s in starts:
            for s2, p, _ in model.transition_distribution(s, da):
                if p > 0 and s2 not in seen:
                    seen.add(s2)
                    frontier.append(s2)
        while frontier:
            s = frontier.pop()
            assert "cred" in s.disabled
            assert not any(e == "Modification" for _, e, _ in s.effects), s.dump()
            assert not s.has("server1", "UnauthorizedUse"), s.dump()
            if model.is_terminal(s):
                continue
            for a in range(len(model.actions)):
                for s2, p, _ in model.transition_distribution(s, a):
                    if p > 0 and s2 not in seen:
                        seen.add(s2)
                        frontier.append(s2)
    assert len(starts) > 0 and len(seen) > 0


def _cli(args: list[str]) -> bytes:
    done = subprocess.run([sys.executable, "-m", "cyberpomdp", *args], capture_output=True,
                          check=True, cwd=ROOT)
    return done.stdout


def test_criterion_09_cli_determinism(tmp_path):
    # [TRIVIAL] identical flags give identical bytes
    invocations = [
        ["run", "--scenario", "fig4-fusion", "--agent", "despot", "--format", "json"],
        ["bench", "--scenario", "micro-fig2", "--agent", "despot", "--agent", "always-ra",
         "--episodes", "40", "--format", "json", "--keep-episodes"],
        ["bench", "--scenario", "micro-fig2", "--agent", "always-nop", "--episodes", "40",
         "--format", "csv"],
        ["policy-graph", "--scenario", "micro-fig2", "--belief", "0000", "--format", "dot"],
    ]
    with Timer(30):
        for i, args in enumerate(invocations):
            first = _cli(args)
            second = _cli(args)
            assert first and first == second, args
            out = tmp_path / f"out{i}"
            _cli([*args, "--out", str(out)])
            assert out.read_bytes() == first, args


def test_criterion_10_out_of_scope_documented_and_goldens_frozen():
    readme = (ROOT / "README.md").read_text()
    section = readme.split("## Out of scope", 1)[1].split("\n## ", 1)[0]
    for marker in ("SARSOP", "100,000", "10^56", "10,000"):
        assert marker in section, marker
    # [DERIVED] frozen output of the horizon-capped oracle policy on the noisy instance
    net = MicroNet(MicroConfig(fpr=0.1, fnr=0.0, p_nil=0.9))
    graph = extract_policy_graph(net, OracleAgent(net, 3), ExactBelief.point(0), 500)
    assert (len(graph.nodes), len(graph.edges)) == (6, 96)
    digest = hashlib.sha256(emit_dot(graph).encode()).hexdigest()
    assert digest == "3ed17c88b6fe4b8cebf7158764be6d12a21b85362d9bb17b28e73248bf861d2b"
