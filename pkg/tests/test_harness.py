from __future__ import annotations

import csv
import io
import json
import math

import pytest

from cyberpomdp.errors import ConfigError, SchemaError, UnknownPolicy
from cyberpomdp.harness import (
    AgentReport, ScenarioConfig, benchmark, build_model, bundled_scenarios, initial_belief,
    load_scenario, parse_belief, run_episode,
)
from cyberpomdp.micronet import MicroConfig, MicroNet
from cyberpomdp.planner import PlannerConfig, fixed_policy, make_agent


def micro_cfg(**params) -> ScenarioConfig:
    doc = {"domain": "micro-net", "domainParams": params,
           "planner": {"scenarios": 50, "maxDepth": 10, "budgetExpansions": 100},
           "evaluation": {"episodes": 5, "maxSteps": 10, "seed": 1}}
    return ScenarioConfig.from_dict(doc)


def test_bundled_scenarios_present():
    # [TRIVIAL]
    assert bundled_scenarios() == ["fig4-fusion", "fig4-fusion-da", "micro-basic", "micro-fig2"]
    for name in bundled_scenarios():
        cfg = load_scenario(name)
        build_model(cfg)
        cfg.planner_config().check_budget()


def test_micro_fig2_parameters():
    # [PAPER] fpr 0.1, pNil 0.9; fnr 0 by the documented choice
    net = build_model(load_scenario("micro-fig2.json"))
    assert (net.config.fpr, net.config.fnr, net.config.p_nil) == (0.1, 0.0, 0.9)


def test_unknown_top_level_key():
    # [TRIVIAL] typos are hard errors
    with pytest.raises(SchemaError) as err:
        ScenarioConfig.from_dict({"domain": "micro-net", "plannr": {}})
    assert "plannr" in str(err.value)


def test_unknown_domain_parameter():
    # [TRIVIAL]
    with pytest.raises(SchemaError) as err:
        build_model(micro_cfg(pnil=0.5))
    assert err.value.path == "/domainParams/pnil"


def test_bad_probability_is_config_error():
    # [TRIVIAL]
    with pytest.raises(ConfigError):
        build_model(micro_cfg(fpr=2.0))


def test_missing_scenario_file():
    # [TRIVIAL]
    with pytest.raises(ConfigError):
        load_scenario("/nonexistent/thing.json")


def test_parse_belief_forms():
    # [TRIVIAL]
    net = MicroNet()
    assert parse_belief(net, "1000").as_dict() == {8: 1.0}
    assert parse_belief(net, {"1000": 0.5, "0000": 0.5}).prob(0) == 0.5
    with pytest.raises(ConfigError):
        parse_belief(net, "10")


def test_initial_belief_from_evaluation():
    # [TRIVIAL]
    doc = {"domain": "micro-net", "evaluation": {"initialBelief": "0100"}}
    cfg = ScenarioConfig.from_dict(doc)
    assert initial_belief(build_model(cfg), cfg).as_dict() == {4: 1.0}


def test_planner_overrides_and_hash():
    # [TRIVIAL] None overrides are ignored; the hash tracks every parameter
    cfg = micro_cfg()
    assert cfg.planner_config(max_depth=None).max_depth == 10
    assert cfg.planner_config(max_depth=3).max_depth == 3
    assert cfg.config_hash({"seed": 1}) != cfg.config_hash({"seed": 2})
    assert cfg.config_hash({"seed": 1}) == micro_cfg().config_hash({"seed": 1})
    with pytest.raises(ConfigError):
        cfg.planner_config(scenarios=0)


def test_idle_nop_episode():
    # [TRIVIAL] 5 steps of +10
    net = MicroNet(MicroConfig(p_nil=1.0))
    trace = run_episode(net, fixed_policy("always-nop", net), seed=3, max_steps=5)
    assert len(trace) == 5
    assert trace.total_reward == 50.0
    assert trace.termination == "stepCap"


def test_nop_against_certain_attacker():
    # [DERIVED] hand-simulated two-stage attack: m then t
    net = MicroNet(MicroConfig())
    trace = run_episode(net, fixed_policy("always-nop", net), seed=3, max_steps=10)
    assert len(trace) == 2
    assert trace.termination == "terminal"
    assert [s.reward for s in trace.steps] == [10.0, -800.0]


def test_trace_bookkeeping():
    # [TRIVIAL] attacker score mirrors the defender; cumulative sums are exact
    net = MicroNet(MicroConfig(fpr=0.1, p_nil=0.9))
    agent = fixed_policy("threshold-surgical", net)
    trace = run_episode(net, agent, seed=8, max_steps=30)
    disc = undisc = 0.0
    for t, step in enumerate(trace.steps):
        undisc += step.reward
        disc += 0.95 ** t * step.reward
        assert step.attacker_score + step.cumulative_undiscounted == 0
        assert step.cumulative_undiscounted == undisc
        assert step.cumulative_discounted == pytest.approx(disc, abs=1e-9)
    assert trace.discounted_return == pytest.approx(disc)


def test_episode_deterministic_byte_identical():
    # [TRIVIAL]
    net = MicroNet(MicroConfig(fpr=0.1, p_nil=0.9))
    agent = make_agent("despot", net, PlannerConfig(scenarios=50, max_depth=8, budget_expansions=50))
    a = run_episode(net, agent, seed=5, max_steps=15)
    b = run_episode(net, make_agent("despot", net, PlannerConfig(scenarios=50, max_depth=8,
                                                                 budget_expansions=50)), 5, 15)
    assert a.to_json() == b.to_json()
    assert a.to_csv() == b.to_csv()


def test_particle_filter_episode():
    # [TRIVIAL] the particle path runs end to end
    net = MicroNet(MicroConfig(fpr=0.1, fnr=0.1, p_nil=0.8))
    agent = fixed_policy("threshold-surgical", net)
    trace = run_episode(net, agent, seed=2, max_steps=10, filter="particle", particles=500)
    assert 1 <= len(trace) <= 10
    with pytest.raises(ValueError):
        run_episode(net, agent, seed=2, max_steps=0)


def test_single_episode_stderr_not_applicable():
    # [TRIVIAL]
    report = benchmark(micro_cfg(pNil=1.0), ["always-nop"], episodes=1)
    row = report.agent("always-nop")
    assert row.stderr is None and row.ci_lo is None
    assert "NA" in report.to_csv().splitlines()[1]


def test_identical_agents_overlap():
    # [TRIVIAL] same distribution, same seeds
    cfg = micro_cfg(pNil=1.0)
    report = benchmark(cfg, ["always-nop", "always-nop"], episodes=1000, max_steps=5)
    a, b = report.agents
    assert a.ci_lo <= b.ci_hi and b.ci_lo <= a.ci_hi


def test_report_fields_and_csv_columns():
    # [TRIVIAL] CI is mean +/- 1.96 stderr
    report = benchmark(micro_cfg(fpr=0.1, pNil=0.9), ["always-nop", "threshold-surgical"],
                       episodes=40, seed=4, keep_episodes=True)
    rows = list(csv.DictReader(io.StringIO(report.to_csv())))
    assert list(rows[0]) == list(AgentReport.CSV_COLUMNS)
    for r in report.agents:
        assert r.ci_lo == pytest.approx(r.mean - 1.96 * r.stderr)
        assert r.ci_hi == pytest.approx(r.mean + 1.96 * r.stderr)
        assert 0.0 <= r.terminal_rate <= 1.0


def test_keep_episodes_integrity():
    # [TRIVIAL] recomputed mean equals the reported mean exactly
    report = benchmark(micro_cfg(fpr=0.1, pNil=0.9), ["threshold-surgical"], episodes=30,
                       keep_episodes=True)
    doc = json.loads(report.to_json(keep_episodes=True))
    agent = doc["agents"][0]
    assert math.fsum(agent["totals"]) / len(agent["totals"]) == agent["mean"]
    assert len(doc["episodeSeeds"]) == 30
    assert "configHash" in doc and "masterSeed" in doc


def test_config_errors_fail_fast(monkeypatch):
    # [TRIVIAL] nothing runs when an agent name is bad
    import cyberpomdp.harness as harness

    calls = []
    monkeypatch.setattr(harness, "run_episode", lambda *a, **k: calls.append(1))
    with pytest.raises(UnknownPolicy):
        benchmark(micro_cfg(), ["always-nop", "always-panic"], episodes=3)
    with pytest.raises(ConfigError):
        benchmark(micro_cfg(), ["always-nop"], episodes=0)
    assert calls == []


def test_benchmark_uses_common_seeds():
    # [TRIVIAL] every agent sees the same derived episode seeds
    _, traces = benchmark(micro_cfg(fpr=0.1, pNil=0.9), ["always-nop", "always-ra"],
                          episodes=4, return_traces=True)
    assert [t.seed for t in traces["always-nop"]] == [t.seed for t in traces["always-ra"]]


def test_csg_scenario_episode():
    # [TRIVIAL] the fig4 scenario runs and caps at maxSteps
    cfg = load_scenario("fig4-fusion")
    net = build_model(cfg)
    trace = run_episode(net, fixed_policy("always-nop", net), seed=0, max_steps=40)
    assert trace.termination in ("terminal", "stepCap")
    assert trace.steps[0].belief_state.startswith("t=0")
