from __future__ import annotations

import json
import subprocess
import sys

import pytest

from cyberpomdp.cli import EXIT_OK, EXIT_RUNTIME, EXIT_USAGE, main


def run(args, capsys):
    code = main(args)
    out, err = capsys.readouterr()
    return code, out, err


def test_exact_hand_derived_case(capsys):
    # [DERIVED] one-step expectimax: -20 via Rm1
    code, out, _ = run(["exact", "--scenario", "micro-basic.json", "--belief", "1000",
                        "--horizon", "1"], capsys)
    assert code == EXIT_OK
    assert out == "value -20\naction Rm1\n"


def test_exact_json_and_belief_object(capsys):
    # [TRIVIAL]
    code, out, _ = run(["exact", "--scenario", "micro-basic", "--belief",
                        '{"0000": 1.0}', "--horizon", "0", "--format", "json"], capsys)
    assert code == EXIT_OK
    assert json.loads(out) == {"action": "NOP", "horizon": 0, "value": 0.0}


@pytest.mark.parametrize("argv", [
    ["frobnicate"],
    ["bench", "--scenario", "micro-basic", "--bogus"],
    ["bench"],
    ["run", "--scenario", "micro-basic", "--macro", "maybe"],
    ["bench", "--scenario", "micro-basic", "--budget-ms", "5", "--budget-expansions", "5"],
    ["bench", "--scenario", "micro-basic", "--episodes", "0"],
])
def test_usage_errors_exit_1(argv, capsys):
    # [TRIVIAL]
    code, out, err = run(argv, capsys)
    assert code == EXIT_USAGE
    assert out == ""
    assert "usage:" in err


def test_config_error_exit_1(capsys, tmp_path):
    # [TRIVIAL] schema violations are usage-class errors
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"domain": "micro-net", "planer": {}}))
    code, _, err = run(["bench", "--scenario", str(bad)], capsys)
    assert code == EXIT_USAGE and "planer" in err
    code, _, err = run(["bench", "--scenario", "micro-basic", "--agent", "always-panic"], capsys)
    assert code == EXIT_USAGE and "always-panic" in err


def test_runtime_error_exit_2(capsys):
    # [TRIVIAL] horizon beyond the oracle cap
    code, _, err = run(["exact", "--scenario", "micro-basic", "--horizon", "9"], capsys)
    assert code == EXIT_RUNTIME and "HorizonTooDeep" in err


def test_bench_writes_report(tmp_path, capsys):
    # [TRIVIAL] interface contract
    out = tmp_path / "report.json"
    code, stdout, _ = run(["bench", "--scenario", "micro-fig2.json", "--agent", "despot",
                           "--agent", "always-ra", "--episodes", "1000", "--seed", "7",
                           "--out", str(out)], capsys)
    assert code == EXIT_OK and stdout == ""
    doc = json.loads(out.read_text())
    assert [a["agent"] for a in doc["agents"]] == ["despot", "always-ra"]
    assert all(a["episodes"] == 1000 for a in doc["agents"])


def test_bench_keep_episodes_mean(tmp_path, capsys):
    # [TRIVIAL] report integrity through the CLI
    code, out, _ = run(["bench", "--scenario", "micro-fig2", "--agent", "threshold-surgical",
                        "--episodes", "25", "--keep-episodes"], capsys)
    assert code == EXIT_OK
    agent = json.loads(out)["agents"][0]
    assert sum(agent["totals"]) / 25 == pytest.approx(agent["mean"], abs=0)


def test_bench_csv(capsys):
    # [TRIVIAL]
    code, out, _ = run(["bench", "--scenario", "micro-basic", "--agent", "always-ra",
                        "--episodes", "3", "--format", "csv"], capsys)
    assert code == EXIT_OK
    assert out.splitlines()[0] == "agent,episodes,mean,stderr,ci_lo,ci_hi,mean_len,terminal_rate"


def test_run_fig4_json(capsys):
    # [TRIVIAL] episode trace on stdout
    code, out, _ = run(["run", "--scenario", "fig4-fusion.json", "--agent", "despot",
                        "--format", "json"], capsys)
    assert code == EXIT_OK
    trace = json.loads(out)
    assert trace["agent"] == "despot"
    assert trace["termination"] in ("terminal", "stepCap")
    assert trace["steps"][0]["step_index"] == 0


def test_planner_flags_reach_the_planner(capsys):
    # [TRIVIAL] a one-step lookahead from 1000 surgically resets
    code, out, _ = run(["run", "--scenario", "micro-basic", "--agent", "despot", "--max-depth",
                        "1", "--scenarios-k", "20", "--budget-expansions", "10", "--macro", "off",
                        "--format", "csv", "--max-steps", "3", "--discount", "0.9"], capsys)
    assert code == EXIT_OK
    assert len(out.splitlines()) == 4


def test_policy_graph_dot(capsys):
    # [TRIVIAL]
    code, out, _ = run(["policy-graph", "--scenario", "micro-fig2", "--horizon", "2"], capsys)
    assert code == EXIT_OK
    assert out.startswith("digraph policy {") and out.rstrip().endswith("}")


def test_policy_graph_truncation_warns(capsys):
    # [TRIVIAL]
    code, out, err = run(["policy-graph", "--scenario", "micro-fig2", "--max-nodes", "2",
                          "--format", "json"], capsys)
    assert code == EXIT_OK
    assert json.loads(out)["truncated"] is True
    assert "truncated" in err


def test_risk_command(capsys):
    # [TRIVIAL]
    code, out, _ = run(["risk", "--scenario", "fig4-fusion", "--agent", "always-nop",
                        "--episodes", "10"], capsys)
    assert code == EXIT_OK
    doc = json.loads(out)
    assert doc["episodes"] == 10 and doc["total"] > 0
    code, _, _ = run(["risk", "--scenario", "micro-basic"], capsys)
    assert code == EXIT_USAGE


def test_module_entry_point(tmp_path):
    # [TRIVIAL] python -m works as a subprocess
    proc = subprocess.run([sys.executable, "-m", "cyberpomdp", "exact", "--scenario",
                           "micro-basic", "--belief", "1000", "--horizon", "1"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    assert proc.stdout == "value -20\naction Rm1\n"
