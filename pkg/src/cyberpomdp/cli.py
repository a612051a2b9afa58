"""Command-line entry point: run, bench, exact, policy-graph and risk subcommands.

Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import ConfigError, PomdpError
from .harness import (
    ScenarioConfig,
    benchmark,
    build_model,
    initial_belief,
    load_scenario,
    parse_belief,
    run_episode,
)

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    """argparse that reports problems with exit code 1 instead of 2."""

    def error(self, message: str):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _u64(text: str) -> int:
    value = int(text, 0)
    if not 0 <= value < 1 << 64:
        raise argparse.ArgumentTypeError("seed must fit in 64 unsigned bits")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def _common(sub: argparse.ArgumentParser, planner: bool = True) -> None:
    sub.add_argument("--scenario", required=True, help="scenario JSON path or bundled name")
    sub.add_argument("--seed", type=_u64, help="master seed (defaults to the scenario's)")
    sub.add_argument("--discount", type=float, help="override the domain discount factor")
    sub.add_argument("--out", help="write the primary output here instead of stdout")
    if not planner:
        return
    budget = sub.add_mutually_exclusive_group()
    budget.add_argument("--budget-expansions", type=_positive)
    budget.add_argument("--budget-ms", type=_positive)
    sub.add_argument("--scenarios-k", type=_positive)
    sub.add_argument("--max-depth", type=_positive)
    sub.add_argument("--macro", type=_on_off, metavar="on|off")
    sub.add_argument("--max-steps", type=_positive, help="episode step cap")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cyberpomdp", description="Online POMDP planning for cyber response.")
    subs = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    run = subs.add_parser("run", help="play one episode and print its trace")
    _common(run)
    run.add_argument("--agent", default=None)
    run.add_argument("--format", choices=("json", "csv"), default="json")

    bench = subs.add_parser("bench", help="benchmark agents over seeded episodes")
    _common(bench)
    bench.add_argument("--agent", action="append", dest="agents")
    bench.add_argument("--episodes", type=_positive)
    bench.add_argument("--format", choices=("json", "csv"), default="json")
    bench.add_argument("--keep-episodes", action="store_true",
                       help="include per-episode totals in the JSON report")

    exact = subs.add_parser("exact", help="exact finite-horizon value of a belief")
    _common(exact, planner=False)
    exact.add_argument("--belief", help="state string such as 1000, or a JSON object")
    exact.add_argument("--horizon", type=int, required=True)
    exact.add_argument("--format", choices=("text", "json"), default="text")

    graph = subs.add_parser("policy-graph", help="extract the reachable policy graph")
    _common(graph)
    graph.add_argument("--agent", default="exact",
                       help="'exact' (receding-horizon oracle) or any benchmark agent")
    graph.add_argument("--belief")
    graph.add_argument("--horizon", type=int, default=3, help="oracle lookahead")
    graph.add_argument("--max-nodes", type=_positive, default=500)
    graph.add_argument("--format", choices=("dot", "json"), default="dot")

    risk = subs.add_parser("risk", help="Monte-Carlo mission risk of an agent")
    _common(risk)
    risk.add_argument("--agent", default=None)
    risk.add_argument("--episodes", type=_positive)
    risk.add_argument("--format", choices=("json", "csv"), default="json")
    return parser


def _planner_overrides(args) -> dict:
    return {
        "budget_expansions": args.budget_expansions,
        "budget_ms": args.budget_ms,
        "scenarios": args.scenarios_k,
        "max_depth": args.max_depth,
        "macro": args.macro,
    }


def _apply_budget_choice(cfg: ScenarioConfig, args) -> None:
    # choosing one budget kind on the command line drops the other from the file
    if args.budget_ms is not None:
        cfg.planner.pop("budgetExpansions", None)
    if args.budget_expansions is not None:
        cfg.planner.pop("budgetMs", None)


def _belief(model, cfg: ScenarioConfig, text: str | None):
    if text is None:
        return initial_belief(model, cfg)
    stripped = text.strip()
    if stripped.startswith("{"):
        try:
            return parse_belief(model, json.loads(stripped))
        except json.JSONDecodeError as err:
            raise ConfigError(f"bad belief JSON: {err}") from None
    return parse_belief(model, stripped)


def _agent(name: str, model, cfg: ScenarioConfig, args):
    from .planner import make_agent

    pcfg = cfg.planner_config(**_planner_overrides(args))
    if name in ("despot", "pomcp"):
        pcfg.check_budget()
    return make_agent(name, model, pcfg, cfg.evaluation.get("policyParams"))


def _default_agent(cfg: ScenarioConfig) -> str:
    agents = cfg.evaluation.get("agents") or ["despot"]
    return agents[0]


def _cmd_run(args, cfg: ScenarioConfig) -> str:
    model = build_model(cfg, args.discount)
    agent = _agent(args.agent or _default_agent(cfg), model, cfg, args)
    seed = args.seed if args.seed is not None else cfg.evaluation.get("seed", 0)
    max_steps = args.max_steps or cfg.evaluation.get("maxSteps", 100)
    trace = run_episode(model, agent, seed, max_steps, initial_belief(model, cfg),
                        cfg.evaluation.get("filter", "exact"),
                        cfg.evaluation.get("particles", 10_000))
    return trace.to_json() if args.format == "json" else trace.to_csv()


def _cmd_bench(args, cfg: ScenarioConfig) -> str:
    report = benchmark(cfg, args.agents, args.episodes, args.seed, args.keep_episodes,
                       args.discount, _planner_overrides(args), args.max_steps)
    return report.to_json(args.keep_episodes) if args.format == "json" else report.to_csv()


def _cmd_exact(args, cfg: ScenarioConfig) -> str:
    from .oracle import exact_value

    if args.horizon < 0:
        raise ConfigError("--horizon must be >= 0")
    model = build_model(cfg, args.discount)
    belief = _belief(model, cfg, args.belief)
    value, action = exact_value(belief, model, args.horizon)
    name = model.action_name(action)
    if args.format == "json":
        return json.dumps({"value": value, "action": name, "horizon": args.horizon},
                          sort_keys=True) + "\n"
    return f"value {value:.10g}\naction {name}\n"


def _cmd_policy_graph(args, cfg: ScenarioConfig) -> str:
    from .oracle import OracleAgent, emit_dot, extract_policy_graph

    model = build_model(cfg, args.discount)
    belief = _belief(model, cfg, args.belief)
    if args.agent == "exact":
        agent = OracleAgent(model, args.horizon)
    else:
        agent = _agent(args.agent, model, cfg, args)
    graph = extract_policy_graph(model, agent, belief, args.max_nodes)
    if graph.truncated:
        print(f"warning: graph truncated at {args.max_nodes} nodes", file=sys.stderr)
    if args.format == "json":
        return json.dumps(graph.to_dict(), indent=2, sort_keys=True) + "\n"
    return emit_dot(graph)


def _cmd_risk(args, cfg: ScenarioConfig) -> str:
    from .csg.risk import risk_score

    if cfg.domain != "csg":
        raise ConfigError("risk needs a csg scenario")
    model = build_model(cfg, args.discount)
    agent = _agent(args.agent or _default_agent(cfg), model, cfg, args)
    episodes = args.episodes or cfg.evaluation.get("episodes", 100)
    seed = args.seed if args.seed is not None else cfg.evaluation.get("seed", 0)
    report = risk_score(model, agent, episodes, seed,
                        args.max_steps or cfg.evaluation.get("maxSteps"),
                        initial_belief(model, cfg))
    if args.format == "json":
        return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"
    rows = ["asset,effect,probability,mean_loss,risk"]
    rows += [f"{i.asset},{i.effect},{i.probability!r},{i.mean_loss!r},{i.risk!r}"
             for i in report.incidents]
    rows.append(f"TOTAL,,,,{report.total!r}")
    return "\n".join(rows) + "\n"


COMMANDS = {
    "run": _cmd_run,
    "bench": _cmd_bench,
    "exact": _cmd_exact,
    "policy-graph": _cmd_policy_graph,
    "risk": _cmd_risk,
}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_scenario(args.scenario)
        if hasattr(args, "budget_ms"):
            _apply_budget_choice(cfg, args)
        text = COMMANDS[args.command](args, cfg)
    except ConfigError as err:
        print(f"cyberpomdp: configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except (PomdpError, ValueError, OSError) as err:
        print(f"cyberpomdp: {type(err).__name__}: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    try:
        if args.out:
            Path(args.out).write_text(text)
        else:
            sys.stdout.write(text)
    except OSError as err:
        print(f"cyberpomdp: cannot write output: {err}", file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
