"""Exact finite-horizon expectimax and policy-graph extraction for small domains."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

from .belief import ExactBelief, predict
from .core import GenerativeModel, observation_alphabet
from .errors import HorizonTooDeep, Unenumerable

DEFAULT_HORIZON_CAP = 4
TIE_TOL = 1e-9
_MASS_EPS = 1e-15


class ExactSolver:
    """Expectimax over the full belief tree of an enumerable model.

    Beliefs are restricted to non-terminal states; terminal mass contributes
    nothing beyond the step that enters it. Values are memoized per
    (horizon, belief) for the lifetime of the solver.
    """

    def __init__(self, model: GenerativeModel, horizon_cap: int = DEFAULT_HORIZON_CAP):
        if not (model.enumerable and model.supports_observation_prob):
            raise Unenumerable(f"{type(model).__name__} is not enumerable")
        self.model = model
        self.horizon_cap = horizon_cap
        self.gamma = model.spec.discount
        self.n_actions = model.spec.action_count
        self.observations = list(observation_alphabet(model))
        self.states = [s for s in model.enumerate_states() if not model.is_terminal(s)]
        index = {s: i for i, s in enumerate(self.states)}
        n = len(self.states)
        self._index = index
        self._trans = []     # per action: row-sparse list of (j, p) per i
        self._reward = []    # per action: expected immediate reward per i
        self._obs = []       # per action: per z, likelihood per non-terminal j
        for a in range(self.n_actions):
            rows, rew = [], []
            for s in self.states:
                row: dict[int, float] = {}
                er = 0.0
                for s2, p, r in model.transition_distribution(s, a):
                    er += p * r
                    j = index.get(s2)
                    if j is not None:
                        row[j] = row.get(j, 0.0) + p
                rows.append(tuple(row.items()))
                rew.append(er)
            self._trans.append(rows)
            self._reward.append(tuple(rew))
            self._obs.append([
                tuple(model.observation_prob(s2, a, z) for s2 in self.states)
                for z in self.observations
            ])
        self._n = n
        self._memo: dict = {}

    def vector(self, belief) -> tuple[float, ...]:
        """Non-terminal part of a belief as a dense vector (may sum to < 1)."""
        vec = [0.0] * self._n
        for s, p in belief.items():
            i = self._index.get(s)
            if i is not None:
                vec[i] += p
        return tuple(vec)

    def value(self, belief, horizon: int) -> tuple[float, int]:
        if horizon < 0:
            raise ValueError("horizon must be non-negative")
        if horizon > self.horizon_cap:
            raise HorizonTooDeep(f"horizon {horizon} exceeds cap {self.horizon_cap}")
        vec = self.vector(belief)
        mass = sum(vec)
        if horizon == 0 or mass <= _MASS_EPS:
            return 0.0, 0
        v, a = self._solve(tuple(x / mass for x in vec), horizon)
        return mass * v, a

    def q_values(self, belief, horizon: int) -> list[float]:
        vec = self.vector(belief)
        return [self._q(vec, a, horizon) for a in range(self.n_actions)]

    def _q(self, b: tuple[float, ...], a: int, h: int) -> float:
        rew = self._reward[a]
        val = sum(p * r for p, r in zip(b, rew))
        if h <= 1:
            return val
        pred = [0.0] * self._n
        for i, p in enumerate(b):
            if p:
                for j, q in self._trans[a][i]:
                    pred[j] += p * q
        g = self.gamma
        for lik in self._obs[a]:
            bz = [x * y for x, y in zip(pred, lik)]
            mass = sum(bz)
            if mass <= _MASS_EPS:
                continue
            v, _ = self._solve(tuple(x / mass for x in bz), h - 1)
            val += g * mass * v
        return val

    def _solve(self, b: tuple[float, ...], h: int) -> tuple[float, int]:
        key = (h, tuple(round(x, 12) for x in b))
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        best, best_a = -math.inf, 0
        for a in range(self.n_actions):
            q = self._q(b, a, h)
            if q > best + TIE_TOL:
                best, best_a = q, a
        self._memo[key] = (best, best_a)
        return best, best_a


def exact_value(belief, model: GenerativeModel, horizon: int,
                horizon_cap: int = DEFAULT_HORIZON_CAP) -> tuple[float, int]:
    """Optimal expected discounted reward over ``horizon`` steps and the maximizing action.

    Ties go to the lowest action id; horizon 0 gives ``(0.0, 0)``.
    """
    if horizon > horizon_cap:
        raise HorizonTooDeep(f"horizon {horizon} exceeds cap {horizon_cap}")
    return ExactSolver(model, horizon_cap).value(belief, horizon)


class OracleAgent:
    """Deterministic belief -> action mapping backed by a receding-horizon exact solver."""

    def __init__(self, model: GenerativeModel, horizon: int, horizon_cap: int | None = None):
        self.name = f"exact-h{horizon}"
        self.horizon = horizon
        self.solver = ExactSolver(model, max(horizon, horizon_cap or DEFAULT_HORIZON_CAP))

    def act(self, belief) -> int:
        return self.solver.value(belief, self.horizon)[1]

    __call__ = act


# ---------------------------------------------------------------------------
# Policy graphs

TERMINAL_LABEL = "terminal"


@dataclass
class PolicyNode:
    node_id: int
    state: str
    prob: float
    action: str
    belief: dict = field(repr=False, default_factory=dict)


@dataclass
class PolicyEdge:
    src: int
    dst: int
    observation: str
    prob: float


@dataclass
class PolicyGraph:
    nodes: list[PolicyNode] = field(default_factory=list)
    edges: list[PolicyEdge] = field(default_factory=list)
    truncated: bool = False

    def out_edges(self, node_id: int) -> list[PolicyEdge]:
        return [e for e in self.edges if e.src == node_id]

    def to_dict(self) -> dict:
        return {
            "nodes": [
                {"id": n.node_id, "state": n.state, "prob": n.prob, "action": n.action}
                for n in self.nodes
            ],
            "edges": [
                {"from": e.src, "to": e.dst, "observation": e.observation, "prob": e.prob}
                for e in self.edges
            ],
            "truncated": self.truncated,
        }


def _linf(a: dict, b: dict) -> float:
    return max(abs(a.get(s, 0.0) - b.get(s, 0.0)) for s in set(a) | set(b))


def extract_policy_graph(model: GenerativeModel, agent: Callable, initial_belief,
                         max_nodes: int = 500, merge_tol: float = 1e-6) -> PolicyGraph:
    """Breadth-first closure of the beliefs reachable under ``agent``.

    Beliefs within ``merge_tol`` in L-infinity share a node. Entering a
    terminal state leads to a single absorbing sink node. When ``max_nodes``
    is reached, the remaining successors are dropped and ``truncated`` is set.
    """
    act = agent.act if hasattr(agent, "act") else agent
    graph = PolicyGraph()
    beliefs: list[dict] = []
    sink_id: int | None = None

    def add_node(belief: ExactBelief) -> int | None:
        probs = belief.as_dict()
        for i, other in enumerate(beliefs):
            if _linf(probs, other) <= merge_tol:
                return i
        if len(graph.nodes) >= max_nodes:
            graph.truncated = True
            return None
        state, p = belief.most_likely()
        node = PolicyNode(len(graph.nodes), model.state_label(state), p, "", probs)
        graph.nodes.append(node)
        beliefs.append(probs)
        queue.append((node.node_id, belief))
        return node.node_id

    def sink() -> int | None:
        nonlocal sink_id
        if sink_id is None:
            if len(graph.nodes) >= max_nodes:
                graph.truncated = True
                return None
            sink_id = len(graph.nodes)
            graph.nodes.append(PolicyNode(sink_id, TERMINAL_LABEL, 1.0, "-"))
            beliefs.append({TERMINAL_LABEL: 1.0})
            graph.edges.append(PolicyEdge(sink_id, sink_id, "-", 1.0))
        return sink_id

    queue: list = []
    add_node(initial_belief if isinstance(initial_belief, ExactBelief)
             else ExactBelief.normalized(dict(initial_belief.items())))
    head = 0
    while head < len(queue):
        node_id, belief = queue[head]
        head += 1
        action = act(belief)
        graph.nodes[node_id].action = model.action_name(action)
        pred = predict(belief, action, model)
        term_mass = sum(p for s, p in pred.items() if model.is_terminal(s))
        for z in observation_alphabet(model):
            mass = sum(p * model.observation_prob(s, action, z)
                       for s, p in pred.items() if not model.is_terminal(s))
            if mass <= 1e-12:
                continue
            post = ExactBelief.normalized({
                s: p * model.observation_prob(s, action, z)
                for s, p in pred.items() if not model.is_terminal(s)
            })
            dst = add_node(post)
            if dst is not None:
                graph.edges.append(PolicyEdge(node_id, dst, model.observation_label(z), mass))
        if term_mass > 1e-12:
            dst = sink()
            if dst is not None:
                graph.edges.append(PolicyEdge(node_id, dst, TERMINAL_LABEL, term_mass))
    return graph


def emit_dot(graph: PolicyGraph, name: str = "policy") -> str:
    """Deterministic Graphviz rendering, nodes and edges ordered by id."""
    lines = [f"digraph {name} {{", "  rankdir=TB;", "  node [shape=box];"]
    for n in sorted(graph.nodes, key=lambda n: n.node_id):
        lines.append(f'  n{n.node_id} [label="{n.state} p={n.prob:.3f} / {n.action}"];')
    for e in sorted(graph.edges, key=lambda e: (e.src, e.dst, e.observation)):
        lines.append(f'  n{e.src} -> n{e.dst} [label="{e.observation} ({e.prob:.3f})"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

