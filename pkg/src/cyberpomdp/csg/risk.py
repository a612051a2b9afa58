"""Monte-Carlo mission risk: incident probability times attributed loss, summed over incident classes."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from ..rng import derive_seed
from .sim import CsgModel, CsgState, corrupted_assets, mission_reward


@dataclass
class IncidentRisk:
    asset: str
    effect: str
    probability: float      # fraction of episodes in which the incident occurred
    mean_loss: float        # mean attributed loss over those episodes
    risk: float             # probability * mean_loss


@dataclass
class RiskReport:
    total: float
    stderr: float | None
    episodes: int
    incidents: list[IncidentRisk] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "total": self.total, "stderr": self.stderr, "episodes": self.episodes,
            "incidents": [vars(i) for i in self.incidents],
        }


def _culprits(state: CsgState, model: CsgModel) -> list[tuple[str, str]]:
    """Incidents that touch a mission-required asset through a disabling or degrading effect."""
    mission = model.mission
    corrupt = corrupted_assets(state, mission)
    out = set()
    for act in mission.activities:
        for a, e, _ in state.effects:
            if a in act.required_assets and (e in act.disabling_effects or e == "Degradation"):
                out.add((a, e))
    if not out:
        # loss carried only by propagated corruption: blame the modified sources
        out = {(a, e) for a, e, _ in state.effects if e == "Modification" and a in corrupt}
    return sorted(out)


def risk_score(model: CsgModel, agent, episodes: int, seed: int, max_steps: int | None = None,
               belief=None) -> RiskReport:
    """Per-step loss is the shortfall of mission reward below full value.

    Each step's loss is split evenly among the incidents responsible for it;
    an incident class's risk is its summed attributed loss over all episodes
    divided by the episode count, so the classes add up to the mean loss.
    """
    from ..harness import run_episode

    if episodes < 1:
        raise ValueError("episodes must be >= 1")
    full = model.mission.full_value
    steps_cap = max_steps or model.max_steps
    loss_by_class: dict = {}
    occurred: dict = {}
    totals = []
    for e in range(episodes):
        trace = run_episode(model, agent, derive_seed(seed, e), steps_cap, belief)
        episode_loss = 0.0
        seen = set()
        for state in trace.states:
            for a, eff, _ in state.effects:
                seen.add((a, eff))
            loss = full - mission_reward(state, model.mission)
            if loss <= 0.0:
                continue
            episode_loss += loss
            culprits = _culprits(state, model)
            share = loss / len(culprits) if culprits else 0.0
            for c in culprits:
                loss_by_class[c] = loss_by_class.get(c, 0.0) + share
        for c in seen:
            occurred[c] = occurred.get(c, 0) + 1
        totals.append(episode_loss)
    mean = math.fsum(totals) / episodes
    stderr = None
    if episodes > 1:
        var = math.fsum((x - mean) ** 2 for x in totals) / (episodes - 1)
        stderr = math.sqrt(var / episodes)
    incidents = []
    for (asset, effect), loss in sorted(loss_by_class.items()):
        n = occurred.get((asset, effect), 0)
        prob = n / episodes
        mean_loss = loss / n if n else 0.0
        incidents.append(IncidentRisk(asset, effect, prob, mean_loss, prob * mean_loss))
    return RiskReport(mean, stderr, episodes, incidents)
