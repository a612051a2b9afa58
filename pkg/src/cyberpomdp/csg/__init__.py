"""CSG-lite: cyber terrain, DIMFUI incidents, scripted attacker and mission impact."""

from .risk import RiskReport, risk_score
from .sim import CsgModel, CsgState, csg_observation, impacted_activities, mission_reward
from .terrain import EFFECT_NAMES, CsgConfig, Effect, load_terrain

__all__ = [
    "CsgConfig", "CsgModel", "CsgState", "EFFECT_NAMES", "Effect", "RiskReport",
    "csg_observation", "impacted_activities", "load_terrain", "mission_reward", "risk_score",
]
