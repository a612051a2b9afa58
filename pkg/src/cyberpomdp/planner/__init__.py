"""Online planners: DESPOT search, the POMCP baseline, macro-actions and fixed baselines."""

from .bounds import default_policy_rollout, hindsight_upper_bound
from .despot import Despot, PlannerConfig, SearchResult, plan
from .macro import MacroModel, macro_wrap
from .policies import Agent, fixed_policy, make_agent
from .pomcp import Pomcp, pomcp_plan

__all__ = [
    "Agent", "Despot", "MacroModel", "PlannerConfig", "Pomcp", "SearchResult",
    "default_policy_rollout", "fixed_policy", "hindsight_upper_bound", "macro_wrap",
    "make_agent", "plan", "pomcp_plan",
]
