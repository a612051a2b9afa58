"""Anytime online POMDP planning for automated cyber response."""

from __future__ import annotations

from .belief import ExactBelief, ParticleBelief, belief_update
from .core import GenerativeModel, StepOutcome
from .errors import PomdpError
from .harness import benchmark, load_scenario, run_episode
from .micronet import MicroConfig, MicroNet
from .oracle import emit_dot, exact_value, extract_policy_graph
from .planner import Despot, PlannerConfig, plan
from .rng import RandomStream

__all__ = [
    "Despot", "ExactBelief", "GenerativeModel", "MicroConfig", "MicroNet", "ParticleBelief",
    "PlannerConfig", "PomdpError", "RandomStream", "StepOutcome", "belief_update", "benchmark",
    "emit_dot", "exact_value", "extract_policy_graph", "load_scenario", "plan", "run_episode",
]
