"""Collective-construction planning toolkit: a reversible-ramp planner,
a strict plan validator/simulator, and a benchmark harness."""

from .core import Action, GridSpec, Instance, WorldState
from .planner import PlanResult, multi_agent_reramp, plan_single
from .validator import MultiPlan, Metrics, ViolationReport, reverse_plan, validate_plan

__all__ = [
    "Action",
    "GridSpec",
    "Instance",
    "WorldState",
    "MultiPlan",
    "Metrics",
    "ViolationReport",
    "PlanResult",
    "multi_agent_reramp",
    "plan_single",
    "reverse_plan",
    "validate_plan",
]

__version__ = "0.1.0"
