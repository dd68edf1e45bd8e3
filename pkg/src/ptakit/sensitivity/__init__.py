"""Context-sensitive, flow-sensitive and combined analyses."""

from .flow import FlowLimitError, FlowSolution, State, project_flow, solve_flow_sensitive, solve_fscs
from .kcfa import CloneLimitError, ContextStats, ContextualSolution, extend, project_ci, solve_kcfa

__all__ = [
    "CloneLimitError",
    "ContextStats",
    "ContextualSolution",
    "FlowLimitError",
    "FlowSolution",
    "State",
    "extend",
    "project_ci",
    "project_flow",
    "solve_fscs",
    "solve_flow_sensitive",
    "solve_kcfa",
]
