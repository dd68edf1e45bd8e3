"""Subset-based (Andersen-style) points-to analysis with a configurable solver."""

from .offline import offline_hcd, offline_hu, offline_hvn
from .solver import (
    REFERENCE_CONFIG,
    ConstraintGraph,
    Offline,
    OnlineCycles,
    PointsToSolution,
    SolverConfig,
    SolverLimitError,
    SolverStats,
    Strategy,
    finalize,
    graph_for,
    prepare,
    propagate_deep,
    propagate_diff,
    propagate_wave,
    run_lcd_probe,
    scc_collapse,
    solve,
)
from .worklist import WorklistOrder, make_worklist, worklist_next

__all__ = [
    "REFERENCE_CONFIG",
    "ConstraintGraph",
    "Offline",
    "OnlineCycles",
    "PointsToSolution",
    "SolverConfig",
    "SolverLimitError",
    "SolverStats",
    "Strategy",
    "WorklistOrder",
    "finalize",
    "graph_for",
    "make_worklist",
    "offline_hcd",
    "offline_hu",
    "offline_hvn",
    "prepare",
    "propagate_deep",
    "propagate_diff",
    "propagate_wave",
    "run_lcd_probe",
    "scc_collapse",
    "solve",
    "worklist_next",
]
