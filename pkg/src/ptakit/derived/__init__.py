"""Representations derived from a points-to result: ICFG, memory SSA, PDG."""

from .dot import icfg_dot, pdg_dot, to_dot
from .icfg import ICFG, build_icfg
from .memssa import MemDef, MemorySSAForm, build_memory_ssa, memory_def_of
from .pdg import EDGE_KINDS, EXIT, PDG, build_pdg, control_dependences, postdominators, slice_pdg

slice = slice_pdg

__all__ = [
    "EDGE_KINDS",
    "EXIT",
    "ICFG",
    "MemDef",
    "MemorySSAForm",
    "PDG",
    "build_icfg",
    "build_memory_ssa",
    "build_pdg",
    "control_dependences",
    "icfg_dot",
    "memory_def_of",
    "pdg_dot",
    "postdominators",
    "slice",
    "slice_pdg",
    "to_dot",
]
