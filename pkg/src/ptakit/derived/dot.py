"""Graphviz DOT text for derived graphs, sorted for golden comparisons."""

from __future__ import annotations

from typing import Iterable

from .icfg import ICFG
from .pdg import PDG


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def to_dot(name: str, nodes: Iterable, edges: Iterable[tuple]) -> str:
    lines = [f"digraph {_quote(name)} {{"]
    for n in sorted({str(n) for n in nodes}):
        lines.append(f"  {_quote(n)};")
    for a, b, kind in sorted((str(a), str(b), k) for a, b, k in edges):
        lines.append(f"  {_quote(a)} -> {_quote(b)} [label={_quote(kind)}];")
    lines.append("}")
    return "\n".join(lines) + "\n"


def icfg_dot(g: ICFG) -> str:
    return to_dot("icfg", g.nodes, g.edges())


def pdg_dot(g: PDG) -> str:
    return to_dot("pdg", g.nodes, g.edges)
