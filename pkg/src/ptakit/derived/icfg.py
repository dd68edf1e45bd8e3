"""Inter-procedural control-flow graph driven by a solved call graph."""

from __future__ import annotations

from dataclasses import dataclass

from ..graphs import reachable
from ..ir import InstrId, PointerModule, build_cfg
from ..query import AnalysisResult


@dataclass(frozen=True)
class ICFG:
    functions: tuple[str, ...]
    nodes: tuple[InstrId, ...]
    intra: dict[InstrId, tuple[InstrId, ...]]
    call_edges: tuple[tuple[InstrId, InstrId], ...]  # call site -> callee entry
    return_edges: tuple[tuple[InstrId, InstrId], ...]  # callee ret -> call-site successor
    call_targets: dict[InstrId, tuple[str, ...]]

    def edges(self) -> list[tuple[InstrId, InstrId, str]]:
        out = [(a, b, "intra") for a in self.nodes for b in self.intra[a]]
        out += [(a, b, "call") for a, b in self.call_edges]
        out += [(a, b, "return") for a, b in self.return_edges]
        return sorted(out)

    def succ(self, n: InstrId) -> list[InstrId]:
        out = list(self.intra.get(n, ()))
        out += [b for a, b in self.call_edges if a == n]
        out += [b for a, b in self.return_edges if a == n]
        return out


def build_icfg(m: PointerModule, r: AnalysisResult) -> ICFG:
    """Functions reachable from the entry through ``r``'s call graph, linked at call sites."""
    funcs = {f.name: f for f in m.functions}
    cg = r.call_graph

    def callees_of(fn: str) -> list[str]:
        out = []
        for ins in funcs[fn].instructions():
            if ins.op in ("call", "icall"):
                out.extend(sorted(cg.get(ins.iid, ())))
        return out

    live = reachable([m.entry], callees_of)
    order = tuple(f.name for f in m.functions if f.name in live)
    cfgs = {fn: build_cfg(funcs[fn]) for fn in order}
    nodes: list[InstrId] = []
    intra: dict[InstrId, tuple[InstrId, ...]] = {}
    for fn in order:
        nodes.extend(cfgs[fn].nodes)
        intra.update(cfgs[fn].succ)
    calls, rets, targets = [], [], {}
    for fn in order:
        for ins in funcs[fn].instructions():
            if ins.op not in ("call", "icall"):
                continue
            tgt = tuple(sorted(cg.get(ins.iid, ())))
            targets[ins.iid] = tgt
            after = InstrId(fn, ins.iid.block, ins.iid.index + 1)
            for g in tgt:
                calls.append((ins.iid, cfgs[g].entry))
                for x in cfgs[g].exits():
                    rets.append((x, after))
    return ICFG(order, tuple(nodes), intra, tuple(sorted(set(calls))), tuple(sorted(set(rets))), targets)
