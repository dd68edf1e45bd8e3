"""Program dependence graph and slicing.

Nodes are instructions. Edge kinds:

* ``data-local``: reaching definitions of local variables within a function;
* ``data-memory``: memory SSA use-def links, with phis resolved to the real
  writers behind them and may-writes chained to the writes they do not kill;
* ``control``: intra-procedural control dependence from post-dominators;
* ``call``, ``param``, ``return``: inter-procedural links at call sites
  (site to callee entry, site to uses of the parameters it binds, callee
  ``ret`` back to the site).
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..graphs import immediate_dominators, tarjan_scc
from ..ir import Function, InstrId, PointerModule, build_cfg
from ..query import AnalysisResult
from .memssa import MemDef, MemorySSAForm

EDGE_KINDS = ("data-local", "data-memory", "control", "call", "param", "return")

EXIT = InstrId("", "<exit>", -1)


@dataclass(frozen=True)
class PDG:
    nodes: tuple[InstrId, ...]
    edges: frozenset[tuple[InstrId, InstrId, str]]

    def edges_of(self, kind: str) -> list[tuple[InstrId, InstrId]]:
        return sorted((a, b) for a, b, k in self.edges if k == kind)

    def succ(self, n: InstrId) -> list[InstrId]:
        return sorted({b for a, b, _ in self.edges if a == n})

    def pred(self, n: InstrId) -> list[InstrId]:
        return sorted({a for a, b, _ in self.edges if b == n})


# -- control dependence --------------------------------------------------------


def augmented_exit_graph(nodes: list, succ: dict) -> dict:
    """``succ`` plus a virtual ``EXIT``: exits lead to it, and so does one
    node of every terminal SCC that would otherwise never reach it."""
    aug = {n: list(succ[n]) for n in nodes}
    for n in nodes:
        if not succ[n]:
            aug[n].append(EXIT)
    aug[EXIT] = []
    comps = tarjan_scc(nodes, lambda v: [w for w in aug[v] if w != EXIT])
    for comp in comps:
        cs = set(comp)
        leaves = all(w in cs for v in comp for w in aug[v] if w != EXIT)
        if leaves and not any(EXIT in aug[v] for v in comp):
            aug[max(comp)].append(EXIT)
    return aug


def postdominators(nodes: list, succ: dict) -> dict:
    """Immediate post-dominators over the exit-augmented graph (EXIT maps to itself)."""
    aug = augmented_exit_graph(nodes, succ)
    pred: dict = {n: [] for n in aug}
    for a, ss in aug.items():
        for b in ss:
            pred[b].append(a)
    return immediate_dominators(list(aug), EXIT, lambda n: aug[n], lambda n: pred[n])


def control_dependences(nodes: list, succ: dict) -> set[tuple]:
    """(branch, dependent) pairs; only nodes with two or more real successors branch."""
    ipdom = postdominators(nodes, succ)
    out = set()
    for a in nodes:
        targets = list(dict.fromkeys(succ[a]))
        if len(targets) < 2:
            continue
        stop = ipdom[a]
        for b in targets:
            runner = b
            while runner != stop and runner != EXIT:
                out.add((a, runner))
                runner = ipdom[runner]
    return out


# -- reaching definitions ------------------------------------------------------


def _reaching_defs(f: Function, cfg) -> dict[InstrId, dict[str, set]]:
    """Per instruction: variable -> defining iids (or ``("param", p)``) reaching it."""
    instrs = {i.iid: i for i in f.instructions()}
    entry_state = {p: {("param", p)} for p in f.params}
    rd_in: dict[InstrId, dict[str, frozenset]] = {}
    work = deque([cfg.entry])
    rd_in[cfg.entry] = {v: frozenset(s) for v, s in entry_state.items()}
    queued = {cfg.entry}
    while work:
        n = work.popleft()
        queued.discard(n)
        state = rd_in[n]
        ins = instrs[n]
        if ins.dest is not None:
            state = {**state, ins.dest: frozenset((n,))}
        for s in cfg.succ[n]:
            old = rd_in.get(s)
            if old is None:
                new = dict(state)
            else:
                new = dict(old)
                for v, ds in state.items():
                    if not ds <= new.get(v, frozenset()):
                        new[v] = new.get(v, frozenset()) | ds
                if new == old:
                    continue
            rd_in[s] = new
            if s not in queued:
                queued.add(s)
                work.append(s)
    return rd_in


# -- construction --------------------------------------------------------------


def _writers(ssa: MemorySSAForm, d: MemDef) -> list[MemDef]:
    """Non-phi defs standing behind ``d``."""
    return ssa.phi_sources(d)


def build_pdg(m: PointerModule, ssa: MemorySSAForm, r: AnalysisResult) -> PDG:
    funcs = {f.name: f for f in m.functions}
    cfgs = {f.name: build_cfg(f) for f in m.functions}
    edges: set[tuple[InstrId, InstrId, str]] = set()
    nodes: list[InstrId] = []
    cg = r.call_graph
    call_sites: dict[str, list[InstrId]] = {}
    for f in m.functions:
        for ins in f.instructions():
            if ins.op in ("call", "icall"):
                for g in cg.get(ins.iid, ()):
                    call_sites.setdefault(g, []).append(ins.iid)

    for f in m.functions:
        cfg = cfgs[f.name]
        nodes.extend(cfg.nodes)
        rd = _reaching_defs(f, cfg)
        for ins in f.instructions():
            reaching = rd.get(ins.iid)
            if reaching is None:
                continue  # unreachable
            for v in dict.fromkeys(ins.operands):
                for d in reaching.get(v, ()):
                    if isinstance(d, tuple) and d and d[0] == "param":
                        for site in call_sites.get(f.name, ()):
                            edges.add((site, ins.iid, "param"))
                    else:
                        edges.add((d, ins.iid, "data-local"))
        for a, b in control_dependences(list(cfg.nodes), cfg.succ):
            edges.add((a, b, "control"))

    def memory_sources(d: MemDef) -> list[InstrId]:
        out = []
        for w in _writers(ssa, d):
            if w.kind == "chi":
                out.append(w.site)
            else:  # entry version: whatever the callers had in memory
                out.extend(call_sites.get(w.function, ()))
        return out

    for (iid, _o), d in ssa.mu.items():
        for src in memory_sources(d):
            edges.add((src, iid, "data-memory"))
    for (iid, _o), (_new, prior) in ssa.chi.items():
        # a may-write leaves older values in place
        for src in memory_sources(prior):
            edges.add((src, iid, "data-memory"))
    # callee writes reaching a call site's chi
    for (iid, o), _ in ssa.chi.items():
        ins = m.instruction(iid)
        if ins.op not in ("call", "icall"):
            continue
        for g in cg.get(iid, ()):
            for j in funcs[g].instructions():
                if (j.iid, o) in ssa.chi:
                    edges.add((j.iid, iid, "data-memory"))

    for f in m.functions:
        for ins in f.instructions():
            if ins.op not in ("call", "icall"):
                continue
            for g in sorted(cg.get(ins.iid, ())):
                edges.add((ins.iid, cfgs[g].entry, "call"))
                for x in cfgs[g].exits():
                    edges.add((x, ins.iid, "return"))
    return PDG(tuple(nodes), frozenset(edges))


def slice_pdg(pdg: PDG, seed, direction: str = "backward") -> frozenset[InstrId]:
    """Instructions reachable from ``seed`` (one iid or several) along PDG edges."""
    if direction not in ("backward", "forward"):
        raise ValueError("direction must be 'backward' or 'forward'")
    seeds = [seed] if isinstance(seed, InstrId) else list(seed)
    adj: dict[InstrId, list[InstrId]] = {}
    for a, b, _ in pdg.edges:
        if direction == "forward":
            adj.setdefault(a, []).append(b)
        else:
            adj.setdefault(b, []).append(a)
    seen = set(seeds)
    stack = list(seeds)
    while stack:
        for w in adj.get(stack.pop(), ()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return frozenset(seen)
