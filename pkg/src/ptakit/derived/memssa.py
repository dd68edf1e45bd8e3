"""Memory SSA over abstract objects.

Each function gets its own SSA web per object. Loads carry ``mu`` (may
read) annotations, stores carry ``chi`` (may write, creates a new version),
and call sites carry both, summarizing everything their transitive callees
read and write. Phis go on the iterated dominance frontier of each object's
definitions. Version 0 of every object is the state on function entry.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

from ..graphs import dominance_frontiers, immediate_dominators
from ..ir import Function, InstrId, PointerModule
from ..query import AnalysisResult, mod_ref


class MemDef(NamedTuple):
    function: str
    obj: str
    version: int
    kind: str  # "entry" | "chi" | "phi"
    site: InstrId | None  # the writing instruction for chi
    block: str

    def __str__(self) -> str:
        where = str(self.site) if self.site is not None else f"{self.function}:{self.block}"
        return f"{self.obj}_{self.version}<{self.kind} {where}>"


@dataclass(frozen=True)
class MemorySSAForm:
    mu: dict[tuple[InstrId, str], MemDef]  # (reader, object) -> reaching def
    chi: dict[tuple[InstrId, str], tuple[MemDef, MemDef]]  # (writer, object) -> (new def, prior def)
    phi: dict[MemDef, tuple[tuple[str, MemDef], ...]]  # phi def -> (pred block, incoming def)
    defs: tuple[MemDef, ...]

    def mu_objects(self, iid: InstrId) -> list[str]:
        return sorted(o for (i, o) in self.mu if i == iid)

    def chi_objects(self, iid: InstrId) -> list[str]:
        return sorted(o for (i, o) in self.chi if i == iid)

    def may_defs(self, d: MemDef) -> list[MemDef]:
        """Every def ``d`` may stand for: itself, through phi operands and past may-writes."""
        seen = {d}
        stack = [d]
        while stack:
            x = stack.pop()
            nxt: list[MemDef] = []
            if x.kind == "phi":
                nxt = [p for _, p in self.phi[x]]
            elif x.kind == "chi":
                nxt = [self.chi[(x.site, x.obj)][1]]
            for y in nxt:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return sorted(seen)

    def phi_sources(self, d: MemDef) -> list[MemDef]:
        """Non-phi defs reachable from ``d`` through phi operands only."""
        seen = {d}
        out = set()
        stack = [d]
        while stack:
            x = stack.pop()
            if x.kind != "phi":
                out.add(x)
                continue
            for _, y in self.phi[x]:
                if y not in seen:
                    seen.add(y)
                    stack.append(y)
        return sorted(out)


def _block_graph(f: Function):
    succ = {b.label: list(dict.fromkeys(b.instructions[-1].targets)) if b.instructions[-1].op == "br" else [] for b in f.blocks}
    pred: dict[str, list[str]] = {b.label: [] for b in f.blocks}
    for b, ss in succ.items():
        for s in ss:
            if b not in pred[s]:
                pred[s].append(b)
    return succ, pred


def _build_function(f: Function, effects: dict[InstrId, tuple[frozenset, frozenset]], out: MemorySSAForm) -> None:
    succ, pred = _block_graph(f)
    labels = [b.label for b in f.blocks]
    entry = labels[0]
    idom = immediate_dominators(labels, entry, lambda b: pred[b], lambda b: succ[b])
    df = dominance_frontiers(labels, idom, lambda b: pred[b])
    blocks = {b.label: b for b in f.blocks}

    objects: set[str] = set()
    def_blocks: dict[str, set[str]] = {}
    for b in f.blocks:
        for ins in b.instructions:
            reads, writes = effects.get(ins.iid, (frozenset(), frozenset()))
            objects |= reads | writes
            for o in writes:
                def_blocks.setdefault(o, set()).add(b.label)
    if not objects:
        return

    counter: dict[str, int] = {}
    defs: list[MemDef] = []

    def new_def(o: str, kind: str, site: InstrId | None, block: str) -> MemDef:
        v = counter.get(o, 0)
        counter[o] = v + 1
        d = MemDef(f.name, o, v, kind, site, block)
        defs.append(d)
        return d

    initial = {o: new_def(o, "entry", None, entry) for o in sorted(objects)}

    # phi placement on the iterated dominance frontier of every object's defs
    phi_at: dict[str, list[str]] = {lbl: [] for lbl in labels}
    for o in sorted(def_blocks):
        work = [b for b in sorted(def_blocks[o]) if b in idom]
        placed: set[str] = set()
        while work:
            b = work.pop()
            for y in sorted(df.get(b, ())):
                if y not in placed:
                    placed.add(y)
                    phi_at[y].append(o)
                    work.append(y)
    phi_def: dict[tuple[str, str], MemDef] = {}
    operands: dict[MemDef, list[tuple[str, MemDef]]] = {}

    children: dict[str, list[str]] = {lbl: [] for lbl in labels}
    for b, d in idom.items():
        if b != entry:
            children[d].append(b)

    stacks: dict[str, list[MemDef]] = {o: [initial[o]] for o in objects}

    def visit_block(lbl: str) -> list[str]:
        pushed = []
        for o in phi_at[lbl]:
            d = new_def(o, "phi", None, lbl)
            phi_def[(lbl, o)] = d
            operands[d] = []
            stacks[o].append(d)
            pushed.append(o)
        for ins in blocks[lbl].instructions:
            reads, writes = effects.get(ins.iid, (frozenset(), frozenset()))
            for o in sorted(reads):
                out.mu[(ins.iid, o)] = stacks[o][-1]
            for o in sorted(writes):
                d = new_def(o, "chi", ins.iid, lbl)
                out.chi[(ins.iid, o)] = (d, stacks[o][-1])
                stacks[o].append(d)
                pushed.append(o)
        for s in succ[lbl]:
            for o in phi_at[s]:
                pd = phi_def.get((s, o))
                if pd is None:  # successor not visited yet; record after creation
                    pending.append((s, o, lbl, stacks[o][-1]))
                else:
                    operands[pd].append((lbl, stacks[o][-1]))
        return pushed

    pending: list[tuple[str, str, str, MemDef]] = []
    # iterative dominator-tree walk (preorder; pops on exit)
    stack: list[tuple[str, bool]] = [(entry, False)]
    pushed_by: dict[str, list[str]] = {}
    while stack:
        lbl, done = stack.pop()
        if done:
            for o in pushed_by.pop(lbl):
                stacks[o].pop()
            continue
        pushed_by[lbl] = visit_block(lbl)
        stack.append((lbl, True))
        for c in reversed(children[lbl]):
            stack.append((c, False))
    for s, o, lbl, d in pending:
        operands[phi_def[(s, o)]].append((lbl, d))

    # blocks unreachable from entry see only the entry state
    for lbl in labels:
        if lbl in idom:
            continue
        for ins in blocks[lbl].instructions:
            reads, writes = effects.get(ins.iid, (frozenset(), frozenset()))
            for o in sorted(reads):
                out.mu[(ins.iid, o)] = initial[o]
            for o in sorted(writes):
                d = new_def(o, "chi", ins.iid, lbl)
                out.chi[(ins.iid, o)] = (d, initial[o])

    for d, ops in operands.items():
        out.phi[d] = tuple(sorted(ops))
    out.defs.extend(defs)  # type: ignore[attr-defined]


def build_memory_ssa(m: PointerModule, r: AnalysisResult) -> MemorySSAForm:
    effects = {}
    for ins in m.instructions():
        if ins.op in ("load", "store", "call", "icall"):
            mr = mod_ref(r, ins.iid)
            if mr.reads or mr.writes:
                effects[ins.iid] = (mr.reads, mr.writes)
    form = MemorySSAForm({}, {}, {}, [])  # type: ignore[arg-type]
    for f in m.functions:
        _build_function(f, effects, form)
    return MemorySSAForm(form.mu, form.chi, form.phi, tuple(form.defs))


def memory_def_of(ssa: MemorySSAForm, iid: InstrId, obj: str) -> MemDef:
    """The def linked to the ``mu`` of ``obj`` at ``iid``."""
    try:
        return ssa.mu[(iid, obj)]
    except KeyError:
        raise KeyError(f"{iid} has no mu for object {obj}") from None
