"""Flow-sensitive points-to analysis, optionally with call-string contexts.

The analysis keeps a dense state before (IN) and after (OUT) every
instruction of every procedure, where a procedure is a (function, context)
pair. With ``k == 0`` every function has the single empty context and the
analysis is plain flow-sensitive; with ``k > 0`` functions are cloned ahead
of time along the context-insensitive call graph and heap objects carry the
allocating context.

A state maps local variables and memory cells to sets of locations; a
location is ``object_index * (max_field + 1) + field``. ``None`` is the
unreachable state (every path to the point traps or diverges).
"""

from __future__ import annotations

import time
from collections import deque
from dataclasses import dataclass, field
from typing import NamedTuple

from ..andersen import solve
from ..andersen.solver import PointsToSolution, SolverStats
from ..constraints import ObjectId, generate
from ..ir import MAX_FIELD, InstrId, PointerModule, build_cfg, cyclic_blocks
from .kcfa import DEFAULT_CLONE_CAP, CloneLimitError, Context, ContextStats, extend

DEFAULT_MAX_STEPS = 10**7

EMPTY: frozenset[int] = frozenset()
Proc = tuple  # (function name, context)


class State(NamedTuple):
    vars: dict[str, frozenset[int]]
    mem: dict[int, frozenset[int]]


class FlowLimitError(RuntimeError):
    def __init__(self, message: str, steps: int):
        super().__init__(message)
        self.steps = steps


def _join_maps(a: dict, b: dict) -> dict | None:
    """a ∪ b pointwise, or None if b adds nothing to a."""
    out = None
    for key, sb in b.items():
        sa = a.get(key)
        if sa is None:
            if not sb:
                continue
            merged = sb
        elif sb <= sa:
            continue
        else:
            merged = sa | sb
        if out is None:
            out = dict(a)
        out[key] = merged
    return out


def join(a: State | None, b: State | None) -> tuple[State | None, bool]:
    if b is None:
        return a, False
    if a is None:
        return b, True
    v = _join_maps(a.vars, b.vars)
    mm = _join_maps(a.mem, b.mem)
    if v is None and mm is None:
        return a, False
    return State(a.vars if v is None else v, a.mem if mm is None else mm), True


@dataclass(frozen=True)
class FlowSolution:
    k: int
    objects: tuple[ObjectId, ...]
    max_field: int
    ins: dict[tuple[Proc, InstrId], State | None]
    outs: dict[tuple[Proc, InstrId], State | None]
    contexts: dict[str, tuple[Context, ...]]
    call_graph: dict[tuple[InstrId, Context], frozenset[tuple[str, Context]]]
    strong_updatable: frozenset[ObjectId]
    stats: ContextStats = field(compare=False)
    strong_updates: bool = True

    # -- location helpers ----------------------------------------------------
    def location(self, loc: int) -> tuple[ObjectId, int]:
        width = self.max_field + 1
        return self.objects[loc // width], loc % width

    def _states(self, iid: InstrId, phase: str, ctx: Context | None):
        table = self.ins if phase == "in" else self.outs
        for c in self.contexts.get(iid.function, ()):
            if ctx is not None and c != ctx:
                continue
            st = table.get(((iid.function, c), iid))
            if st is not None:
                yield st

    def var_at(self, iid: InstrId, var: str, phase: str = "in", ctx: Context | None = None) -> frozenset[int]:
        """Locations ``var`` may hold at ``iid`` (union over contexts unless ``ctx`` is given)."""
        out: set[int] = set()
        for st in self._states(iid, phase, ctx):
            out |= st.vars.get(var, EMPTY)
        return frozenset(out)

    def cell_at(self, iid: InstrId, loc: int, phase: str = "in", ctx: Context | None = None) -> frozenset[int]:
        out: set[int] = set()
        for st in self._states(iid, phase, ctx):
            out |= st.mem.get(loc, EMPTY)
        return frozenset(out)

    def var_union(self, function: str, var: str) -> frozenset[int]:
        """Union over every point and context of ``function``."""
        out: set[int] = set()
        for table in (self.ins, self.outs):
            for ((fn, _ctx), _iid), st in table.items():
                if fn == function and st is not None:
                    out |= st.vars.get(var, EMPTY)
        return frozenset(out)

    def reachable(self, iid: InstrId) -> bool:
        return any(True for _ in self._states(iid, "in", None))


class _Engine:
    def __init__(self, m: PointerModule, k: int, max_field: int, clone_cap: int, max_steps: int, strong_updates: bool):
        self.m = m
        self.k = k
        self.width = max_field + 1
        self.max_field = max_field
        self.max_steps = max_steps
        self.strong_updates = strong_updates
        self.funcs = {f.name: f for f in m.functions}
        self.instr = {ins.iid: ins for ins in m.instructions()}
        self.succ: dict[InstrId, tuple[InstrId, ...]] = {}
        self.entry: dict[str, InstrId] = {}
        for f in m.functions:
            cfg = build_cfg(f)
            self.succ.update(cfg.succ)
            self.entry[f.name] = cfg.entry
        self.stats = ContextStats()
        self.objects: list[ObjectId] = []
        self.obj_index: dict[ObjectId, int] = {}
        for g in m.globals:
            self._object(ObjectId("global", g.name))
        for f in m.functions:
            self._object(ObjectId("function", f.name))
        ci = solve(generate(m, max_field=max_field))
        self.ci_calls = ci.call_graph
        self.procs = self._enumerate(clone_cap)
        self.strong_sites = _once_executed_sites(m, ci.call_graph)
        self.ins: dict[tuple[Proc, InstrId], State | None] = {}
        self.outs: dict[tuple[Proc, InstrId], State | None] = {}
        self.exits: dict[Proc, tuple[frozenset[int], dict[int, frozenset[int]]]] = {}
        self.callers: dict[Proc, set[tuple[Proc, InstrId]]] = {}
        self.call_graph: dict[tuple[InstrId, Context], set[tuple[str, Context]]] = {}

    # -- setup ---------------------------------------------------------------
    def _object(self, obj: ObjectId) -> int:
        idx = self.obj_index.get(obj)
        if idx is None:
            idx = len(self.objects)
            self.objects.append(obj)
            self.obj_index[obj] = idx
        return idx

    def _enumerate(self, cap: int) -> set[Proc]:
        """Reachable (function, context) clones along the context-insensitive call graph."""
        root = (self.m.entry, ())
        procs = {root}
        stack = [root]
        while stack:
            fn, ctx = stack.pop()
            for ins in self.funcs[fn].instructions():
                if ins.op not in ("call", "icall"):
                    continue
                for callee in sorted(self.ci_calls.get(ins.iid, ())):
                    q = (callee, extend(ctx, ins.iid, self.k))
                    if q not in procs:
                        procs.add(q)
                        self.stats.clones = len(procs)
                        if len(procs) > cap:
                            raise CloneLimitError(f"context clone cap {cap} exceeded", self.stats)
                        stack.append(q)
        self.stats.clones = len(procs)
        return procs

    def strong(self, loc: int) -> bool:
        if not self.strong_updates:
            return False
        obj = self.objects[loc // self.width]
        if obj.kind != "alloc":
            return True
        return obj.site in self.strong_sites

    def field_of(self, loc: int, offset: int) -> int:
        f = loc % self.width + offset
        return loc - loc % self.width + (f if f <= self.max_field else 0)

    # -- transfer ------------------------------------------------------------
    def transfer(self, proc: Proc, ins, st: State) -> State | None:
        op = ins.op
        vars_ = st.vars
        if op == "alloc":
            obj = self._object(ObjectId("alloc", ins.symbol, ins.iid, proc[1]))
            self.stats.heap_objects = sum(1 for o in self.objects if o.kind == "alloc")
            return State({**vars_, ins.dest: frozenset((obj * self.width,))}, st.mem)
        if op == "addr":
            kind = "function" if ins.symbol in self.funcs else "global"
            obj = self.obj_index[ObjectId(kind, ins.symbol)]
            return State({**vars_, ins.dest: frozenset((obj * self.width,))}, st.mem)
        if op == "copy":
            return State({**vars_, ins.dest: vars_.get(ins.operands[0], EMPTY)}, st.mem)
        if op == "load":
            ptrs = vars_.get(ins.operands[0], EMPTY)
            if not ptrs:
                return None
            mem = st.mem
            val: set[int] = set()
            for loc in ptrs:
                val |= mem.get(loc, EMPTY)
            return State({**vars_, ins.dest: frozenset(val)}, mem)
        if op == "store":
            v, p = ins.operands
            ptrs = vars_.get(p, EMPTY)
            if not ptrs:
                return None
            val = vars_.get(v, EMPTY)
            mem = dict(st.mem)
            if len(ptrs) == 1 and self.strong(next(iter(ptrs))):
                (loc,) = ptrs
                if val:
                    mem[loc] = val
                else:
                    mem.pop(loc, None)
            else:
                for loc in ptrs:
                    old = mem.get(loc, EMPTY)
                    mem[loc] = old | val
            return State(vars_, mem)
        if op == "field":
            ptrs = vars_.get(ins.operands[0], EMPTY)
            if not ptrs:
                return None
            return State({**vars_, ins.dest: frozenset(self.field_of(l, ins.offset) for l in ptrs)}, st.mem)
        return st  # br

    def callees(self, proc: Proc, ins, st: State) -> list[Proc]:
        if ins.op == "call":
            names = [ins.symbol]
        else:
            names = []
            nargs = len(ins.args)
            for loc in sorted(st.vars.get(ins.operands[0], EMPTY)):
                if loc % self.width:
                    continue
                obj = self.objects[loc // self.width]
                if obj.kind == "function" and len(self.funcs[obj.name].params) == nargs:
                    names.append(obj.name)
        out = []
        for fn in names:
            q = (fn, extend(proc[1], ins.iid, self.k))
            if q in self.procs:
                out.append(q)
        return out

    def call_out(self, callees: list[Proc], ins, st: State) -> State | None:
        ret: set[int] = set()
        mem = None
        for q in callees:
            ex = self.exits.get(q)
            if ex is None:
                continue
            ret |= ex[0]
            mem = dict(ex[1]) if mem is None else (_join_maps(mem, ex[1]) or mem)
        if mem is None:
            return None
        return State({**st.vars, ins.dest: frozenset(ret)}, mem)

    # -- fixpoint ------------------------------------------------------------
    def run(self) -> None:
        work: deque[tuple[Proc, InstrId]] = deque()
        queued: set[tuple[Proc, InstrId]] = set()

        def push(point):
            if point not in queued:
                queued.add(point)
                work.append(point)

        def flow_into(point, st):
            new, changed = join(self.ins.get(point), st)
            if changed:
                self.ins[point] = new
                push(point)

        root = (self.m.entry, ())
        flow_into((root, self.entry[self.m.entry]), State({}, {}))
        steps = 0
        while work:
            point = work.popleft()
            queued.discard(point)
            steps += 1
            if steps > self.max_steps:
                raise FlowLimitError(f"flow iteration cap {self.max_steps} exceeded", steps)
            proc, iid = point
            st = self.ins.get(point)
            if st is None:
                continue
            ins = self.instr[iid]
            if ins.op in ("call", "icall"):
                qs = self.callees(proc, ins, st)
                if qs:
                    self.call_graph.setdefault((iid, proc[1]), set()).update(qs)
                for q in qs:
                    f = self.funcs[q[0]]
                    entry_vars = {p: st.vars.get(a, EMPTY) for p, a in zip(f.params, ins.args)}
                    self.callers.setdefault(q, set()).add(point)
                    flow_into((q, self.entry[q[0]]), State(entry_vars, st.mem))
                out = self.call_out(qs, ins, st)
            elif ins.op == "ret":
                out = st
                ret = st.vars.get(ins.operands[0], EMPTY) if ins.operands else EMPTY
                old = self.exits.get(proc)
                if old is None:
                    self.exits[proc] = (ret, st.mem)
                    grown = True
                else:
                    mm = _join_maps(old[1], st.mem)
                    grown = mm is not None or not ret <= old[0]
                    if grown:
                        self.exits[proc] = (old[0] | ret, old[1] if mm is None else mm)
                if grown:
                    for caller in self.callers.get(proc, ()):
                        push(caller)
            else:
                out = self.transfer(proc, ins, st)
            prev = self.outs.get(point)
            self.outs[point] = out
            if out is None or ins.op == "ret":
                continue
            if prev is not None and out == prev:
                continue
            for s in self.succ[iid]:
                flow_into((proc, s), out)
        self.steps = steps


def _once_executed_sites(m: PointerModule, call_graph: dict[InstrId, frozenset[str]]) -> frozenset[InstrId]:
    """Allocation sites that execute at most once in any run.

    A site qualifies if its block is on no CFG cycle and its function runs
    at most once: it is the entry function and is never called, or it has
    exactly one call site, that site's block is acyclic, and the caller
    runs at most once.
    """
    sites_of: dict[str, list[InstrId]] = {f.name: [] for f in m.functions}
    for site, callees in call_graph.items():
        for fn in callees:
            sites_of[fn].append(site)
    cyclic = {f.name: cyclic_blocks(f) for f in m.functions}
    once: set[str] = set()
    if not sites_of.get(m.entry):
        once.add(m.entry)
    changed = True
    while changed:
        changed = False
        for f in m.functions:
            if f.name in once or f.name == m.entry:
                continue
            sites = sites_of[f.name]
            if len(sites) != 1:
                continue
            site = sites[0]
            if site.function in once and site.block not in cyclic[site.function] and site.function != f.name:
                once.add(f.name)
                changed = True
    out = set()
    for f in m.functions:
        if f.name not in once:
            continue
        for ins in f.instructions():
            if ins.op == "alloc" and ins.iid.block not in cyclic[f.name]:
                out.add(ins.iid)
    return frozenset(out)


def _solve(m: PointerModule, k: int, *, max_field: int, clone_cap: int, max_steps: int, strong_updates: bool) -> FlowSolution:
    t0 = time.perf_counter()
    eng = _Engine(m, k, max_field, clone_cap, max_steps, strong_updates)
    eng.run()
    eng.stats.heap_objects = sum(1 for o in eng.objects if o.kind == "alloc")
    eng.stats.solver = SolverStats(iterations=eng.steps)
    eng.stats.millis = (time.perf_counter() - t0) * 1000.0
    contexts: dict[str, list[Context]] = {}
    for fn, ctx in eng.procs:
        contexts.setdefault(fn, []).append(ctx)
    strong = frozenset(o for o in eng.objects if o.kind != "alloc" or o.site in eng.strong_sites) if strong_updates else frozenset()
    return FlowSolution(
        k=k,
        objects=tuple(eng.objects),
        max_field=max_field,
        ins=eng.ins,
        outs=eng.outs,
        contexts={fn: tuple(sorted(c, key=lambda c: tuple(map(str, c)))) for fn, c in contexts.items()},
        call_graph={key: frozenset(v) for key, v in eng.call_graph.items()},
        strong_updatable=strong,
        stats=eng.stats,
        strong_updates=strong_updates,
    )


def solve_flow_sensitive(
    m: PointerModule,
    *,
    max_field: int = MAX_FIELD,
    max_steps: int = DEFAULT_MAX_STEPS,
    strong_updates: bool = True,
) -> FlowSolution:
    return _solve(m, 0, max_field=max_field, clone_cap=DEFAULT_CLONE_CAP, max_steps=max_steps, strong_updates=strong_updates)


def solve_fscs(
    m: PointerModule,
    k: int,
    *,
    max_field: int = MAX_FIELD,
    clone_cap: int = DEFAULT_CLONE_CAP,
    max_steps: int = DEFAULT_MAX_STEPS,
    strong_updates: bool = True,
) -> FlowSolution:
    if k < 0:
        raise ValueError("k must be non-negative")
    return _solve(m, k, max_field=max_field, clone_cap=clone_cap, max_steps=max_steps, strong_updates=strong_updates)


def project_flow(sol: FlowSolution, m: PointerModule) -> PointsToSolution:
    """Union over every point and context, keyed like ``generate(m)``."""
    sys = generate(m, max_field=sol.max_field)
    ci_obj = {(o.kind, o.name): i for i, o in enumerate(sys.objects)}
    width = sol.max_field + 1
    to_ci = [sys.obj_base[ci_obj[(o.kind, o.name)]] for o in sol.objects]

    def ci_loc(loc: int) -> int:
        return to_ci[loc // width] + loc % width

    acc: dict[int, set[int]] = {}
    for table in (sol.ins, sol.outs):
        for ((fn, _ctx), _iid), st in table.items():
            if st is None:
                continue
            for v, locs in st.vars.items():
                if locs:
                    acc.setdefault(sys.var_node[(fn, v)], set()).update(ci_loc(x) for x in locs)
            for cell, locs in st.mem.items():
                if locs:
                    acc.setdefault(ci_loc(cell), set()).update(ci_loc(x) for x in locs)
    cg: dict[InstrId, set[str]] = {}
    for (site, _ctx), callees in sol.call_graph.items():
        cg.setdefault(site, set()).update(fn for fn, _ in callees)
    stats = SolverStats(iterations=sol.stats.solver.iterations, millis=sol.stats.millis)
    return PointsToSolution(
        sys,
        tuple(range(sys.num_nodes)),
        {n: tuple(sorted(s)) for n, s in acc.items()},
        {s: frozenset(v) for s, v in cg.items()},
        stats,
    )
