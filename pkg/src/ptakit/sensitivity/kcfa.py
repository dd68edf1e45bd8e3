"""k-limited call-string context sensitivity by on-the-fly cloning.

A clone is a (function, context) pair, the context being the last ``k``
call sites on the call string. Clones and heap objects (an allocation site
paired with the allocating clone's context) are created while the solver
runs, as call edges are discovered.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import NamedTuple

from ..andersen.solver import (
    ConstraintGraph,
    Offline,
    OnlineCycles,
    PointsToSolution,
    SolverConfig,
    SolverStats,
)
from ..constraints import ObjectId, generate
from ..andersen import solve
from ..ir import MAX_FIELD, InstrId, PointerModule

log = logging.getLogger(__name__)

DEFAULT_CLONE_CAP = 10**6
# naive propagation is quadratic once heap cloning multiplies the objects
KCFA_CONFIG = SolverConfig(strategy="wave", backend="bitvec")
Context = tuple  # tuple[InstrId, ...], most recent call site last


class CloneLimitError(RuntimeError):
    def __init__(self, message: str, stats: "ContextStats"):
        super().__init__(message)
        self.stats = stats


@dataclass
class ContextStats:
    clones: int = 0
    heap_objects: int = 0
    solver: SolverStats = field(default_factory=SolverStats)
    millis: float = 0.0


def extend(ctx: Context, site: InstrId, k: int) -> Context:
    """Context of a callee invoked at ``site`` from a caller in ``ctx``."""
    if k == 0:
        return ()
    return (ctx + (site,))[-k:]


class _CallRecord(NamedTuple):
    site: InstrId
    caller_ctx: Context
    args: tuple[int, ...]
    dest: int | None


@dataclass(frozen=True)
class ContextualSolution:
    k: int
    objects: tuple[ObjectId, ...]
    obj_base: tuple[int, ...]
    var_node: dict[tuple[str, Context, str], int]
    ret_node: dict[tuple[str, Context], int]
    rep: tuple[int, ...]
    sets: dict[int, tuple[int, ...]]
    loc_info: dict[int, tuple[int, int]]
    contexts: dict[str, tuple[Context, ...]]
    call_graph: dict[tuple[InstrId, Context], frozenset[tuple[str, Context]]]
    stats: ContextStats = field(compare=False)
    max_field: int = MAX_FIELD

    def _keys(self, node: int) -> tuple[int, ...]:
        return self.sets.get(self.rep[node], ())

    def locations(self, node: int) -> list[tuple[ObjectId, int]]:
        out = []
        for loc in self._keys(node):
            obj, f = self.loc_info[loc]
            out.append((self.objects[obj], f))
        return out

    def pts(self, function: str, var: str, ctx: Context = ()) -> list[tuple[ObjectId, int]]:
        """(object, field) pairs of ``var`` in clone (function, ctx)."""
        node = self.var_node.get((function, ctx, var))
        return [] if node is None else self.locations(node)

    def cell_pts(self, obj: ObjectId, fld: int) -> list[tuple[ObjectId, int]]:
        idx = self.objects.index(obj)
        return self.locations(self.obj_base[idx] + fld)


class _KCFAHost:
    def __init__(self, m: PointerModule, k: int, cfg: SolverConfig, cap: int, max_field: int):
        self.m = m
        self.k = k
        self.cap = cap
        self.max_field = max_field
        self.funcs = {f.name: f for f in m.functions}
        self.stats = ContextStats()
        self.g = ConstraintGraph(cfg, self)
        self.objects: list[ObjectId] = []
        self.obj_base: list[int] = []
        self.obj_index: dict[ObjectId, int] = {}
        self.loc_info: dict[int, tuple[int, int]] = {}
        self.var_node: dict[tuple[str, Context, str], int] = {}
        self.ret_node: dict[tuple[str, Context], int] = {}
        self.params: dict[tuple[str, Context], tuple[int, ...]] = {}
        self.pending: list[tuple[str, Context]] = []
        self.call_graph: dict[tuple[InstrId, Context], set[tuple[str, Context]]] = {}
        self.resolved: set[tuple[_CallRecord, str]] = set()
        for gdecl in m.globals:
            self._object(ObjectId("global", gdecl.name))
        for f in m.functions:
            self._object(ObjectId("function", f.name))

    # -- tables --------------------------------------------------------------
    def _object(self, obj: ObjectId) -> int:
        idx = self.obj_index.get(obj)
        if idx is not None:
            return idx
        idx = len(self.objects)
        self.objects.append(obj)
        self.obj_index[obj] = idx
        base = self.g.new_nodes(self.max_field + 1)
        self.obj_base.append(base)
        for f in range(self.max_field + 1):
            self.loc_info[base + f] = (idx, f)
        if obj.kind == "alloc":
            self.stats.heap_objects += 1
            self._check_cap()
        return idx

    def _check_cap(self) -> None:
        if self.stats.clones + self.stats.heap_objects > self.cap:
            raise CloneLimitError(f"context clone cap {self.cap} exceeded", self.stats)

    def clone(self, fn: str, ctx: Context) -> None:
        if (fn, ctx) in self.ret_node:
            return
        f = self.funcs[fn]
        self.stats.clones += 1
        self._check_cap()
        names = f.variables()
        first = self.g.new_nodes(len(names) + 1)
        for i, v in enumerate(names):
            self.var_node[(fn, ctx, v)] = first + i
        self.ret_node[(fn, ctx)] = first + len(names)
        self.params[(fn, ctx)] = tuple(self.var_node[(fn, ctx, p)] for p in f.params)
        self.pending.append((fn, ctx))

    def drain(self) -> None:
        while self.pending:
            fn, ctx = self.pending.pop()
            self._emit(fn, ctx)

    def _emit(self, fn: str, ctx: Context) -> None:
        g = self.g
        var = lambda v: self.var_node[(fn, ctx, v)]  # noqa: E731
        for ins in self.funcs[fn].instructions():
            op = ins.op
            if op == "alloc":
                obj = self._object(ObjectId("alloc", ins.symbol, ins.iid, ctx))
                g.addr(var(ins.dest), self.obj_base[obj])
            elif op == "addr":
                kind = "function" if ins.symbol in self.funcs else "global"
                g.addr(var(ins.dest), self.obj_base[self.obj_index[ObjectId(kind, ins.symbol)]])
            elif op == "copy":
                g.copy(var(ins.dest), var(ins.operands[0]))
            elif op == "load":
                g.load(var(ins.dest), var(ins.operands[0]))
            elif op == "store":
                v, p = ins.operands
                g.store(var(p), var(v))
            elif op == "field":
                g.field(var(ins.dest), var(ins.operands[0]), ins.offset)
            elif op == "call":
                callee_ctx = extend(ctx, ins.iid, self.k)
                self.clone(ins.symbol, callee_ctx)
                self.call_graph.setdefault((ins.iid, ctx), set()).add((ins.symbol, callee_ctx))
                for p, a in zip(self.params[(ins.symbol, callee_ctx)], ins.args):
                    g.copy(p, var(a))
                g.copy(var(ins.dest), self.ret_node[(ins.symbol, callee_ctx)])
            elif op == "icall":
                rec = _CallRecord(ins.iid, ctx, tuple(var(a) for a in ins.args), var(ins.dest))
                g.icall(var(ins.operands[0]), rec)
            elif op == "ret" and ins.operands:
                g.copy(self.ret_node[(fn, ctx)], var(ins.operands[0]))

    # -- host protocol -------------------------------------------------------
    def field_of(self, loc: int, offset: int) -> int:
        obj, f = self.loc_info[loc]
        f += offset
        return self.obj_base[obj] + (f if f <= self.max_field else 0)

    def function_of_location(self, loc: int) -> str | None:
        info = self.loc_info.get(loc)
        if info is None or info[1] != 0:
            return None
        obj = self.objects[info[0]]
        return obj.name if obj.kind == "function" else None

    def arity_ok(self, rec: _CallRecord, fn: str) -> bool:
        return len(self.funcs[fn].params) == len(rec.args)

    def resolve(self, rec: _CallRecord, fn: str) -> list[tuple[int, int]]:
        if (rec, fn) in self.resolved:
            return []
        self.resolved.add((rec, fn))
        if not self.arity_ok(rec, fn):
            log.warning("icall at %s: @%s arity mismatch; ignored", rec.site, fn)
            return []
        callee_ctx = extend(rec.caller_ctx, rec.site, self.k)
        self.clone(fn, callee_ctx)
        self.call_graph.setdefault((rec.site, rec.caller_ctx), set()).add((fn, callee_ctx))
        pairs = list(zip(self.params[(fn, callee_ctx)], rec.args))
        if rec.dest is not None:
            pairs.append((rec.dest, self.ret_node[(fn, callee_ctx)]))
        self.drain()
        return pairs


def _roots(m: PointerModule) -> list[str]:
    """Entry plus every function a context-insensitive pass finds unreachable from it."""
    ci = solve(generate(m))
    edges: dict[str, set[str]] = {}
    for site, callees in ci.call_graph.items():
        edges.setdefault(site.function, set()).update(callees)
    seen = {m.entry}
    stack = [m.entry]
    while stack:
        for g in edges.get(stack.pop(), ()):
            if g not in seen:
                seen.add(g)
                stack.append(g)
    return [m.entry] + [f.name for f in m.functions if f.name not in seen]


def solve_kcfa(
    m: PointerModule,
    k: int,
    base: SolverConfig = KCFA_CONFIG,
    *,
    clone_cap: int = DEFAULT_CLONE_CAP,
    max_field: int = MAX_FIELD,
) -> ContextualSolution:
    if k < 0:
        raise ValueError("k must be non-negative")
    if base.offline is not Offline.NONE or base.hcd:
        # offline merging and HCD tables are computed over a fixed constraint set
        cycles = OnlineCycles.LCD if base.lcd else OnlineCycles.NONE
        base = SolverConfig(Offline.NONE, cycles, base.strategy, base.worklist, base.backend, base.max_props, base.topo_refresh)
    t0 = time.perf_counter()
    host = _KCFAHost(m, k, base, clone_cap, max_field)
    for fn in _roots(m):
        host.clone(fn, ())
    host.drain()
    host.g.solve()
    g = host.g
    n = len(g.parent)
    rep = tuple(g.find(i) for i in range(n))
    sets = {r: tuple(g.pts[r]) for r in set(rep) if g.pts[r]}
    contexts: dict[str, list[Context]] = {}
    for fn, ctx in host.ret_node:
        contexts.setdefault(fn, []).append(ctx)
    host.stats.solver = g.stats
    host.stats.millis = (time.perf_counter() - t0) * 1000.0
    return ContextualSolution(
        k=k,
        objects=tuple(host.objects),
        obj_base=tuple(host.obj_base),
        var_node=dict(host.var_node),
        ret_node=dict(host.ret_node),
        rep=rep,
        sets=sets,
        loc_info=dict(host.loc_info),
        contexts={fn: tuple(sorted(c, key=lambda c: tuple(map(str, c)))) for fn, c in contexts.items()},
        call_graph={key: frozenset(v) for key, v in host.call_graph.items()},
        stats=host.stats,
        max_field=max_field,
    )


def project_ci(sol: ContextualSolution, m: PointerModule) -> PointsToSolution:
    """Union over contexts with allocation contexts dropped, keyed like ``generate(m)``."""
    sys = generate(m, max_field=sol.max_field)
    ci_obj = {(o.kind, o.name): i for i, o in enumerate(sys.objects)}

    def ci_loc(loc: int) -> int:
        obj, f = sol.loc_info[loc]
        o = sol.objects[obj]
        return sys.obj_base[ci_obj[(o.kind, o.name)]] + f

    acc: dict[int, set[int]] = {}

    def add(ci_node: int, node: int) -> None:
        keys = sol.sets.get(sol.rep[node])
        if keys:
            acc.setdefault(ci_node, set()).update(ci_loc(x) for x in keys)

    for (fn, _ctx, v), node in sol.var_node.items():
        add(sys.var_node[(fn, v)], node)
    for (fn, _ctx), node in sol.ret_node.items():
        add(sys.fn_ret[fn], node)
    for loc in sol.loc_info:
        add(ci_loc(loc), loc)
    cg: dict[InstrId, set[str]] = {}
    for (site, _ctx), callees in sol.call_graph.items():
        cg.setdefault(site, set()).update(fn for fn, _ in callees)
    stats = SolverStats(**sol.stats.solver.deterministic(), millis=sol.stats.millis)
    return PointsToSolution(
        sys,
        tuple(range(sys.num_nodes)),
        {n: tuple(sorted(s)) for n, s in acc.items()},
        {s: frozenset(v) for s, v in cg.items()},
        stats,
    )
