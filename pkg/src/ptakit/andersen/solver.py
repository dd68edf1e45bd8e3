"""Inclusion-constraint solving over a dynamic constraint graph.

One :class:`ConstraintGraph` drives every configuration: the propagation
strategy (naive / diff / deep / wave), the online cycle detectors (LCD, HCD),
the worklist order and the points-to set backend are all switches on it.
Offline HVN/HU merges arrive as a pre-seeded union-find.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from enum import Enum
from typing import Callable, Iterable, Protocol

from ..constraints import ADDR, COPY, FIELD, LOAD, STORE, ConstraintSystem, IndirectCall, resolve_indirect_call
from ..graphs import tarjan_scc, topological_components
from ..ir import InstrId
from ..ptset import PointsToSet, SetBackendKind, make_set
from .offline import offline_hcd, offline_hu, offline_hvn
from .worklist import WorklistOrder, make_worklist


class Offline(str, Enum):
    NONE = "none"
    HVN = "hvn"
    HU = "hu"


class OnlineCycles(str, Enum):
    NONE = "none"
    LCD = "lcd"
    HCD = "hcd"
    BOTH = "both"


class Strategy(str, Enum):
    NAIVE = "naive"
    WAVE = "wave"
    DEEP = "deep"
    DIFF = "diff"


DEFAULT_MAX_PROPS = 10**7


@dataclass(frozen=True)
class SolverConfig:
    offline: Offline = Offline.NONE
    online_cycles: OnlineCycles = OnlineCycles.NONE
    strategy: Strategy = Strategy.NAIVE
    worklist: WorklistOrder = WorklistOrder.FIFO
    backend: SetBackendKind = SetBackendKind.SORTED_VECTOR
    max_props: int = DEFAULT_MAX_PROPS
    topo_refresh: int = 1024

    def __post_init__(self) -> None:
        object.__setattr__(self, "offline", Offline(self.offline))
        object.__setattr__(self, "online_cycles", OnlineCycles(self.online_cycles))
        object.__setattr__(self, "strategy", Strategy(self.strategy))
        object.__setattr__(self, "worklist", WorklistOrder(self.worklist))
        object.__setattr__(self, "backend", SetBackendKind(self.backend))

    @property
    def lcd(self) -> bool:
        return self.online_cycles in (OnlineCycles.LCD, OnlineCycles.BOTH)

    @property
    def hcd(self) -> bool:
        return self.online_cycles in (OnlineCycles.HCD, OnlineCycles.BOTH)

    def describe(self) -> dict[str, str | int]:
        return {
            "offline": self.offline.value,
            "cycles": self.online_cycles.value,
            "solver": self.strategy.value,
            "worklist": self.worklist.value,
            "pts": self.backend.value,
            "max_props": self.max_props,
        }

    def label(self) -> str:
        return "/".join(str(v) for k, v in self.describe().items() if k != "max_props")


REFERENCE_CONFIG = SolverConfig()


@dataclass
class SolverStats:
    iterations: int = 0
    propagations: int = 0
    collapsed: int = 0
    waves: int = 0
    offline_merged: int = 0
    graph_nodes: int = 0
    lcd_probes: int = 0
    millis: float = 0.0

    def as_lines(self) -> str:
        return ", ".join(f"{k}={v}" for k, v in self.deterministic().items()) + f", millis={self.millis:.3f}"

    def deterministic(self) -> dict[str, int]:
        d = asdict(self)
        d.pop("millis")
        return d


class SolverLimitError(RuntimeError):
    def __init__(self, message: str, stats: SolverStats):
        super().__init__(message)
        self.stats = stats


@dataclass(frozen=True)
class PointsToSolution:
    """Finalized node -> points-to set map plus the discovered call graph.

    ``rep`` maps every node of ``system`` to its representative and ``sets``
    holds the ascending key tuple of each representative.
    """

    system: ConstraintSystem
    rep: tuple[int, ...]
    sets: dict[int, tuple[int, ...]]
    call_graph: dict[InstrId, frozenset[str]]
    stats: SolverStats = field(compare=False)
    field_sensitive: bool = True

    def pts(self, node: int) -> tuple[int, ...]:
        return self.sets.get(self.rep[node], ())

    def var_pts(self, function: str, var: str) -> tuple[int, ...]:
        return self.pts(self.system.var_node[(function, var)])

    def expanded(self) -> tuple[tuple[int, ...], ...]:
        return tuple(self.pts(n) for n in range(len(self.rep)))

    def object_pts(self, node: int) -> frozenset[int]:
        """Points-to set at object granularity (object indices)."""
        nodes = self.system.nodes
        return frozenset(nodes[k].obj for k in self.pts(node))


class Host(Protocol):
    def field_of(self, loc: int, offset: int) -> int: ...
    def function_of_location(self, loc: int) -> str | None: ...
    def resolve(self, record: object, function: str) -> Iterable[tuple[int, int]]: ...


class ConstraintGraph:
    """Mutable solver state: union-find, copy edges, complex constraints, sets."""

    def __init__(self, cfg: SolverConfig, host: Host, hcd_table: dict[int, int] | None = None):
        self.cfg = cfg
        self.host = host
        self.stats = SolverStats()
        self.naive = cfg.strategy is Strategy.NAIVE
        self.parent: list[int] = []
        self.pts: list[PointsToSet | None] = []
        self.succ: list[set[int] | None] = []
        # complex constraints keyed by the rep they hang off
        self.loads: dict[int, list[int]] = {}
        self.stores: dict[int, list[int]] = {}
        self.fields: dict[int, list[tuple[int, int]]] = {}
        self.icalls: dict[int, list[object]] = {}
        self.hcd: dict[int, list[int]] = {n: [t] for n, t in (hcd_table or {}).items()}
        # last-seen snapshots for propagation / complex firing; absent = nothing seen
        self.ptok: dict[int, object] = {}
        self.ctok: dict[int, object] = {}
        self.probed: set[tuple[int, int]] = set()
        self.call_graph: dict[InstrId, set[str]] = {}
        self.wave_mode = cfg.strategy is Strategy.WAVE
        self.dirty = False
        self.worklist = None
        self._set_cls = type(make_set(cfg.backend))
        # bumped on every union; succ lists normalized at the current epoch are clean
        self._epoch = 0
        self._norm: list[int] = []
        if not self.wave_mode:
            self.worklist = make_worklist(cfg.worklist, self.topo_order, cfg.topo_refresh)

    # -- construction ------------------------------------------------------
    def new_node(self) -> int:
        return self.new_nodes(1)

    def new_nodes(self, count: int) -> int:
        first = len(self.parent)
        end = first + count
        cls = self._set_cls
        sets = [cls() for _ in range(count)]
        self._norm.extend([0] * count)
        self.parent.extend(range(first, end))
        self.pts.extend(sets)
        self.succ.extend([set() for _ in range(count)])
        return first

    def premerge(self, mapping: list[int]) -> None:
        for n, r in enumerate(mapping):
            if r != n:
                self.unite(self.find(r), self.find(n), reset=False)
        self.stats.offline_merged = sum(1 for n, r in enumerate(mapping) if r != n)
        self.stats.collapsed = 0

    def find(self, n: int) -> int:
        parent = self.parent
        root = n
        while parent[root] != root:
            root = parent[root]
        while parent[n] != root:
            parent[n], n = root, parent[n]
        return root

    def push(self, n: int) -> None:
        self.dirty = True
        if self.worklist is not None:
            self.worklist.push(n)

    def has_complex(self, n: int) -> bool:
        return n in self.loads or n in self.stores or n in self.fields or n in self.icalls or n in self.hcd

    # -- constraints (usable before and during solving) --------------------
    def addr(self, p: int, loc: int) -> None:
        r = self.find(p)
        if self.pts[r].insert(loc):
            self.push(r)

    def copy(self, dst: int, src: int) -> None:
        self.add_edge(self.find(src), self.find(dst))

    def load(self, dst: int, ptr: int) -> None:
        r = self.find(ptr)
        self.loads.setdefault(r, []).append(dst)
        for o in list(self.pts[r]):
            self.add_edge(self.find(o), self.find(dst))

    def store(self, ptr: int, src: int) -> None:
        r = self.find(ptr)
        self.stores.setdefault(r, []).append(src)
        for o in list(self.pts[r]):
            self.add_edge(self.find(src), self.find(o))

    def field(self, dst: int, base: int, offset: int) -> None:
        r = self.find(base)
        self.fields.setdefault(r, []).append((dst, offset))
        self._fire_field(dst, offset, list(self.pts[r]))

    def icall(self, fnptr: int, record: object) -> None:
        r = self.find(fnptr)
        self.icalls.setdefault(r, []).append(record)
        self._fire_icall(record, list(self.pts[r]))

    def add_edge(self, a: int, b: int) -> None:
        if a == b:
            return
        sa = self.succ[a]
        if b in sa:
            return
        sa.add(b)
        self.dirty = True
        src = self.pts[a]
        if src:
            self.stats.propagations += len(src)
            if self.pts[b].union_into(src):
                self.push(b)
            self._check_cap()

    def _fire_field(self, dst: int, offset: int, elems: list[int]) -> None:
        if not elems:
            return
        field_of = self.host.field_of
        r = self.find(dst)
        if self.pts[r].update([field_of(o, offset) for o in elems]):
            self.push(r)

    def _fire_icall(self, record: object, elems: list[int]) -> None:
        fn_of = self.host.function_of_location
        for o in elems:
            fn = fn_of(o)
            if fn is None:
                continue
            pairs = list(self.host.resolve(record, fn))
            site = getattr(record, "site", None)
            if site is not None and self._resolved_ok(record, fn):
                self.call_graph.setdefault(site, set()).add(fn)
            for dst, src in pairs:
                self.copy(dst, src)

    def _resolved_ok(self, record: object, fn: str) -> bool:
        check = getattr(self.host, "arity_ok", None)
        return True if check is None else check(record, fn)

    # -- union-find collapse ----------------------------------------------
    def unite(self, a: int, b: int, reset: bool = True) -> int:
        if a == b:
            return a
        r, o = (a, b) if a < b else (b, a)
        self.parent[o] = r
        self._epoch += 1
        ps = self.pts[r]
        ps.union_into(self.pts[o])
        so = self.succ[o]
        sr = self.succ[r]
        sr |= so
        for table in (self.loads, self.stores, self.fields, self.icalls, self.hcd):
            moved = table.pop(o, None)
            if moved:
                table.setdefault(r, []).extend(moved)
        self.pts[o] = None
        self.succ[o] = None
        self.ptok.pop(o, None)
        self.ctok.pop(o, None)
        # incoming edges to o are normalized lazily through find()
        self._normalize(r)
        if reset:
            self.ptok.pop(r, None)
            self.ctok.pop(r, None)
            self.stats.collapsed += 1
            self.push(r)
        return r

    def _normalize(self, n: int) -> set[int]:
        s = self.succ[n]
        if self._norm[n] == self._epoch:
            return s
        self._norm[n] = self._epoch
        find = self.find
        norm = {find(t) for t in s}
        norm.discard(n)
        if norm != s:
            self.succ[n] = norm
        return self.succ[n]

    def _edge_sources(self) -> list[int]:
        parent, succ = self.parent, self.succ
        return [n for n in range(len(parent)) if parent[n] == n and succ[n]]

    def topo_order(self) -> dict[int, int]:
        """Topological index of every rep touching a copy edge."""
        reps = self._edge_sources()
        order: dict[int, int] = {}
        for comp in topological_components(reps, lambda v: self._normalize(v)):
            for v in comp:
                order[v] = len(order)
        return order

    def _check_cap(self) -> None:
        if self.stats.propagations > self.cfg.max_props:
            raise SolverLimitError(
                f"propagation cap {self.cfg.max_props} exceeded", self.stats
            )

    # -- LCD / SCC -----------------------------------------------------------
    def lcd_probe(self, src: int, dst: int) -> set[int] | None:
        """Nodes on cycles through edge src->dst, if any; each edge probed once."""
        if (src, dst) in self.probed:
            return None
        self.probed.add((src, dst))
        self.stats.lcd_probes += 1
        back = _reaches(dst, src, self._normalize)
        if not back:
            return None
        fwd = _forward(src, self._normalize)
        rev: dict[int, list[int]] = {}
        for v in fwd:
            for w in self._normalize(v):
                if w in fwd:
                    rev.setdefault(w, []).append(v)
        comp = _forward(src, lambda v: rev.get(v, ()))
        return comp & fwd

    def collapse(self, members: Iterable[int]) -> int:
        it = iter(sorted(members))
        r = self.find(next(it))
        for m in it:
            r = self.unite(r, self.find(m))
        return r

    def collapse_sccs(self) -> None:
        reps = self._edge_sources()
        for comp in tarjan_scc(reps, lambda v: sorted(self._normalize(v))):
            if len(comp) > 1:
                self.collapse(comp)

    # -- processing ----------------------------------------------------------
    def _complex(self, n: int) -> bool:
        """Fire complex constraints of rep ``n`` on its new elements.

        Returns False when an HCD collapse absorbed ``n`` (caller re-queues).
        """
        s = self.pts[n]
        if self.naive:
            elems = list(s)
        else:
            elems = s.since(self.ctok.get(n))
            self.ctok[n] = s.snapshot()
        if not elems:
            return True
        if n in self.hcd:
            for target in list(self.hcd[n]):
                t = self.find(target)
                for o in elems:
                    ro = self.find(o)
                    if ro != t:
                        t = self.unite(t, ro)
            if self.find(n) != n:
                # n itself was absorbed; its new rep refires from scratch
                self.push(self.find(n))
                return False
        parent = self.parent
        find = self.find
        add_edge = self.add_edge
        succ = self.succ
        roots = [o if parent[o] == o else find(o) for o in elems]
        if n in self.loads:
            for dst in list(self.loads[n]):
                d = find(dst)
                for a in roots:
                    if a != d and d not in succ[a]:
                        add_edge(a, d)
        if n in self.stores:
            for src in list(self.stores[n]):
                a = find(src)
                sa = succ[a]
                for d in roots:
                    if a != d and d not in sa:
                        add_edge(a, d)
                        sa = succ[a]
        for dst, off in list(self.fields.get(n, ())):
            self._fire_field(dst, off, elems)
        for rec in list(self.icalls.get(n, ())):
            self._fire_icall(rec, elems)
        return True

    def _lcd_check(self, n: int, t: int) -> bool:
        """After a no-change propagation n->t; True if a collapse happened."""
        if (n, t) in self.probed or not self.pts[n].issubset(self.pts[t]):
            return False
        comp = self.lcd_probe(n, t)
        if comp:
            self.collapse(comp)
            return True
        return False

    def _propagate(self, n: int) -> bool:
        """Push rep ``n``'s set (or delta) along its copy edges; False if n collapsed."""
        s = self.pts[n]
        targets = self._normalize(n)
        if not targets:
            if not self.naive:
                self.ptok[n] = s.snapshot()
            return True
        lcd = self.cfg.lcd
        stats = self.stats
        if self.naive:
            size = len(s)
            for t in list(targets):
                stats.propagations += size
                if self.pts[t].union_into(s):
                    self.push(t)
                elif lcd and self._lcd_check(n, t):
                    self._check_cap()
                    return False
            self._check_cap()
            return True
        token = self.ptok.get(n)
        delta = s.since(token)
        self.ptok[n] = s.snapshot()
        if not delta:
            return True
        size = len(delta)
        for t in list(targets):
            stats.propagations += size
            changed, _ = self.pts[t].diff_union_into(s, token)
            if changed:
                self.push(t)
            elif lcd and self._lcd_check(n, t):
                self._check_cap()
                return False
        self._check_cap()
        return True

    def _deep(self, n: int) -> None:
        stack = [n]
        stats = self.stats
        lcd = self.cfg.lcd
        while stack:
            x = self.find(stack.pop())
            s = self.pts[x]
            token = self.ptok.get(x)
            delta = s.since(token)
            self.ptok[x] = s.snapshot()
            if not delta:
                continue
            size = len(delta)
            for t in list(self._normalize(x)):
                stats.propagations += size
                changed, _ = self.pts[t].diff_union_into(s, token)
                if changed:
                    stack.append(t)
                    if self.has_complex(t):
                        self.worklist.push(t)
                elif lcd and self._lcd_check(x, t):
                    r = self.find(x)
                    stack.append(r)
                    break
            self._check_cap()

    def solve(self) -> None:
        if self.wave_mode:
            self._solve_wave()
            return
        wl = self.worklist
        deep = self.cfg.strategy is Strategy.DEEP
        while wl:
            n = self.find(wl.pop())
            self.stats.iterations += 1
            if not self._complex(n):
                continue
            n = self.find(n)
            if deep:
                self._deep(n)
            else:
                self._propagate(n)

    def _solve_wave(self) -> None:
        while True:
            self.stats.waves += 1
            self.dirty = False
            # one SCC pass both collapses cycles and yields the topological order
            comps = tarjan_scc(self._edge_sources(), lambda v: sorted(self._normalize(v)))
            order = []
            for comp in reversed(comps):
                order.append(self.collapse(comp) if len(comp) > 1 else comp[0])
            for n in order:
                if self.parent[n] == n:
                    self.stats.iterations += 1
                    self._propagate(n)
            self.dirty = False
            ranked = set(order)
            hosts = set(self.loads) | set(self.stores) | set(self.fields) | set(self.icalls) | set(self.hcd)
            rest = sorted(hosts - ranked)
            for n in order + rest:
                if self.parent[n] == n and self.has_complex(n):
                    self._complex(n)
            if not self.dirty:
                break


def _reaches(start: int, goal: int, succ: Callable[[int], Iterable[int]]) -> bool:
    seen = {start}
    stack = [start]
    while stack:
        v = stack.pop()
        if v == goal:
            return True
        for w in succ(v):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return False


def _forward(start: int, succ: Callable[[int], Iterable[int]]) -> set[int]:
    seen = {start}
    stack = [start]
    while stack:
        for w in succ(stack.pop()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


# ---------------------------------------------------------------------------
# Static-system driver
# ---------------------------------------------------------------------------


class _SystemHost:
    def __init__(self, sys: ConstraintSystem):
        self.sys = sys
        self.field_of = sys.field_of
        self.function_of_location = sys.function_of_location

    def resolve(self, record: IndirectCall, function: str) -> list[tuple[int, int]]:
        return [(c.dst, c.src) for c in resolve_indirect_call(self.sys, record, function)]

    def arity_ok(self, record: IndirectCall, function: str) -> bool:
        return len(self.sys.fn_params[function]) == len(record.args)


def load_system(g: ConstraintGraph, sys: ConstraintSystem) -> None:
    g.new_nodes(sys.num_nodes)
    if sys.merge_map is not None:
        g.premerge(sys.merge_map)
    g.stats.graph_nodes = sum(1 for n in range(sys.num_nodes) if g.find(n) == n and not sys.is_location(n))
    for c in sys.constraints:
        k = c.kind
        if k == ADDR:
            g.addr(c.dst, c.src)
        elif k == COPY:
            g.copy(c.dst, c.src)
        elif k == LOAD:
            g.load(c.dst, c.src)
        elif k == STORE:
            g.store(c.dst, c.src)
        elif k == FIELD:
            g.field(c.dst, c.src, c.offset)
    for rec in sys.icalls:
        g.icall(rec.fnptr, rec)


def prepare(sys: ConstraintSystem, cfg: SolverConfig) -> tuple[ConstraintSystem, dict[int, int]]:
    """Offline stage: (system to load, HCD table)."""
    work = sys.fork()
    if cfg.offline is Offline.HVN:
        work, _ = offline_hvn(work)
    elif cfg.offline is Offline.HU:
        work, _ = offline_hu(work)
    table = offline_hcd(work) if cfg.hcd else {}
    return work, table


def solve(sys: ConstraintSystem, cfg: SolverConfig = REFERENCE_CONFIG, *, prepared: tuple[ConstraintSystem, dict[int, int]] | None = None) -> PointsToSolution:
    """Least fixpoint of the subset constraints of ``sys`` under ``cfg``."""
    t0 = time.perf_counter()
    if prepared is None:
        work, table = prepare(sys, cfg)
    else:
        work, table = prepared[0].fork(), prepared[1]
    g = ConstraintGraph(cfg, _SystemHost(work), table)
    load_system(g, work)
    for site, callee in sys.direct_calls:
        g.call_graph.setdefault(site, set()).add(callee)
    try:
        g.solve()
    finally:
        g.stats.millis = (time.perf_counter() - t0) * 1000.0
    return finalize(g, sys)


def finalize(g: ConstraintGraph, sys: ConstraintSystem) -> PointsToSolution:
    rep = tuple(g.find(n) for n in range(sys.num_nodes))
    sets = {r: tuple(g.pts[r]) for r in set(rep) if g.pts[r]}
    cg = {site: frozenset(fns) for site, fns in g.call_graph.items()}
    return PointsToSolution(sys, rep, sets, cg, g.stats)


# ---------------------------------------------------------------------------
# Stand-alone entry points for the individual techniques
# ---------------------------------------------------------------------------


def graph_for(sys: ConstraintSystem, cfg: SolverConfig = REFERENCE_CONFIG) -> ConstraintGraph:
    """A loaded but unsolved constraint graph."""
    g = ConstraintGraph(cfg, _SystemHost(sys.fork()))
    load_system(g, sys)
    return g


def run_lcd_probe(g: ConstraintGraph, edge: tuple[int, int]) -> set[int] | None:
    return g.lcd_probe(g.find(edge[0]), g.find(edge[1]))


def scc_collapse(g: ConstraintGraph) -> ConstraintGraph:
    g.collapse_sccs()
    return g


def _run(sys: ConstraintSystem, strategy: Strategy, **kw) -> PointsToSolution:
    return solve(sys, SolverConfig(strategy=strategy, **kw))


def propagate_wave(sys: ConstraintSystem, **kw) -> PointsToSolution:
    return _run(sys, Strategy.WAVE, **kw)


def propagate_diff(sys: ConstraintSystem, **kw) -> PointsToSolution:
    return _run(sys, Strategy.DIFF, **kw)


def propagate_deep(sys: ConstraintSystem, **kw) -> PointsToSolution:
    return _run(sys, Strategy.DEEP, **kw)
