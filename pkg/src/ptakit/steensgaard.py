"""Unification-based points-to analysis.

Every variable, return slot and abstract object owns a union-find element.
Each equivalence class has at most one outgoing points-to link to the class
of everything its members may point to. Objects are field-insensitive: all
fields of an object share the object's element.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from .andersen.solver import PointsToSolution, SolverStats
from .constraints import ADDR, COPY, FIELD, LOAD, STORE, ConstraintSystem, generate
from .ir import InstrId, PointerModule


@dataclass
class UnifyStats:
    unions: int = 0
    finds: int = 0
    classes: int = 0
    millis: float = 0.0

    @property
    def operations(self) -> int:
        return self.unions + self.finds


class _UnionFind:
    def __init__(self, size: int, stats: UnifyStats):
        self.parent = list(range(size))
        self.rank = [0] * size
        self.target: list[int | None] = [None] * size
        self.stats = stats

    def fresh(self) -> int:
        n = len(self.parent)
        self.parent.append(n)
        self.rank.append(0)
        self.target.append(None)
        return n

    def find(self, n: int) -> int:
        self.stats.finds += 1
        parent = self.parent
        root = n
        while parent[root] != root:
            root = parent[root]
        while parent[n] != root:
            parent[n], n = root, parent[n]
        return root

    def target_of(self, n: int, create: bool = False) -> int | None:
        r = self.find(n)
        t = self.target[r]
        if t is None:
            if not create:
                return None
            t = self.fresh()
            self.target[r] = t
            return t
        return self.find(t)

    def join(self, a: int, b: int) -> None:
        """Unify two classes and, transitively, their points-to targets."""
        pending = [(a, b)]
        while pending:
            x, y = pending.pop()
            x, y = self.find(x), self.find(y)
            if x == y:
                continue
            self.stats.unions += 1
            if self.rank[x] < self.rank[y]:
                x, y = y, x
            elif self.rank[x] == self.rank[y]:
                self.rank[x] += 1
            self.parent[y] = x
            tx, ty = self.target[x], self.target[y]
            if tx is None:
                self.target[x] = ty
            elif ty is not None:
                pending.append((tx, ty))

    def link(self, src: int, dst_class: int) -> None:
        """Make ``src`` point to ``dst_class`` (merging with any existing target)."""
        r = self.find(src)
        t = self.target[r]
        if t is None:
            self.target[r] = self.find(dst_class)
        else:
            self.join(t, dst_class)

    def copy(self, dst: int, src: int) -> None:
        """dst = src: the two targets become one class (missing link adopts the other)."""
        td = self.target_of(dst)
        ts = self.target_of(src)
        if td is None and ts is None:
            t = self.fresh()
            self.target[self.find(dst)] = t
            self.target[self.find(src)] = t
        elif td is None:
            self.target[self.find(dst)] = ts
        elif ts is None:
            self.target[self.find(src)] = td
        else:
            self.join(td, ts)


@dataclass(frozen=True)
class UnificationSolution:
    system: ConstraintSystem
    parent: tuple[int, ...]
    target: tuple[int | None, ...]
    call_graph: dict[InstrId, frozenset[str]]
    stats: UnifyStats = field(compare=False)

    def _find(self, n: int) -> int:
        while self.parent[n] != n:
            n = self.parent[n]
        return n

    def element(self, node: int) -> int:
        """Union-find element of a constraint node (fields share their object's)."""
        info = self.system.nodes[node]
        if info.kind == "field":
            return self.system.obj_base[info.obj]
        return node

    def class_of(self, node: int) -> int:
        return self._find(self.element(node))

    def pointee_class(self, node: int) -> int | None:
        t = self.target[self.class_of(node)]
        return None if t is None else self._find(t)

    def class_objects(self, cls: int | None) -> frozenset[int]:
        if cls is None:
            return frozenset()
        return frozenset(o for o, base in enumerate(self.system.obj_base) if self._find(base) == cls)

    def object_pts(self, node: int) -> frozenset[int]:
        return self.class_objects(self.pointee_class(node))


def _address_taken(sys: ConstraintSystem) -> list[str]:
    out = []
    for c in sys.constraints:
        if c.kind == ADDR:
            fn = sys.function_of_location(c.src)
            if fn is not None and fn not in out:
                out.append(fn)
    return out


def solve_unify_system(sys: ConstraintSystem) -> UnificationSolution:
    t0 = time.perf_counter()
    stats = UnifyStats()
    uf = _UnionFind(sys.num_nodes, stats)

    def el(n: int) -> int:
        info = sys.nodes[n]
        return sys.obj_base[info.obj] if info.kind == "field" else n

    for c in sys.constraints:
        if c.kind == ADDR:
            uf.link(el(c.dst), el(c.src))
        elif c.kind in (COPY, FIELD):
            uf.copy(el(c.dst), el(c.src))
        elif c.kind == LOAD:
            # dst = *src
            cell = uf.target_of(el(c.src), create=True)
            inner = uf.target_of(cell, create=True)
            uf.link(el(c.dst), inner)
        elif c.kind == STORE:
            # *dst = src
            cell = uf.target_of(el(c.dst), create=True)
            uf.copy(cell, el(c.src))
    taken = _address_taken(sys)
    for rec in sys.icalls:
        for fn in taken:
            params = sys.fn_params[fn]
            if len(params) != len(rec.args):
                continue
            for p, a in zip(params, rec.args):
                uf.copy(p, a)
            if rec.dest is not None:
                uf.copy(rec.dest, sys.fn_ret[fn])
    # call graph: direct calls, plus address-taken candidates the pointer may hold
    cg: dict[InstrId, set[str]] = {}
    for site, callee in sys.direct_calls:
        cg.setdefault(site, set()).add(callee)
    for rec in sys.icalls:
        t = uf.target_of(rec.fnptr)
        held = set()
        if t is not None:
            for fn in taken:
                if uf.find(sys.obj_base[sys.fn_object[fn]]) == t and len(sys.fn_params[fn]) == len(rec.args):
                    held.add(fn)
        if held:
            cg.setdefault(rec.site, set()).update(held)
    stats.classes = sum(1 for n in range(len(uf.parent)) if uf.parent[n] == n)
    stats.millis = (time.perf_counter() - t0) * 1000.0
    return UnificationSolution(
        sys,
        tuple(uf.parent),
        tuple(uf.target),
        {s: frozenset(v) for s, v in cg.items()},
        stats,
    )


def solve_unify(m: PointerModule) -> UnificationSolution:
    return solve_unify_system(generate(m))


def project_sets(sol: UnificationSolution) -> PointsToSolution:
    """Object-granularity sets; each object is keyed by its field-0 location."""
    sys = sol.system
    by_class: dict[int | None, tuple[int, ...]] = {}
    sets: dict[int, tuple[int, ...]] = {}
    for n in range(sys.num_nodes):
        cls = sol.pointee_class(n)
        if cls not in by_class:
            by_class[cls] = tuple(sorted(sys.obj_base[o] for o in sol.class_objects(cls)))
        if by_class[cls]:
            sets[n] = by_class[cls]
    stats = SolverStats(graph_nodes=sol.stats.classes, millis=sol.stats.millis)
    return PointsToSolution(sys, tuple(range(sys.num_nodes)), sets, sol.call_graph, stats, field_sensitive=False)
