"""Uniform alias queries over every kind of solution.

Each solver's output is wrapped in an :class:`AnalysisResult` adapter that
answers in one vocabulary: variables are ``(function, name)`` pairs and
memory locations are ``(object label, field)`` pairs, with labels ``A`` for
allocation sites and ``@g`` for globals and functions. Unification results
are field-insensitive, so their locations always carry field 0.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable

from .andersen import REFERENCE_CONFIG, PointsToSolution, SolverConfig, solve
from .constraints import generate
from .ir import MAX_FIELD, InstrId, PointerModule, pretty_print
from .sensitivity import ContextualSolution, FlowSolution, solve_flow_sensitive, solve_fscs, solve_kcfa
from .sensitivity.kcfa import KCFA_CONFIG
from .steensgaard import UnificationSolution, solve_unify_system

ANALYSES = ("fici", "steens", "kcfa", "fs", "fscs")

VarRef = tuple[str, str]  # (function, variable)
Loc = tuple[str, int]  # (object label, field)


class QueryError(KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ""


def module_hash(m: PointerModule) -> str:
    return hashlib.sha256(pretty_print(m).encode()).hexdigest()


@dataclass(frozen=True)
class Provenance:
    analysis: str
    config: dict = field(default_factory=dict)
    module_hash: str = ""


class AnalysisResult:
    """Read-only adapter; subclasses provide ``_var_locs`` and ``call_graph``."""

    field_sensitive = True

    def __init__(self, m: PointerModule, solution, provenance: Provenance):
        self.module = m
        self.solution = solution
        self.provenance = provenance
        self._vars = {(f.name, v) for f in m.functions for v in f.variables()}

    # -- backend hooks -------------------------------------------------------
    def _var_locs(self, var: VarRef) -> frozenset[Loc]:
        raise NotImplementedError

    def _var_locs_at(self, var: VarRef, point: InstrId) -> frozenset[Loc]:
        return self._var_locs(var)

    @property
    def call_graph(self) -> dict[InstrId, frozenset[str]]:
        raise NotImplementedError

    def cells(self) -> dict[Loc, frozenset[Loc]]:
        """Non-empty memory contents: location -> locations it may hold."""
        raise NotImplementedError

    # -- helpers -------------------------------------------------------------
    def check_var(self, var: VarRef) -> VarRef:
        if tuple(var) not in self._vars:
            raise QueryError(f"unknown variable @{var[0]}:%{var[1]}")
        return tuple(var)

    def variables(self) -> list[VarRef]:
        return sorted(self._vars)

    def locations(self, var: VarRef, point: InstrId | None = None) -> frozenset[Loc]:
        var = self.check_var(var)
        if point is None:
            return self._var_locs(var)
        return self._var_locs_at(var, point)

    def objects(self, var: VarRef, point: InstrId | None = None) -> frozenset[str]:
        return frozenset(label for label, _ in self.locations(var, point))

    @cached_property
    def object_labels(self) -> frozenset[str]:
        labels = {"@" + g.name for g in self.module.globals}
        labels.update("@" + f.name for f in self.module.functions)
        labels.update(i.symbol for i in self.module.instructions() if i.op == "alloc")
        return frozenset(labels)

    @cached_property
    def _all_locs(self) -> dict[VarRef, frozenset[Loc]]:
        return {v: self._var_locs(v) for v in sorted(self._vars)}


class _SetResult(AnalysisResult):
    """Over a field-sensitive :class:`PointsToSolution` (Andersen or a projection)."""

    def __init__(self, m, solution: PointsToSolution, provenance):
        super().__init__(m, solution, provenance)
        self.field_sensitive = solution.field_sensitive

    def _var_locs(self, var):
        sol = self.solution
        sys = sol.system
        node = sys.var_node.get(var)
        if node is None:
            return frozenset()
        out = set()
        for loc in sol.pts(node):
            info = sys.nodes[loc]
            out.add((sys.objects[info.obj].label, info.field if sol.field_sensitive else 0))
        return frozenset(out)

    def cells(self):
        sol = self.solution
        sys = sol.system
        fs = sol.field_sensitive
        out: dict[Loc, set[Loc]] = {}
        for n, info in enumerate(sys.nodes):
            if info.kind != "field":
                continue
            keys = sol.pts(n)
            if not keys:
                continue
            here = (sys.objects[info.obj].label, info.field if fs else 0)
            acc = out.setdefault(here, set())
            for loc in keys:
                li = sys.nodes[loc]
                acc.add((sys.objects[li.obj].label, li.field if fs else 0))
        return {k: frozenset(v) for k, v in out.items()}

    @property
    def call_graph(self):
        return self.solution.call_graph


class _UnifyResult(AnalysisResult):
    field_sensitive = False

    def _var_locs(self, var):
        sol = self.solution
        node = sol.system.var_node.get(var)
        if node is None:
            return frozenset()
        return frozenset((sol.system.objects[o].label, 0) for o in sol.object_pts(node))

    def cells(self):
        sol = self.solution
        sys = sol.system
        out = {}
        for o, base in enumerate(sys.obj_base):
            held = sol.object_pts(base)
            if held:
                out[(sys.objects[o].label, 0)] = frozenset((sys.objects[x].label, 0) for x in held)
        return out

    @property
    def call_graph(self):
        return self.solution.call_graph


class _ContextResult(AnalysisResult):
    def _var_locs(self, var):
        sol = self.solution
        fn, name = var
        out = set()
        for ctx in sol.contexts.get(fn, ()):
            out.update((o.label, f) for o, f in sol.pts(fn, name, ctx))
        return frozenset(out)

    def cells(self):
        sol = self.solution
        out: dict[Loc, set[Loc]] = {}
        for loc, (obj, f) in sol.loc_info.items():
            held = sol.locations(loc)
            if held:
                out.setdefault((sol.objects[obj].label, f), set()).update((o.label, g) for o, g in held)
        return {k: frozenset(v) for k, v in out.items()}

    @cached_property
    def call_graph(self):
        cg: dict[InstrId, set[str]] = {}
        for (site, _ctx), callees in self.solution.call_graph.items():
            cg.setdefault(site, set()).update(fn for fn, _ in callees)
        return {s: frozenset(v) for s, v in cg.items()}


class _FlowResult(AnalysisResult):
    @cached_property
    def _unions(self) -> dict[VarRef, set[int]]:
        acc: dict[VarRef, set[int]] = {}
        for table in (self.solution.ins, self.solution.outs):
            for ((fn, _ctx), _iid), st in table.items():
                if st is None:
                    continue
                for v, locs in st.vars.items():
                    if locs:
                        acc.setdefault((fn, v), set()).update(locs)
        return acc

    def _labels(self, locs: Iterable[int]) -> frozenset[Loc]:
        out = set()
        for loc in locs:
            o, f = self.solution.location(loc)
            out.add((o.label, f))
        return frozenset(out)

    def _var_locs(self, var):
        return self._labels(self._unions.get(var, ()))

    def _var_locs_at(self, var, point):
        if point.function != var[0]:
            raise QueryError(f"program point {point} is not in @{var[0]}")
        return self._labels(self.solution.var_at(point, var[1], "in"))

    def cells(self):
        acc: dict[int, set[int]] = {}
        for table in (self.solution.ins, self.solution.outs):
            for st in table.values():
                if st is None:
                    continue
                for cell, locs in st.mem.items():
                    if locs:
                        acc.setdefault(cell, set()).update(locs)
        out: dict[Loc, set[Loc]] = {}
        for cell, locs in acc.items():
            o, f = self.solution.location(cell)
            out.setdefault((o.label, f), set()).update(self._labels(locs))
        return {k: frozenset(v) for k, v in out.items()}

    @cached_property
    def call_graph(self):
        cg: dict[InstrId, set[str]] = {}
        for (site, _ctx), callees in self.solution.call_graph.items():
            cg.setdefault(site, set()).update(fn for fn, _ in callees)
        return {s: frozenset(v) for s, v in cg.items()}


def wrap(m: PointerModule, solution, analysis: str, config: dict | None = None) -> AnalysisResult:
    """Adapter for any solution kind."""
    prov = Provenance(analysis, dict(config or {}), module_hash(m))
    if isinstance(solution, PointsToSolution):
        return _SetResult(m, solution, prov)
    if isinstance(solution, UnificationSolution):
        return _UnifyResult(m, solution, prov)
    if isinstance(solution, ContextualSolution):
        return _ContextResult(m, solution, prov)
    if isinstance(solution, FlowSolution):
        return _FlowResult(m, solution, prov)
    raise TypeError(f"no adapter for {type(solution).__name__}")


def analyze(
    m: PointerModule,
    analysis: str = "fici",
    *,
    k: int = 0,
    config: SolverConfig | None = None,
    max_field: int = MAX_FIELD,
) -> AnalysisResult:
    """Run one analysis and wrap its solution."""
    if analysis == "fici":
        cfg = config or REFERENCE_CONFIG
        sol = solve(generate(m, max_field=max_field), cfg)
        desc = cfg.describe()
    elif analysis == "steens":
        sol = solve_unify_system(generate(m, max_field=max_field))
        desc = {}
    elif analysis == "kcfa":
        cfg = config or KCFA_CONFIG
        sol = solve_kcfa(m, k, cfg, max_field=max_field)
        desc = {**cfg.describe(), "k": k}
    elif analysis == "fs":
        sol = solve_flow_sensitive(m, max_field=max_field)
        desc = {}
    elif analysis == "fscs":
        sol = solve_fscs(m, k, max_field=max_field)
        desc = {"k": k}
    else:
        raise ValueError(f"unknown analysis {analysis!r}; expected one of {', '.join(ANALYSES)}")
    return wrap(m, sol, analysis, desc)


# -- the four query primitives -------------------------------------------------


def points_to_set(r: AnalysisResult, p: VarRef, point: InstrId | None = None) -> list[Loc]:
    return sorted(r.locations(p, point))


def may_alias(r: AnalysisResult, p: VarRef, q: VarRef, point: InstrId | None = None) -> bool:
    return not r.locations(p, point).isdisjoint(r.locations(q, point))


def pointed_by(r: AnalysisResult, p: VarRef, obj: str, point: InstrId | None = None) -> bool:
    if obj not in r.object_labels:
        raise QueryError(f"unknown object {obj}")
    return obj in r.objects(p, point)


def alias_set(r: AnalysisResult, v: VarRef) -> list[VarRef]:
    """Variables that may alias ``v``; includes ``v`` when its set is non-empty."""
    mine = r.locations(v)
    if not mine:
        return []
    return [w for w, locs in r._all_locs.items() if not mine.isdisjoint(locs)]


# -- mod/ref -------------------------------------------------------------------


@dataclass(frozen=True)
class ModRef:
    reads: frozenset[str]
    writes: frozenset[str]


def _local_effect(r: AnalysisResult, ins) -> ModRef:
    fn = ins.iid.function
    if ins.op == "load":
        return ModRef(r.objects((fn, ins.operands[0])), frozenset())
    if ins.op == "store":
        return ModRef(frozenset(), r.objects((fn, ins.operands[1])))
    return ModRef(frozenset(), frozenset())


def _function_effects(r: AnalysisResult) -> dict[str, ModRef]:
    """Per-function effects including everything reachable through calls."""
    cache = r.__dict__.get("_fn_effects")
    if cache is not None:
        return cache
    m = r.module
    local: dict[str, tuple[set, set]] = {}
    callees: dict[str, set[str]] = {}
    for f in m.functions:
        reads, writes = set(), set()
        out = set()
        for ins in f.instructions():
            e = _local_effect(r, ins)
            reads |= e.reads
            writes |= e.writes
            if ins.op in ("call", "icall"):
                out |= r.call_graph.get(ins.iid, frozenset())
        local[f.name] = (reads, writes)
        callees[f.name] = out
    effects = {}
    for f in m.functions:
        seen = {f.name}
        stack = [f.name]
        reads, writes = set(), set()
        while stack:
            g = stack.pop()
            reads |= local[g][0]
            writes |= local[g][1]
            for h in callees.get(g, ()):
                if h not in seen:
                    seen.add(h)
                    stack.append(h)
        effects[f.name] = ModRef(frozenset(reads), frozenset(writes))
    r.__dict__["_fn_effects"] = effects
    return effects


def mod_ref(r: AnalysisResult, iid: InstrId) -> ModRef:
    """Objects the instruction may read and write; calls include all transitive callees."""
    ins = r.module.instruction(iid)
    if ins.op in ("call", "icall"):
        effects = _function_effects(r)
        reads, writes = set(), set()
        for g in r.call_graph.get(iid, ()):
            reads |= effects[g].reads
            writes |= effects[g].writes
        return ModRef(frozenset(reads), frozenset(writes))
    return _local_effect(r, ins)


# -- query scripts ---------------------------------------------------------------


def parse_var(text: str, entry: str) -> VarRef:
    """``%p`` names a variable of the entry function, ``@f:%p`` one of ``@f``."""
    if text.startswith("@") and ":" in text:
        fn, _, var = text[1:].partition(":")
    else:
        fn, var = entry, text
    if not var.startswith("%") or len(var) < 2 or not fn:
        raise QueryError(f"bad variable reference {text!r}")
    return fn, var[1:]


def format_var(var: VarRef) -> str:
    return f"@{var[0]}:%{var[1]}"


def format_locs(locs: Iterable[Loc]) -> str:
    return "{" + ", ".join(f"{label}.{f}" for label, f in sorted(locs)) + "}"


_ARITY = {"ALIAS": 2, "PTS": 1, "PB": 2, "ALIASSET": 1}


def answer_query(r: AnalysisResult, line: str) -> str:
    words = line.split()
    verb = words[0].upper()
    if verb not in _ARITY or len(words) - 1 != _ARITY[verb]:
        raise QueryError(f"malformed query {line!r}")
    entry = r.module.entry
    if verb == "ALIAS":
        ans = may_alias(r, parse_var(words[1], entry), parse_var(words[2], entry))
        return "true" if ans else "false"
    if verb == "PTS":
        return format_locs(points_to_set(r, parse_var(words[1], entry)))
    if verb == "PB":
        return "true" if pointed_by(r, parse_var(words[1], entry), words[2]) else "false"
    return " ".join(format_var(v) for v in alias_set(r, parse_var(words[1], entry)))


def run_queries(r: AnalysisResult, text: str) -> list[str]:
    """Answer a query script; blank lines and ``#`` comments are skipped."""
    out = []
    for raw in text.splitlines():
        line = raw.split("#", 1)[0].strip()
        if line:
            out.append(f"{line} => {answer_query(r, line)}")
    return out
