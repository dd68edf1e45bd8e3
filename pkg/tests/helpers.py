"""Corpus builders and whole-program checks shared by the test modules."""

from __future__ import annotations

import itertools
import random
from pathlib import Path

from ptakit.andersen import SolverConfig, solve
from ptakit.cli.generator import GenParams, generate_program
from ptakit.cli.interpreter import interpret
from ptakit.constraints import generate
from ptakit.derived import build_memory_ssa, build_pdg, slice_pdg
from ptakit.derived.pdg import EXIT, augmented_exit_graph
from ptakit.ir import parse_module
from ptakit.sensitivity import project_ci, project_flow, solve_flow_sensitive, solve_fscs, solve_kcfa
from ptakit.steensgaard import project_sets, solve_unify_system

# heap cloning at k=2 occasionally needs more than the default 10^7 propagations
KCFA_SWEEP = SolverConfig(strategy="wave", backend="bitvec", max_props=10**9)

IDIOMS = Path(__file__).resolve().parent.parent / "corpus" / "idioms"


def corpus_params(seed: int, *, deterministic: bool = False, lo: int = 5, hi: int = 200) -> GenParams:
    rng = random.Random(seed)
    return GenParams(size=rng.randint(lo, hi), recursion=rng.random() < 0.5, deterministic=deterministic)


def corpus_module(seed: int, **kw):
    return parse_module(generate_program(seed, corpus_params(seed, **kw)))


def idiom_modules() -> dict[str, object]:
    return {p.stem: parse_module(p.read_text()) for p in sorted(IDIOMS.glob("*.pir"))}


def deterministic_idioms() -> dict[str, object]:
    out = {}
    for name, m in idiom_modules().items():
        if all(len(i.targets) <= 1 for i in m.instructions() if i.op == "br"):
            out[name] = m
    return out


# -- soundness against concrete execution ----------------------------------------


def _has(sol, locs, obj: str, fld: int, ctx=None) -> bool:
    for loc in locs:
        o, f = sol.location(loc)
        if o.label == obj and f == fld and (ctx is None or o.kind != "alloc" or o.context == ctx):
            return True
    return False


def _suffix(stack, k):
    return tuple(stack[len(stack) - k :]) if k else ()


def soundness_violations(m, trace=None) -> dict[str, list]:
    """Interpreter facts missing from each analysis mode's solution."""
    trace = trace if trace is not None else interpret(m, stack_suffix=2)
    out: dict[str, list] = {}
    sys = generate(m)
    idx = {o.label: i for i, o in enumerate(sys.objects)}
    ci = solve(sys)
    st = project_sets(solve_unify_system(sys))
    bad = out.setdefault("fici", [])
    bad_st = out.setdefault("steens", [])
    for f in trace.facts:
        n = sys.var_node[(f.iid.function, f.var)]
        base = sys.obj_base[idx[f.obj]]
        if base + f.field not in ci.pts(n):
            bad.append(f)
        if base not in st.pts(n):
            bad_st.append(f)
    for f in trace.mem_facts:
        cell = sys.obj_base[idx[f.obj]] + f.field
        if sys.obj_base[idx[f.value_obj]] + f.value_field not in ci.pts(cell):
            bad.append(f)
        if sys.obj_base[idx[f.value_obj]] not in st.pts(sys.obj_base[idx[f.obj]]):
            bad_st.append(f)

    for k in (1, 2):
        sol = solve_kcfa(m, k, KCFA_SWEEP)
        bad = out.setdefault(f"kcfa{k}", [])
        for f in trace.facts:
            got = sol.pts(f.iid.function, f.var, _suffix(f.stack, k))
            want_ctx = _suffix(f.alloc_stack, k)
            if not any(o.label == f.obj and fl == f.field and (o.kind != "alloc" or o.context == want_ctx) for o, fl in got):
                bad.append(f)
        for f in trace.mem_facts:
            cells = [sol.cell_pts(o, f.field) for o in sol.objects if o.label == f.obj]
            if not any(o.label == f.value_obj and fl == f.value_field for c in cells for o, fl in c):
                bad.append(f)

    for name, sol, k in (("fs", solve_flow_sensitive(m), 0), ("fscs1", solve_fscs(m, 1), 1), ("fscs2", solve_fscs(m, 2), 2)):
        bad = out.setdefault(name, [])
        width = sol.max_field + 1
        for f in trace.facts:
            ctx = _suffix(f.stack, k)
            if not _has(sol, sol.var_at(f.iid, f.var, f.phase, ctx), f.obj, f.field, _suffix(f.alloc_stack, k)):
                bad.append(f)
        for f in trace.mem_facts:
            ok = any(
                _has(sol, sol.cell_at(f.iid, i * width + f.field, f.phase), f.value_obj, f.value_field)
                for i, o in enumerate(sol.objects)
                if o.label == f.obj
            )
            if not ok:
                bad.append(f)
    return out


# -- precision lattice -------------------------------------------------------------


def _objects(sys, sol, n) -> frozenset[str]:
    return frozenset(sys.objects[sys.nodes[x].obj].label for x in sol.pts(n))


def lattice_violations(m, ks=(1, 2)) -> dict[str, list]:
    """Per-variable object-level containment failures between analyses."""
    sys = generate(m)
    ci = solve(sys)
    st = project_sets(solve_unify_system(sys))
    fs = project_flow(solve_flow_sensitive(m), m)
    fscs = project_flow(solve_fscs(m, 2), m)
    kc = {k: project_ci(solve_kcfa(m, k, KCFA_SWEEP), m) for k in ks}
    out: dict[str, list] = {key: [] for key in ("fscs<=fs", "fs<=fici", "fici<=steens", "alias", *(f"kcfa{k}<=fici" for k in ks))}
    out["kcfa-monotone"] = []
    vars_ = sys.variable_nodes()
    for n in vars_:
        o_ci, o_st, o_fs, o_fscs = (_objects(sys, s, n) for s in (ci, st, fs, fscs))
        if not o_fscs <= o_fs:
            out["fscs<=fs"].append(sys.node_name(n))
        if not o_fs <= o_ci:
            out["fs<=fici"].append(sys.node_name(n))
        if not o_ci <= o_st:
            out["fici<=steens"].append(sys.node_name(n))
        prev = o_ci
        for k in ks:
            o_k = _objects(sys, kc[k], n)
            if not o_k <= o_ci:
                out[f"kcfa{k}<=fici"].append(sys.node_name(n))
            if not o_k <= prev:
                out["kcfa-monotone"].append((k, sys.node_name(n)))
            prev = o_k
    ci_sets = {n: set(ci.pts(n)) for n in vars_}
    st_sets = {n: set(st.pts(n)) for n in vars_}
    for a, b in itertools.combinations(vars_, 2):
        if ci_sets[a] & ci_sets[b] and not st_sets[a] & st_sets[b]:
            out["alias"].append((sys.node_name(a), sys.node_name(b)))
    return out


# -- memory SSA / PDG structure ------------------------------------------------------


def memssa_problems(m, r) -> list[str]:
    """Single-definition and linkage invariants of the memory SSA form."""
    ssa = build_memory_ssa(m, r)
    problems = []
    keys = [(d.function, d.obj, d.version) for d in ssa.defs]
    if len(set(keys)) != len(keys):
        problems.append("duplicate (function, object, version)")
    known = set(ssa.defs)
    new_defs = [new for new, _ in ssa.chi.values()]
    if len(set(new_defs)) != len(new_defs):
        problems.append("one def created by two writers")
    for (iid, o), d in ssa.mu.items():
        if d not in known or d.obj != o or d.function != iid.function:
            problems.append(f"mu {iid} {o} links to foreign def {d}")
    for (iid, o), (new, prior) in ssa.chi.items():
        if new not in known or prior not in known or new.site != iid or prior.obj != o:
            problems.append(f"chi {iid} {o} malformed")
    for d, ops in ssa.phi.items():
        if d.kind != "phi" or any(x not in known or x.obj != d.obj for _, x in ops):
            problems.append(f"phi {d} malformed")
    for d in ssa.defs:
        if d.kind == "phi" and d not in ssa.phi:
            problems.append(f"phi {d} without operands")
    return problems


def slice_problems(m, r) -> list[str]:
    """Backward slice of every load must contain the writers behind its def."""
    ssa = build_memory_ssa(m, r)
    pdg = build_pdg(m, ssa, r)
    callers: dict[str, set] = {}
    for site, callees in r.call_graph.items():
        for g in callees:
            callers.setdefault(g, set()).add(site)
    problems = []
    for (iid, o), d in ssa.mu.items():
        if m.instruction(iid).op != "load":
            continue
        sl = slice_pdg(pdg, iid)
        for w in ssa.phi_sources(d):
            need = {w.site} if w.kind == "chi" else callers.get(w.function, set())
            missing = need - sl
            if missing:
                problems.append(f"{iid} {o}: {sorted(map(str, missing))} not in slice")
    return problems


# -- exhaustive-path control dependence -----------------------------------------------


def _simple_paths(succ, src, dst):
    stack = [(src, (src,))]
    while stack:
        n, path = stack.pop()
        if n == dst:
            yield path
            continue
        for w in succ[n]:
            if w not in path:
                stack.append((w, path + (w,)))


def brute_control_dependences(nodes, succ) -> set[tuple]:
    """Control dependence from post-dominance decided by enumerating every exit path."""
    aug = augmented_exit_graph(list(nodes), succ)
    paths = {n: list(_simple_paths(aug, n, EXIT)) for n in nodes}

    def pdom(y, x) -> bool:  # y post-dominates x (reflexive)
        return y == x or all(y in p for p in paths[x])

    out = set()
    for x in nodes:
        targets = set(succ[x])
        if len(targets) < 2:
            continue
        for y in nodes:
            strictly = y != x and pdom(y, x)
            if not strictly and any(pdom(y, s) for s in targets):
                out.add((x, y))
    return out
