import itertools
import random

import pytest
from hypothesis import given, strategies as st

from helpers import corpus_module
from oracles import fixpoint_pts, scc_brute
from ptakit.andersen import (
    REFERENCE_CONFIG,
    Offline,
    OnlineCycles,
    SolverConfig,
    SolverLimitError,
    Strategy,
    WorklistOrder,
    graph_for,
    make_worklist,
    offline_hcd,
    offline_hu,
    offline_hvn,
    propagate_deep,
    propagate_diff,
    propagate_wave,
    run_lcd_probe,
    scc_collapse,
    solve,
    worklist_next,
)
from ptakit.andersen.worklist import EmptyWorklistError
from ptakit.cli.generator import GenParams, generate_program
from ptakit.constraints import generate
from ptakit.graphs import tarjan_scc
from ptakit.ir import parse_module

ID_FN = "func @id(%x) {\ne:\n  ret %x\n}\n"


def main_system(body: str, extra: str = ""):
    return generate(parse_module(f"{extra}func @main() {{\ne:\n{body}\n  ret\n}}\n"))


def labels(sol, fn, var):
    sys = sol.system
    return {sys.objects[sys.nodes[x].obj].label for x in sol.var_pts(fn, var)}


EXAMPLES = {
    "copy": ("  %p = alloc A\n  %q = copy %p", "", "q", {"A"}),
    "load-store": ("  %x = alloc X\n  %p = alloc P\n  store %x, %p\n  %y = load %p", "", "y", {"X"}),
    "cycle": ("  %r = alloc A\n  %p = copy %r\n  %q = copy %p\n  %p = copy %q", "", "p", {"A"}),
    "icall": ("  %f = addr @id\n  %a = alloc A\n  %r = icall %f(%a)", ID_FN, "r", {"A"}),
}
SOME_CONFIGS = [
    REFERENCE_CONFIG,
    SolverConfig(strategy="wave", backend="bitvec"),
    SolverConfig(offline="hu", online_cycles="both", strategy="deep", worklist="topo"),
    SolverConfig(offline="hvn", online_cycles="lcd", strategy="diff", worklist="2lrf", backend="bitvec"),
    SolverConfig(online_cycles="hcd", worklist="lrf"),
]


class TestSolveExamples:
    @pytest.mark.parametrize("name", sorted(EXAMPLES))
    @pytest.mark.parametrize("cfg", SOME_CONFIGS, ids=lambda c: c.label())
    def test_example(self, name, cfg):
        body, extra, var, want = EXAMPLES[name]
        sol = solve(main_system(body, extra), cfg)
        assert labels(sol, "main", var) == want

    def test_cycle_members_equal(self):
        sol = solve(main_system(*EXAMPLES["cycle"][:2]))
        assert sol.var_pts("main", "p") == sol.var_pts("main", "q")

    def test_icall_call_graph(self):
        sys = main_system(*EXAMPLES["icall"][:2])
        sol = solve(sys)
        assert list(sol.call_graph.values()) == [frozenset({"id"})]

    def test_unassigned_pointer_is_empty(self):
        sol = solve(generate(parse_module("func @f(%p) {\ne:\n  %q = load %p\n  ret\n}\n" "func @main() {\ne:\n  ret\n}\n")))
        assert sol.var_pts("f", "q") == ()

    @pytest.mark.parametrize("run", [propagate_wave, propagate_diff, propagate_deep])
    def test_standalone_strategies(self, run):
        for body, extra, var, want in EXAMPLES.values():
            assert labels(run(main_system(body, extra)), "main", var) == want

    @pytest.mark.parametrize("run", [propagate_diff, propagate_deep])
    def test_empty_program_no_propagation(self, run):
        assert run(main_system("")).stats.propagations == 0

    def test_wave_chain_single_pass(self):
        body = "  %p1 = alloc A\n" + "".join(f"  %p{i + 1} = copy %p{i}\n" for i in range(1, 10))
        sol = propagate_wave(main_system(body))
        assert labels(sol, "main", "p10") == {"A"}
        assert sol.stats.waves == 1

    def test_limit_error_carries_stats(self):
        sys = main_system("  %p = alloc A\n  %q = copy %p\n  %r = copy %q")
        with pytest.raises(SolverLimitError) as exc:
            solve(sys, SolverConfig(max_props=1))
        assert exc.value.stats.propagations > 1


@given(st.integers(0, 100_000), st.integers(5, 120), st.booleans())
def test_reference_matches_fixpoint_oracle(seed, size, rec):
    sys = generate(parse_module(generate_program(seed, GenParams(size=size, recursion=rec))))
    pts, calls = fixpoint_pts(sys)
    sol = solve(sys)
    assert sol.expanded() == tuple(tuple(sorted(x)) for x in pts)
    assert {s: set(v) for s, v in sol.call_graph.items()} == calls


@given(
    st.integers(0, 100_000),
    st.sampled_from(list(Offline)),
    st.sampled_from(list(OnlineCycles)),
    st.sampled_from(list(Strategy)),
    st.sampled_from(list(WorklistOrder)),
    st.sampled_from(["sorted", "bitvec"]),
)
def test_any_configuration_matches_reference(seed, off, cyc, strat, wl, pts):
    sys = generate(corpus_module(seed, hi=150))
    ref = solve(sys)
    sol = solve(sys, SolverConfig(off, cyc, strat, wl, pts))
    assert sol.expanded() == ref.expanded()
    assert sol.call_graph == ref.call_graph


class TestOffline:
    def test_hvn_merges_copies_of_unconstrained(self):
        sys = generate(parse_module("func @f(%p) {\ne:\n  %q = copy %p\n  %r = copy %p\n  ret\n}\nfunc @main() {\ne:\n  ret\n}\n"))
        merged, lab = offline_hvn(sys)
        p, q, r = (sys.var_node[("f", v)] for v in "pqr")
        assert lab[p] == lab[q] == lab[r]
        assert len({merged.merge_map[n] for n in (p, q, r)}) == 1
        assert solve(merged).expanded() == solve(sys).expanded()

    def test_hu_unions_labels(self):
        # y = x ∪ a where x = a ∪ b: only set-union labels see y ≡ x
        sys = main_system("  %a = alloc A\n  %b = alloc B\n  %x = copy %a\n  %x = copy %b\n  %y = copy %x\n  %y = copy %a")
        x, y = sys.var_node[("main", "x")], sys.var_node[("main", "y")]
        _, lab_v = offline_hvn(sys)
        hu, lab_u = offline_hu(sys)
        assert lab_v[x] != lab_v[y]
        assert lab_u[x] == lab_u[y]
        assert solve(hu).expanded() == solve(sys).expanded()

    def test_distinct_seeds_never_merge(self):
        sys = main_system("  %a = alloc A\n  %b = alloc B")
        _, lab = offline_hvn(sys)
        assert lab[sys.var_node[("main", "a")]] != lab[sys.var_node[("main", "b")]]

    def test_empty_system(self):
        sys = generate(parse_module("func @main() {\ne:\n  ret\n}\n"))
        for fn in (offline_hvn, offline_hu):
            merged, lab = fn(sys)
            assert all(merged.merge_map[n] == n for n in range(sys.num_nodes))

    @pytest.mark.parametrize("seed", range(40))
    def test_hu_refines_hvn(self, seed):
        sys = generate(corpus_module(seed))
        hvn, lab_v = offline_hvn(sys)
        hu, lab_u = offline_hu(sys)
        merged = lambda s: sum(1 for n, r in enumerate(s.merge_map) if r != n)  # noqa: E731
        assert merged(hu) >= merged(hvn)
        for a, b in itertools.combinations(sys.variable_nodes(), 2):
            if lab_v[a] == lab_v[b]:
                assert lab_u[a] == lab_u[b]
        ref = solve(sys).expanded()
        assert solve(hvn).expanded() == ref
        assert solve(hu).expanded() == ref

    def test_hcd_table_for_deref_cycle(self):
        # *p -> q -> p -> *p
        sys = main_system("  %p = alloc A\n  %q = load %p\n  %p = copy %q\n  store %p, %p")
        table = offline_hcd(sys)
        p, q = sys.var_node[("main", "p")], sys.var_node[("main", "q")]
        assert table == {p: min(p, q)}
        assert solve(sys, SolverConfig(online_cycles="hcd")).expanded() == solve(sys).expanded()

    def test_hcd_acyclic(self):
        assert offline_hcd(main_system("  %p = alloc A\n  %q = load %p")) == {}


def copy_graph_program(n: int, edges) -> str:
    lines = [f"  %v{i} = alloc O{i}" for i in range(n)]
    lines += [f"  %v{b} = copy %v{a}" for a, b in edges]
    return "\n".join(lines)


class TestCycles:
    def test_lcd_probe(self):
        sys = main_system("  %p = alloc A\n  %q = copy %p\n  %p = copy %q\n  %r = copy %q")
        g = graph_for(sys)
        p, q, r = (sys.var_node[("main", v)] for v in "pqr")
        assert run_lcd_probe(g, (p, q)) == {p, q}
        assert run_lcd_probe(g, (q, r)) is None

    def test_three_cycle_collapses(self):
        sys = main_system(copy_graph_program(3, [(0, 1), (1, 2), (2, 0)]))
        g = scc_collapse(graph_for(sys))
        assert len({g.find(sys.var_node[("main", f"v{i}")]) for i in range(3)}) == 1

    def test_dag_unchanged(self):
        sys = main_system(copy_graph_program(4, [(0, 1), (1, 2), (0, 3)]))
        g = scc_collapse(graph_for(sys))
        assert len({g.find(sys.var_node[("main", f"v{i}")]) for i in range(4)}) == 4

    @given(st.integers(1, 12), st.data())
    def test_collapse_matches_brute_force(self, n, data):
        edges = data.draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=30))
        edges = [(a, b) for a, b in edges if a != b]
        sys = main_system(copy_graph_program(n, edges))
        g = scc_collapse(graph_for(sys))
        got = {}
        for i in range(n):
            got.setdefault(g.find(sys.var_node[("main", f"v{i}")]), set()).add(i)
        assert {frozenset(s) for s in got.values()} == scc_brute(range(n), edges)
        succ = {i: [b for a, b in edges if a == i] for i in range(n)}
        assert {frozenset(c) for c in tarjan_scc(range(n), lambda v: succ[v])} == scc_brute(range(n), edges)


class TestWorklist:
    @pytest.mark.parametrize("order,first", [("fifo", "a"), ("lifo", "c")])
    def test_insertion_orders(self, order, first):
        wl = make_worklist(order)
        ids = {"a": 1, "b": 2, "c": 3}
        for k in "abc":
            wl.push(ids[k])
        assert worklist_next(wl) == ids[first]

    def test_lrf_prefers_never_fired(self):
        wl = make_worklist("lrf")
        for n in (1, 2):
            wl.push(n)
        assert {wl.pop(), wl.pop()} == {1, 2}  # a then b fired
        for n in (1, 2, 3):
            wl.push(n)
        assert wl.pop() == 3
        assert wl.pop() == 1  # fired before 2

    def test_two_phase_defers_arrivals(self):
        wl = make_worklist("2lrf")
        wl.push(1)
        wl.push(2)
        assert wl.pop() == 1
        wl.push(3)
        assert wl.pop() == 2  # current list drains first
        assert wl.pop() == 3

    def test_topo_order(self):
        wl = make_worklist("topo", lambda: {5: 0, 7: 1, 6: 2})
        for n in (6, 7, 5):
            wl.push(n)
        assert [wl.pop() for _ in range(3)] == [5, 7, 6]

    def test_topo_needs_order(self):
        with pytest.raises(ValueError):
            make_worklist("topo")

    @pytest.mark.parametrize("order", ["fifo", "lifo", "lrf", "2lrf"])
    def test_empty_pop(self, order):
        with pytest.raises(EmptyWorklistError):
            make_worklist(order).pop()

    def test_no_duplicates(self):
        wl = make_worklist("fifo")
        wl.push(1)
        wl.push(1)
        assert len(wl) == 1


def test_stats_deterministic_across_runs():
    rng = random.Random(7)
    sys = generate(corpus_module(rng.randint(0, 1000)))
    cfg = SolverConfig(offline="hvn", strategy="wave")
    assert solve(sys, cfg).stats.deterministic() == solve(sys, cfg).stats.deterministic()
