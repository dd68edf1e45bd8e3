import logging

import pytest
from hypothesis import given, strategies as st

from ptakit.cli.generator import GenParams, generate_program
from ptakit.constraints import ADDR, COPY, LOAD, ObjectId, ResolutionError, generate, resolve_indirect_call
from ptakit.ir import parse_module


def system(body: str, extra: str = ""):
    return generate(parse_module(f"{extra}\nfunc @main() {{\ne:\n{body}\n  ret\n}}\n"))


ID_FN = "func @id(%x) {\ne:\n  ret %x\n}\nfunc @two(%x, %y) {\ne:\n  ret %x\n}\n"


class TestGenerate:
    def test_alloc(self):
        s = system("  %p = alloc A")
        assert s.dump() == "ADDROF main:%p A.0\n"

    def test_load(self):
        s = system("  %p = alloc A\n  %q = load %p")
        assert "LOAD main:%q main:%p" in s.dump().splitlines()

    def test_icall_is_deferred(self):
        s = system("  %fp = addr @id\n  %a = alloc A\n  %r = icall %fp(%a)", ID_FN)
        assert len(s.icalls) == 1
        copies = [c for c in s.constraints if c.kind == COPY]
        # only the callees' returns, no binding of the icall yet
        assert all(s.nodes[c.dst].kind == "ret" for c in copies)

    def test_golden_dump(self):
        s = system(
            "  %p = alloc A\n  %q = copy %p\n  %g = addr @G\n  store %p, %g\n  %f = field %p, 2\n  %r = call @id(%q)",
            "global @G\n" + ID_FN,
        )
        assert s.dump() == (
            "ADDROF main:%g @G.0\n"
            "ADDROF main:%p A.0\n"
            "COPY id:$ret id:%x\n"
            "COPY id:%x main:%q\n"
            "COPY main:%q main:%p\n"
            "COPY main:%r id:$ret\n"
            "COPY two:$ret two:%x\n"
            "FIELD main:%f main:%p 2\n"
            "STORE main:%g main:%p\n"
        )

    def test_objects_unique(self):
        s = system("  %p = alloc A\n  %q = alloc B\n  %g = addr @G", "global @G\n" + ID_FN)
        assert len(set(s.objects)) == len(s.objects)
        assert ObjectId("global", "G") in s.objects

    def test_field_fold(self):
        s = system("  %p = alloc A")
        loc = s.location(s.objects.index(next(o for o in s.objects if o.name == "A")), s.max_field)
        assert s.field_of(loc, 1) == s.location(s.nodes[loc].obj, 0)

    @given(st.integers(0, 10_000), st.integers(5, 150))
    def test_linear_and_deterministic(self, seed, size):
        m = parse_module(generate_program(seed, GenParams(size=size)))
        a, b = generate(m), generate(m)
        assert a.constraints == b.constraints
        assert len(a.constraints) <= 2 * m.instruction_count()
        assert len(set(a.constraints)) == len(a.constraints)
        for c in a.constraints:
            assert 0 <= c.dst < a.num_nodes and 0 <= c.src < a.num_nodes
            if c.kind == ADDR:
                assert a.is_location(c.src)
        for (fn, v), n in a.var_node.items():
            assert a.nodes[n].function == fn and a.nodes[n].name == v


class TestResolve:
    def setup_method(self):
        self.sys = system("  %fp = addr @id\n  %a = alloc A\n  %r = icall %fp(%a)", ID_FN)
        self.rec = self.sys.icalls[0]

    def test_binds_params_and_return(self):
        out = resolve_indirect_call(self.sys, self.rec, ObjectId("function", "id"))
        x = self.sys.var_node[("id", "x")]
        a = self.sys.var_node[("main", "a")]
        r = self.sys.var_node[("main", "r")]
        assert set(out) == {(COPY, x, a, 0), (COPY, r, self.sys.fn_ret["id"], 0)}

    def test_idempotent(self):
        assert resolve_indirect_call(self.sys, self.rec, "id")
        assert resolve_indirect_call(self.sys, self.rec, "id") == []

    def test_arity_mismatch_warns(self, caplog):
        with caplog.at_level(logging.WARNING, logger="ptakit"):
            assert resolve_indirect_call(self.sys, self.rec, "two") == []
        assert "expects 2" in caplog.text

    def test_rejects_non_function(self):
        with pytest.raises(ResolutionError):
            resolve_indirect_call(self.sys, self.rec, ObjectId("alloc", "A"))

    def test_fork_has_fresh_resolution_state(self):
        resolve_indirect_call(self.sys, self.rec, "id")
        assert resolve_indirect_call(self.sys.fork(), self.rec, "id")
