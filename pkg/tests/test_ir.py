import pytest
from hypothesis import given, strategies as st

from ptakit.cli.generator import GenParams, generate_program
from ptakit.ir import (
    MAX_FIELD,
    InstrId,
    IRError,
    build_cfg,
    cyclic_blocks,
    parse_module,
    pretty_print,
    validate,
)

MINIMAL = "func @main() { entry: %p = alloc A \n ret }"


class TestParse:
    def test_minimal_program(self):
        m = parse_module(MINIMAL)
        assert len(m.functions) == 1
        ops = [i.op for i in m.instructions()]
        assert ops.count("alloc") == 1
        assert m.entry == "main"

    def test_dangling_variable(self):
        with pytest.raises(IRError) as exc:
            parse_module("func @main() { entry: %p = copy %q \n ret }")
        assert any("%q" in d.message for d in exc.value.diagnostics)

    def test_undefined_store_pointer_names_variable_and_line(self):
        text = "func @main() {\nentry:\n  %a = alloc A\n  store %a, %b\n  ret\n}\n"
        with pytest.raises(IRError) as exc:
            parse_module(text)
        (d,) = exc.value.diagnostics
        assert "%b" in d.message and d.line == 4

    def test_syntax_error_has_position(self):
        with pytest.raises(IRError) as exc:
            parse_module("func @main() {\nentry:\n  %p = bogus %q\n  ret\n}\n")
        d = exc.value.diagnostics[0]
        assert d.severity == "error" and (d.line, d.col) >= (3, 1)
        assert "expected" in d.message

    def test_comments_and_whitespace(self):
        m = parse_module("; header\nfunc   @main( ) {   entry:  %p = alloc A ; trailing\n ret }")
        assert [i.op for i in m.instructions()] == ["alloc", "ret"]

    def test_field_bound(self):
        with pytest.raises(IRError):
            parse_module(f"func @main() {{ e: %p = alloc A\n %q = field %p, {MAX_FIELD + 1}\n ret }}")
        m = parse_module(f"func @main() {{ e: %p = alloc A\n %q = field %p, {MAX_FIELD}\n ret }}")
        assert m.instruction(InstrId("main", "e", 1)).offset == MAX_FIELD

    def test_instruction_ids(self):
        m = parse_module("func @main() { a: %p = alloc A\n br b\n b: ret }")
        assert [str(i.iid) for i in m.instructions()] == ["main:a:0", "main:a:1", "main:b:0"]


class TestValidate:
    def test_well_formed(self):
        assert validate(parse_module(MINIMAL)) == []

    def test_two_terminators(self):
        from ptakit.ir import _Parser  # unvalidated parse

        m = _Parser("func @main() { e: ret\n ret }").module("main")
        errors = [d for d in validate(m) if d.severity == "error"]
        assert len(errors) == 1

    def test_direct_call_arity(self):
        from ptakit.ir import _Parser

        text = "func @f(%x) { e: ret %x }\nfunc @main() { e: %a = alloc A\n %r = call @f(%a, %a)\n ret }"
        errors = [d for d in validate(_Parser(text).module("main")) if d.severity == "error"]
        assert len(errors) == 1 and "@f" in errors[0].message

    def test_unreachable_block_warning(self):
        m = parse_module("func @main() { e: ret\n dead: ret }")
        (d,) = validate(m)
        assert d.severity == "warning" and "dead" in d.message

    def test_duplicate_names(self):
        with pytest.raises(IRError):
            parse_module("global @g\nglobal @g\nfunc @main() { e: ret }")
        with pytest.raises(IRError):
            parse_module("func @main() { e: %p = alloc A\n %q = alloc A\n ret }")

    def test_missing_entry(self):
        with pytest.raises(IRError):
            parse_module("func @f() { e: ret }")

    def test_deterministic(self):
        from ptakit.ir import _Parser

        text = "func @main() { e: %p = copy %x\n store %p, %y\n br nowhere }"
        m = _Parser(text).module("main")
        assert validate(m) == validate(m)


class TestCFG:
    def test_straight_line(self):
        f = parse_module("func @main() { e: %a = alloc A\n %b = copy %a\n ret }").functions[0]
        cfg = build_cfg(f)
        assert len(cfg.nodes) == 3 and len(cfg.edges()) == 2

    def test_diamond(self):
        f = parse_module("func @main() { e: br l1, l2\n l1: br j\n l2: br j\n j: ret }").functions[0]
        cfg = build_cfg(f)
        entry, join = InstrId("main", "e", 0), InstrId("main", "j", 0)
        paths = [[entry, s, join] for s in cfg.succ[entry] if join in cfg.succ[s]]
        assert len(paths) == 2
        assert cfg.pred[cfg.entry] == [] or not cfg.pred[cfg.entry]

    def test_self_loop(self):
        f = parse_module("func @main() { e: br l\n l: %p = alloc A\n br l, x\n x: ret }").functions[0]
        assert cyclic_blocks(f) == {"l"}
        cfg = build_cfg(f)
        br = InstrId("main", "l", 1)
        assert InstrId("main", "l", 0) in cfg.succ[br]

    @given(st.integers(0, 10_000), st.integers(5, 120))
    def test_edge_count(self, seed, size):
        m = parse_module(generate_program(seed, GenParams(size=size)))
        for f in m.functions:
            cfg = build_cfg(f)
            expect = 0
            for b in f.blocks:
                expect += len(b.instructions) - 1
                last = b.instructions[-1]
                if last.op == "br":
                    expect += len(last.targets)
            assert len(cfg.edges()) == expect
            assert len(cfg.nodes) == sum(len(b.instructions) for b in f.blocks)


class TestPrinter:
    def test_alloc_text(self):
        assert "  %p = alloc A\n" in pretty_print(parse_module(MINIMAL))

    def test_declaration_order(self):
        m = parse_module("func @zeta() { e: ret }\nfunc @main() { e: ret }")
        text = pretty_print(m)
        assert text.index("@zeta") < text.index("@main")

    @given(st.integers(0, 10_000), st.integers(5, 150), st.booleans())
    def test_roundtrip(self, seed, size, det):
        m = parse_module(generate_program(seed, GenParams(size=size, deterministic=det)))
        again = parse_module(pretty_print(m))
        assert again == m
        assert pretty_print(again) == pretty_print(m)

    def test_roundtrip_idioms(self):
        from helpers import IDIOMS

        for p in IDIOMS.glob("*.pir"):
            m = parse_module(p.read_text())
            assert parse_module(pretty_print(m)) == m
