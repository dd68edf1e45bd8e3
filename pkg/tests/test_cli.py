import importlib
import io
import json
import subprocess
import sys

import pytest

from helpers import IDIOMS
from ptakit.cli import DumpResult, GenParams, generate_program, main, parse_config, ratio_summary
from ptakit.cli.bench import BenchRow, ConfigSpecError
from ptakit.ir import parse_module, validate
from ptakit.query import analyze, format_var, points_to_set

cli_main = importlib.import_module("ptakit.cli.main")

IDENTITY = IDIOMS / "identity.pir"
DOUBLE = IDIOMS / "double_store.pir"


def run(*argv):
    out, err = io.StringIO(), io.StringIO()
    code = main([str(a) for a in argv], out, err)
    return code, out.getvalue(), err.getvalue()


class TestAnalyze:
    def test_stdout_dump(self):
        code, out, _ = run("analyze", IDENTITY)
        assert code == 0
        doc = json.loads(out)
        assert doc["points_to"]["@main:%x"] == ["A.0", "B.0"]
        assert doc["provenance"]["analysis"] == "fici"

    def test_queries(self, tmp_path):
        q = tmp_path / "q.txt"
        q.write_text("ALIAS %x %y\nPTS %x\n")
        code, out, _ = run("analyze", IDENTITY, "--analysis", "kcfa", "--k", "1", "--queries", q)
        assert code == 0
        assert out.splitlines() == ["ALIAS %x %y => false", "PTS %x => {A.0}"]

    def test_unknown_variable_query(self, tmp_path):
        q = tmp_path / "q.txt"
        q.write_text("PTS %nope\n")
        code, _, err = run("analyze", IDENTITY, "--queries", q)
        assert code == 1 and "unknown variable" in err

    def test_cache_byte_identical(self, tmp_path):
        dump = tmp_path / "d.json"
        assert run("analyze", DOUBLE, "--analysis", "fs", "--dump", dump)[0] == 0
        first = dump.read_bytes()
        code, _, err = run("analyze", DOUBLE, "--analysis", "fs", "--dump", dump)
        assert code == 0 and "cache hit" in err
        assert dump.read_bytes() == first
        # a different configuration recomputes
        code, _, err = run("analyze", DOUBLE, "--analysis", "fici", "--dump", dump)
        assert "cache hit" not in err and dump.read_bytes() != first

    def test_cached_queries_match_fresh(self, tmp_path):
        dump, q = tmp_path / "d.json", tmp_path / "q.txt"
        q.write_text("PTS %x\nALIASSET %a\nPB %y B\n")
        _, fresh, _ = run("analyze", IDENTITY, "--dump", dump, "--queries", q)
        _, again, err = run("analyze", IDENTITY, "--dump", dump, "--queries", q)
        assert "cache hit" in err and fresh == again

    def test_dump_matches_query_api(self, tmp_path):
        m = parse_module(DOUBLE.read_text())
        for analysis in ("fici", "steens", "fs"):
            _, out, _ = run("analyze", DOUBLE, "--analysis", analysis)
            doc = json.loads(out)
            r = analyze(m, analysis)
            for v in r.variables():
                assert doc["points_to"][format_var(v)] == [f"{o}.{f}" for o, f in points_to_set(r, v)]
            cached = DumpResult(m, doc)
            assert all(cached.locations(v) == r.locations(v) for v in r.variables())

    def test_dot_outputs(self, tmp_path):
        icfg, pdg = tmp_path / "i.dot", tmp_path / "p.dot"
        code, _, _ = run("analyze", IDENTITY, "--icfg-dot", icfg, "--pdg-dot", pdg, "--dump", tmp_path / "d.json")
        assert code == 0
        assert icfg.read_text().startswith('digraph "icfg"')
        assert '[label="call"]' in pdg.read_text()


class TestExitCodes:
    @pytest.mark.parametrize(
        "argv",
        [
            ("--analysis", "fici", "--k", "1"),
            ("--analysis", "kcfa", "--k", "9"),
            ("--analysis", "fs", "--solver", "wave"),
            ("--analysis", "steens", "--max-props", "5"),
            ("--max-props", "0"),
            ("--bogus",),
        ],
    )
    def test_usage_errors(self, tmp_path, argv):
        dump = tmp_path / "d.json"
        code, _, err = run("analyze", IDENTITY, "--dump", dump, *argv)
        assert code == 1 and err.startswith("error:")
        assert not dump.exists()

    def test_missing_input(self, tmp_path):
        assert run("analyze", tmp_path / "none.pir")[0] == 1

    def test_parse_error(self, tmp_path):
        bad = tmp_path / "bad.pir"
        bad.write_text("func @main() {\ne:\n  %p = bogus %q\n}\n")
        code, _, err = run("analyze", bad)
        assert code == 1 and "error" in err

    def test_cap(self):
        code, _, err = run("analyze", IDIOMS / "linked_list.pir", "--max-props", "1")
        assert code == 2 and "resource cap" in err
        assert run("analyze", IDENTITY, "--analysis", "kcfa", "--clone-cap", "1")[0] == 2
        assert run("analyze", IDIOMS / "linked_list.pir", "--analysis", "fs", "--max-props", "2")[0] == 2

    def test_internal(self, monkeypatch):
        def broken(result, sha):
            doc = real(result, sha)
            doc["provenance"] = {}
            return doc

        real = cli_main.make_dump
        monkeypatch.setattr(cli_main, "make_dump", broken)
        code, _, err = run("analyze", IDENTITY)
        assert code == 3 and "invariant" in err

    def test_help(self):
        assert run("--help")[0] == 0


class TestGen:
    def test_seed_determinism(self):
        _, a, _ = run("gen", "--seed", "7", "--size", "40")
        _, b, _ = run("gen", "--seed", "7", "--size", "40")
        _, c, _ = run("gen", "--seed", "8", "--size", "40")
        assert a == b and a != c

    def test_deterministic_has_single_target_branches(self):
        _, text, _ = run("gen", "--seed", "3", "--size", "120", "--deterministic")
        m = parse_module(text)
        assert all(len(i.targets) == 1 for i in m.instructions() if i.op == "br")

    def test_output_file_and_weights(self, tmp_path):
        out = tmp_path / "p.pir"
        assert run("gen", "--seed", "1", "--weights", "alloc=5,load=1", "-o", out)[0] == 0
        parse_module(out.read_text())
        assert run("gen", "--weights", "nonsense")[0] == 1

    def test_thousand_programs_validate(self):
        for seed in range(1000):
            text = generate_program(seed, GenParams(size=5 + seed % 80, deterministic=seed % 2 == 0, recursion=seed % 3 != 0))
            m = parse_module(text)
            assert not [d for d in validate(m) if d.severity == "error"]


class TestInterpret:
    def test_facts(self):
        code, out, _ = run("interpret", IDENTITY)
        assert code == 0
        assert "main:entry:2 out %x -> A.0" in out
        assert out.rstrip().splitlines()[-1].startswith("outcome: ret")

    def test_step_cap(self):
        assert run("interpret", IDENTITY, "--max-steps", "2")[0] == 2

    def test_rejects_nondeterministic(self):
        code, _, err = run("interpret", IDIOMS / "list_loop.pir")
        assert code == 1 and err.startswith("error:")


class TestDiff:
    def dumps(self, tmp_path, path, *specs):
        out = []
        for i, spec in enumerate(specs):
            d = tmp_path / f"{i}.json"
            assert run("analyze", path, "--dump", d, *spec)[0] == 0
            out.append(d)
        return out

    def test_equal(self, tmp_path):
        a, b = self.dumps(tmp_path, IDENTITY, ("--solver", "naive"), ("--solver", "diff", "--offline", "hu"))
        code, out, _ = run("diff", a, b)
        assert code == 0 and "clean" in out

    def test_subset_lattice(self, tmp_path):
        fscs, fici, steens = self.dumps(
            tmp_path, IDIOMS / "wrapper_alloc.pir", ("--analysis", "fscs", "--k", "1"), (), ("--analysis", "steens")
        )
        assert run("diff", fscs, fici, "--mode", "subset")[0] == 0
        assert run("diff", fici, steens, "--mode", "subset")[0] == 0
        code, out, _ = run("diff", fici, fscs)
        assert code == 1 and "difference" in out

    def test_different_modules(self, tmp_path):
        (a,) = self.dumps(tmp_path, IDENTITY, ())
        other = tmp_path / "other"
        other.mkdir()
        (b,) = self.dumps(other, DOUBLE, ("--analysis", "steens"))
        code, out, _ = run("diff", a, b)
        assert code == 1 and "different modules" in out


class TestBench:
    def test_rows_and_ratios(self, tmp_path):
        corpus = tmp_path / "c"
        corpus.mkdir()
        for s in range(2):
            (corpus / f"p{s}.pir").write_text(generate_program(s, GenParams(size=60)))
        csv_path = tmp_path / "r.csv"
        code, _, err = run("bench", corpus, "--configs", "naive,wave+hvn", "--repeat", "1", "--warmup", "0", "--csv", csv_path)
        assert code == 0
        lines = csv_path.read_text().strip().splitlines()
        assert len(lines) == 1 + 2 * 2
        assert "speedup" in err

    def test_self_ratio_is_one(self):
        rows = [BenchRow(f"p{i}", c, 10, 5, 0, 100 + i, 3, 2.0 + i) for i in range(3) for c in ("naive", "wave")]
        lines = {x.config: x for x in ratio_summary(rows)}
        assert lines["naive"].time_ratio == pytest.approx(1.0, rel=0.2)
        assert lines["naive"].props_ratio == 1.0

    def test_parse_config(self):
        cfg = parse_config("wave+hvn+lcd+sorted")
        assert cfg.strategy.value == "wave" and cfg.offline.value == "hvn"
        assert parse_config("solver=diff+worklist=lrf").worklist.value == "lrf"
        for bad in ("bogus", "solver=fast", "pts=bdd", "none"):
            with pytest.raises(ConfigSpecError):
                parse_config(bad)

    def test_bad_config_exit(self, tmp_path):
        assert run("bench", tmp_path, "--configs", "bogus")[0] == 1


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "ptakit", "analyze", str(IDENTITY)], capture_output=True, text=True)
    assert proc.returncode == 0 and '"@main:%x"' in proc.stdout
