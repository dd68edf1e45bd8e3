"""Command-line driver: ``analyze | gen | interpret | diff | bench``.

Exit codes: 0 ok, 1 diagnostics (bad input, bad flags, differences found),
2 a resource cap was hit, 3 an internal invariant was violated.
"""

from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path

from ..andersen import SolverConfig, SolverLimitError, solve
from ..andersen.solver import DEFAULT_MAX_PROPS
from ..constraints import generate
from ..derived import build_icfg, build_memory_ssa, build_pdg, icfg_dot, pdg_dot
from ..ir import MAX_FIELD, IRError, parse_module, validate
from ..query import ANALYSES, QueryError, run_queries, wrap
from ..sensitivity import CloneLimitError, FlowLimitError, solve_flow_sensitive, solve_fscs, solve_kcfa
from ..sensitivity.flow import DEFAULT_MAX_STEPS
from ..sensitivity.kcfa import DEFAULT_CLONE_CAP
from ..steensgaard import solve_unify_system
from .bench import DEFAULT_CONFIGS, ConfigSpecError, cmd_bench, ratio_summary, ratio_table, rows_csv
from .diff import diff_dumps
from .dump import DumpResult, cached, dump_text, make_dump, provenance_block, read_dump, source_hash
from .generator import DEFAULT_WEIGHTS, GenParams, generate_program
from .interpreter import DEFAULT_INSTANCE_CAP, DEFAULT_STEP_CAP, InterpreterError, interpret

EXIT_OK, EXIT_DIAG, EXIT_CAP, EXIT_INTERNAL = 0, 1, 2, 3
K_LIMITS = {"kcfa": 3, "fscs": 2}
SOLVER_FLAGS = ("solver", "worklist", "offline", "cycles", "pts")

log = logging.getLogger("ptakit")


class UsageError(Exception):
    pass


class InvariantError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # exit code 2 is reserved for resource caps
        raise UsageError(message)


@dataclass
class RunConfig:
    input: Path
    analysis: str = "fici"
    k: int | None = None
    solver: str | None = None
    worklist: str | None = None
    offline: str | None = None
    cycles: str | None = None
    pts: str | None = None
    queries: Path | None = None
    dump: Path | None = None
    max_props: int | None = None
    clone_cap: int = DEFAULT_CLONE_CAP
    icfg_dot: Path | None = None
    pdg_dot: Path | None = None
    explicit: set[str] = field(default_factory=set)

    def validate(self) -> None:
        if self.analysis not in ANALYSES:
            raise UsageError(f"unknown analysis {self.analysis!r}")
        if self.k is not None:
            if self.analysis not in K_LIMITS:
                raise UsageError(f"--k applies only to kcfa and fscs, not {self.analysis}")
            if not 0 <= self.k <= K_LIMITS[self.analysis]:
                raise UsageError(f"--k for {self.analysis} must be in 0..{K_LIMITS[self.analysis]}")
        used = [f for f in SOLVER_FLAGS if getattr(self, f) is not None]
        if used and self.analysis not in ("fici", "kcfa"):
            raise UsageError(f"--{used[0]} applies only to fici and kcfa, not {self.analysis}")
        if self.max_props is not None and self.analysis == "steens":
            raise UsageError("--max-props does not apply to steens")
        if self.max_props is not None and self.max_props <= 0:
            raise UsageError("--max-props must be positive")

    @property
    def k_value(self) -> int:
        return 1 if self.k is None else self.k

    def solver_config(self) -> SolverConfig:
        return SolverConfig(
            offline=self.offline or "none",
            online_cycles=self.cycles or "none",
            strategy=self.solver or "wave",
            worklist=self.worklist or "fifo",
            backend=self.pts or "bitvec",
            max_props=self.max_props or DEFAULT_MAX_PROPS,
        )

    def describe(self) -> dict:
        """Everything that can change the result; recorded in dump provenance."""
        out: dict = {"max_field": MAX_FIELD}
        if self.analysis in ("fici", "kcfa"):
            out.update(self.solver_config().describe())
        if self.analysis in K_LIMITS:
            out["k"] = self.k_value
            out["clone_cap"] = self.clone_cap
        if self.analysis in ("fs", "fscs"):
            out["max_steps"] = self.max_props or DEFAULT_MAX_STEPS
        return out


def run_analysis(m, cfg: RunConfig):
    a = cfg.analysis
    if a == "fici":
        sol = solve(generate(m), cfg.solver_config())
    elif a == "steens":
        sol = solve_unify_system(generate(m))
    elif a == "kcfa":
        sol = solve_kcfa(m, cfg.k_value, cfg.solver_config(), clone_cap=cfg.clone_cap)
    elif a == "fs":
        sol = solve_flow_sensitive(m, max_steps=cfg.max_props or DEFAULT_MAX_STEPS)
    else:
        sol = solve_fscs(m, cfg.k_value, clone_cap=cfg.clone_cap, max_steps=cfg.max_props or DEFAULT_MAX_STEPS)
    return wrap(m, sol, a, cfg.describe())


def cmd_analyze(cfg: RunConfig, out=sys.stdout, err=sys.stderr) -> int:
    cfg.validate()
    data = cfg.input.read_bytes()
    m = parse_module(data.decode())
    for d in validate(m):
        print(f"{cfg.input}:{d}", file=err)
    sha = source_hash(data)
    prov = provenance_block(sha, cfg.analysis, cfg.describe())
    doc = cached(cfg.dump, prov) if cfg.dump is not None else None
    needs_solution = cfg.icfg_dot is not None or cfg.pdg_dot is not None
    if doc is not None and not needs_solution:
        print(f"cache hit: {cfg.dump}", file=err)
        result = DumpResult(m, doc)
    else:
        result = run_analysis(m, cfg)
        doc = make_dump(result, sha)
        if doc["provenance"] != prov:
            raise InvariantError("dump provenance does not match the run configuration")
        if cfg.dump is not None:
            text = dump_text(doc)
            if not cfg.dump.is_file() or cfg.dump.read_text() != text:
                cfg.dump.write_text(text)
    if cfg.icfg_dot is not None:
        cfg.icfg_dot.write_text(icfg_dot(build_icfg(m, result)))
    if cfg.pdg_dot is not None:
        cfg.pdg_dot.write_text(pdg_dot(build_pdg(m, build_memory_ssa(m, result), result)))
    if cfg.queries is not None:
        for line in run_queries(result, cfg.queries.read_text()):
            print(line, file=out)
    elif cfg.dump is None:
        out.write(dump_text(doc))
    return EXIT_OK


# -- argument parsing ------------------------------------------------------------


def _weights(text: str) -> dict[str, float]:
    w = dict(DEFAULT_WEIGHTS)
    for part in filter(None, text.split(",")):
        key, _, val = part.partition("=")
        if key not in w:
            raise UsageError(f"unknown instruction kind {key!r} in --weights")
        try:
            w[key] = float(val)
        except ValueError:
            raise UsageError(f"bad weight {val!r} for {key}") from None
    return w


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="ptakit", description="Pointer analyses over a miniature pointer IR.")
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="verb", required=True, parser_class=_Parser)

    a = sub.add_parser("analyze", help="run one analysis, write a dump, answer queries")
    a.add_argument("input", type=Path)
    a.add_argument("--analysis", choices=ANALYSES, default="fici")
    a.add_argument("--k", type=int)
    a.add_argument("--solver", choices=("naive", "wave", "deep", "diff"))
    a.add_argument("--worklist", choices=("fifo", "lifo", "lrf", "2lrf", "topo"))
    a.add_argument("--offline", choices=("none", "hvn", "hu"))
    a.add_argument("--cycles", choices=("none", "lcd", "hcd", "both"))
    a.add_argument("--pts", choices=("bitvec", "sorted"))
    a.add_argument("--queries", type=Path)
    a.add_argument("--dump", type=Path)
    a.add_argument("--max-props", type=int)
    a.add_argument("--clone-cap", type=int, default=DEFAULT_CLONE_CAP)
    a.add_argument("--icfg-dot", type=Path)
    a.add_argument("--pdg-dot", type=Path)

    g = sub.add_parser("gen", help="emit a random program")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--size", type=int, default=50)
    g.add_argument("--functions", type=int)
    g.add_argument("--vars", type=int, default=10)
    g.add_argument("--globals", type=int, default=2)
    g.add_argument("--weights", type=str, default="")
    g.add_argument("--branch-density", type=float, default=0.5)
    g.add_argument("--icall-density", type=float)
    g.add_argument("--no-recursion", action="store_true")
    g.add_argument("--deterministic", action="store_true")
    g.add_argument("-o", "--output", type=Path)

    i = sub.add_parser("interpret", help="run a deterministic program concretely")
    i.add_argument("input", type=Path)
    i.add_argument("--max-steps", type=int, default=DEFAULT_STEP_CAP)
    i.add_argument("--max-instances", type=int, default=DEFAULT_INSTANCE_CAP)

    d = sub.add_parser("diff", help="compare two dumps")
    d.add_argument("a", type=Path)
    d.add_argument("b", type=Path)
    d.add_argument("--mode", choices=("equal", "subset"), default="equal")
    d.add_argument("--fields", choices=("auto", "keep", "collapse"), default="auto")

    b = sub.add_parser("bench", help="time solver configurations over a corpus")
    b.add_argument("corpus", type=Path)
    b.add_argument("--configs", default=",".join(DEFAULT_CONFIGS))
    b.add_argument("--repeat", type=int, default=5)
    b.add_argument("--warmup", type=int, default=1)
    b.add_argument("--baseline", default="naive")
    b.add_argument("--max-props", type=int, default=DEFAULT_MAX_PROPS)
    b.add_argument("--csv", type=Path)
    return p


def _dispatch(ns, out, err) -> int:
    if ns.verb == "analyze":
        cfg = RunConfig(
            input=ns.input,
            analysis=ns.analysis,
            k=ns.k,
            solver=ns.solver,
            worklist=ns.worklist,
            offline=ns.offline,
            cycles=ns.cycles,
            pts=ns.pts,
            queries=ns.queries,
            dump=ns.dump,
            max_props=ns.max_props,
            clone_cap=ns.clone_cap,
            icfg_dot=ns.icfg_dot,
            pdg_dot=ns.pdg_dot,
        )
        return cmd_analyze(cfg, out, err)
    if ns.verb == "gen":
        params = GenParams(
            size=ns.size,
            functions=ns.functions,
            vars_per_function=ns.vars,
            globals=ns.globals,
            weights=_weights(ns.weights),
            branch_density=ns.branch_density,
            icall_density=ns.icall_density,
            recursion=not ns.no_recursion,
            deterministic=ns.deterministic,
        )
        text = generate_program(ns.seed, params)
        errors = [d for d in validate(parse_module(text)) if d.severity == "error"]
        if errors:
            raise InvariantError(f"generator produced an invalid program: {errors[0]}")
        if ns.output is not None:
            ns.output.write_text(text)
        else:
            out.write(text)
        return EXIT_OK
    if ns.verb == "interpret":
        m = parse_module(ns.input.read_text())
        trace = interpret(m, step_cap=ns.max_steps, instance_cap=ns.max_instances)
        for line in trace.lines():
            print(line, file=out)
        print(f"outcome: {trace.outcome} after {trace.steps} steps", file=out)
        return EXIT_CAP if trace.outcome.startswith("cap") else EXIT_OK
    if ns.verb == "diff":
        report = diff_dumps(read_dump(ns.a), read_dump(ns.b), ns.mode, ns.fields)
        out.write(report.text())
        return EXIT_OK if report.clean else EXIT_DIAG
    if ns.verb == "bench":
        configs = [c.strip() for c in ns.configs.split(",") if c.strip()]
        rows = cmd_bench(ns.corpus, configs, repeat=ns.repeat, warmup=ns.warmup, baseline=ns.baseline, max_props=ns.max_props)
        text = rows_csv(rows)
        if ns.csv is not None:
            ns.csv.write_text(text)
        else:
            out.write(text)
        err.write(ratio_table(ratio_summary(rows, ns.baseline), ns.baseline))
        return EXIT_OK
    raise UsageError(f"unknown verb {ns.verb}")


def main(argv: list[str] | None = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    try:
        ns = build_parser().parse_args(argv)
        logging.basicConfig(level=logging.INFO if ns.verbose else logging.ERROR, stream=err)
        return _dispatch(ns, out, err)
    except (UsageError, ConfigSpecError, QueryError, InterpreterError) as e:
        print(f"error: {e}", file=err)
        return EXIT_DIAG
    except IRError as e:
        for d in e.diagnostics:
            print(f"error: {d}", file=err)
        return EXIT_DIAG
    except OSError as e:
        print(f"error: {e}", file=err)
        return EXIT_DIAG
    except (SolverLimitError, CloneLimitError, FlowLimitError) as e:
        print(f"resource cap: {e}", file=err)
        return EXIT_CAP
    except (InvariantError, AssertionError) as e:
        print(f"internal invariant violated: {e}", file=err)
        return EXIT_INTERNAL
    except SystemExit as e:  # --help
        return int(e.code or 0)
