"""Benchmark harness: per-program, per-configuration medians and ratios.

A configuration is written as ``+``-separated tokens, each either a bare
value (``wave``, ``hvn``, ``lcd``, ``bitvec``, ``lrf`` ...) or an explicit
``key=value`` pair with keys ``solver``, ``worklist``, ``offline``,
``cycles`` and ``pts``. ``naive`` alone is the reference configuration.
"""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import dataclass
from pathlib import Path

from ..andersen import SolverConfig, solve
from ..andersen.solver import DEFAULT_MAX_PROPS, Offline, OnlineCycles, Strategy
from ..andersen.worklist import WorklistOrder
from ..constraints import generate
from ..ir import parse_module
from ..ptset import SetBackendKind

DEFAULT_CONFIGS = ("naive", "wave", "deep", "diff", "naive+hvn")
CSV_FIELDS = (
    "program",
    "config",
    "instructions",
    "graph_nodes",
    "offline_merged",
    "propagations",
    "iterations",
    "millis",
)

_KEYS = {
    "solver": ("strategy", Strategy),
    "worklist": ("worklist", WorklistOrder),
    "offline": ("offline", Offline),
    "cycles": ("online_cycles", OnlineCycles),
    "pts": ("backend", SetBackendKind),
}


class ConfigSpecError(ValueError):
    pass


def parse_config(spec: str, max_props: int = DEFAULT_MAX_PROPS) -> SolverConfig:
    fields: dict[str, object] = {}
    for tok in filter(None, spec.split("+")):
        if "=" in tok:
            key, _, value = tok.partition("=")
            if key not in _KEYS:
                raise ConfigSpecError(f"unknown configuration key {key!r} in {spec!r}")
            attr, enum = _KEYS[key]
            try:
                fields[attr] = enum(value)
            except ValueError:
                raise ConfigSpecError(f"bad value {value!r} for {key} in {spec!r}") from None
            continue
        hits = [(attr, enum(tok)) for attr, enum in _KEYS.values() if tok in {e.value for e in enum}]
        if tok == "none" or len(hits) != 1:
            raise ConfigSpecError(f"ambiguous or unknown token {tok!r} in {spec!r}; use key=value")
        fields[hits[0][0]] = hits[0][1]
    if fields.get("backend") is SetBackendKind.BDD:
        raise ConfigSpecError("the bdd backend is not available")
    return SolverConfig(**fields, max_props=max_props)


@dataclass
class BenchRow:
    program: str
    config: str
    instructions: int
    graph_nodes: int
    offline_merged: int
    propagations: int
    iterations: int
    millis: float

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in CSV_FIELDS}


def bench_program(name: str, text: str, configs: dict[str, SolverConfig], repeat: int = 5, warmup: int = 1) -> list[BenchRow]:
    m = parse_module(text)
    sys = generate(m)
    n_instr = m.instruction_count()
    rows = []
    for label, cfg in configs.items():
        for _ in range(warmup):
            solve(sys, cfg)
        times = []
        sol = None
        for _ in range(max(1, repeat)):
            t0 = time.perf_counter()
            sol = solve(sys, cfg)
            times.append((time.perf_counter() - t0) * 1000.0)
        st = sol.stats
        rows.append(
            BenchRow(name, label, n_instr, st.graph_nodes, st.offline_merged, st.propagations, st.iterations, statistics.median(times))
        )
    return rows


def corpus_files(path: Path | str) -> list[Path]:
    p = Path(path)
    if p.is_file():
        return [p]
    return sorted(x for x in p.iterdir() if x.suffix == ".pir")


def cmd_bench(
    corpus: Path | str,
    configs: list[str] | tuple[str, ...] = DEFAULT_CONFIGS,
    *,
    repeat: int = 5,
    warmup: int = 1,
    baseline: str = "naive",
    max_props: int = DEFAULT_MAX_PROPS,
) -> list[BenchRow]:
    labels = list(dict.fromkeys(configs))
    if baseline not in labels:
        labels.insert(0, baseline)
    parsed = {label: parse_config(label, max_props) for label in labels}
    rows: list[BenchRow] = []
    for path in corpus_files(corpus):
        rows.extend(bench_program(path.name, path.read_text(), parsed, repeat, warmup))
    return rows


def rows_csv(rows: list[BenchRow]) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
    w.writeheader()
    for r in rows:
        d = r.as_dict()
        d["millis"] = f"{r.millis:.3f}"
        w.writerow(d)
    return buf.getvalue()


@dataclass
class RatioLine:
    config: str
    programs: int
    time_ratio: float  # median over programs of millis(config) / millis(baseline)
    speedup: float  # median of millis(baseline) / millis(config); > 1 is faster
    props_ratio: float  # median of propagations(config) / propagations(baseline)


def ratio_summary(rows: list[BenchRow], baseline: str = "naive") -> list[RatioLine]:
    base = {r.program: r for r in rows if r.config == baseline}
    by_cfg: dict[str, list[BenchRow]] = {}
    for r in rows:
        if r.program in base:
            by_cfg.setdefault(r.config, []).append(r)
    out = []
    for cfg, rs in by_cfg.items():
        tr = [r.millis / base[r.program].millis for r in rs if base[r.program].millis > 0]
        sp = [base[r.program].millis / r.millis for r in rs if r.millis > 0]
        pr = [r.propagations / base[r.program].propagations for r in rs if base[r.program].propagations > 0]
        out.append(
            RatioLine(
                cfg,
                len(rs),
                statistics.median(tr) if tr else float("nan"),
                statistics.median(sp) if sp else float("nan"),
                statistics.median(pr) if pr else float("nan"),
            )
        )
    return out


def ratio_table(lines: list[RatioLine], baseline: str = "naive") -> str:
    head = f"{'config':<28} {'programs':>8} {'time/' + baseline:>12} {'speedup':>9} {'props/' + baseline:>13}"
    body = [f"{x.config:<28} {x.programs:>8} {x.time_ratio:>12.3f} {x.speedup:>9.3f} {x.props_ratio:>13.3f}" for x in lines]
    return "\n".join([head, *body]) + "\n"
