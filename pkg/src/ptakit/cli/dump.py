"""Canonical result dumps and the dump-backed result adapter.

A dump is JSON with sorted keys and fixed indentation, so identical
(module, configuration) pairs give identical bytes. Wall-clock timings are
left out for the same reason.
"""

from __future__ import annotations

import hashlib
import json
from pathlib import Path

from .. import __version__
from ..ir import InstrId, PointerModule
from ..query import AnalysisResult, Loc, Provenance, format_var

DUMP_FORMAT = 1


def source_hash(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def loc_text(loc: Loc) -> str:
    return f"{loc[0]}.{loc[1]}"


def parse_loc(text: str) -> Loc:
    label, _, f = text.rpartition(".")
    return label, int(f)


def iid_text(iid: InstrId) -> str:
    return str(iid)


def parse_iid(text: str) -> InstrId:
    fn, block, idx = text.rsplit(":", 2)
    return InstrId(fn, block, int(idx))


def provenance_block(module_sha: str, analysis: str, config: dict) -> dict:
    return {
        "format": DUMP_FORMAT,
        "tool": "ptakit",
        "version": __version__,
        "module_sha256": module_sha,
        "analysis": analysis,
        "config": config,
    }


def _stats(result: AnalysisResult) -> dict:
    st = result.solution.stats
    if hasattr(st, "deterministic"):
        return st.deterministic()
    if hasattr(st, "clones"):  # context / flow statistics
        out = {"clones": st.clones, "heap_objects": st.heap_objects}
        out.update({f"solver_{k}": v for k, v in st.solver.deterministic().items()})
        return out
    # unification
    return {"unions": st.unions, "finds": st.finds, "classes": st.classes}


def _per_point(result: AnalysisResult) -> dict:
    sol = result.solution
    out: dict[str, dict] = {}
    for ins in result.module.instructions():
        states = [sol.ins.get(((ins.iid.function, c), ins.iid)) for c in sol.contexts.get(ins.iid.function, ())]
        states = [s for s in states if s is not None]
        if not states:
            continue
        vars_: dict[str, set] = {}
        mem: dict[int, set] = {}
        for st in states:
            for v, locs in st.vars.items():
                if locs:
                    vars_.setdefault(v, set()).update(locs)
            for c, locs in st.mem.items():
                if locs:
                    mem.setdefault(c, set()).update(locs)

        def labels(locs):
            return sorted(loc_text(_flow_loc(sol, x)) for x in locs)

        out[iid_text(ins.iid)] = {
            "vars": {"%" + v: labels(locs) for v, locs in vars_.items()},
            "mem": {loc_text(_flow_loc(sol, c)): labels(locs) for c, locs in mem.items()},
        }
    return out


def _flow_loc(sol, loc: int) -> Loc:
    o, f = sol.location(loc)
    return o.label, f


def make_dump(result: AnalysisResult, module_sha: str) -> dict:
    prov = result.provenance
    doc = {
        "provenance": provenance_block(module_sha, prov.analysis, prov.config),
        "field_sensitive": result.field_sensitive,
        "points_to": {format_var(v): sorted(loc_text(x) for x in result.locations(v)) for v in result.variables()},
        "memory": {loc_text(k): sorted(loc_text(x) for x in v) for k, v in result.cells().items()},
        "call_graph": {iid_text(s): sorted(v) for s, v in result.call_graph.items()},
        "stats": _stats(result),
    }
    if prov.analysis in ("fs", "fscs"):
        doc["per_point"] = _per_point(result)
    return doc


def dump_text(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=1) + "\n"


def write_dump(path: Path | str, doc: dict) -> None:
    Path(path).write_text(dump_text(doc))


def read_dump(path: Path | str) -> dict:
    return json.loads(Path(path).read_text())


def cached(path: Path | str, provenance: dict) -> dict | None:
    """The dump at ``path`` if it was produced for exactly ``provenance``."""
    p = Path(path)
    if not p.is_file():
        return None
    try:
        doc = read_dump(p)
    except (OSError, ValueError):
        return None
    return doc if doc.get("provenance") == provenance else None


class DumpResult(AnalysisResult):
    """Answers queries from a dump's tables without re-solving."""

    def __init__(self, m: PointerModule, doc: dict):
        prov = doc["provenance"]
        super().__init__(m, None, Provenance(prov["analysis"], prov["config"], prov["module_sha256"]))
        self.doc = doc
        self.field_sensitive = doc.get("field_sensitive", True)
        self._table = {}
        for key, locs in doc["points_to"].items():
            fn, _, var = key[1:].partition(":")
            self._table[(fn, var[1:])] = frozenset(parse_loc(x) for x in locs)
        self._cg = {parse_iid(s): frozenset(v) for s, v in doc["call_graph"].items()}

    def _var_locs(self, var):
        return self._table.get(var, frozenset())

    def cells(self):
        return {parse_loc(k): frozenset(parse_loc(x) for x in v) for k, v in self.doc["memory"].items()}

    @property
    def call_graph(self):
        return self._cg
