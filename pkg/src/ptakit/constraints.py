"""IR to subset-constraint translation.

Every pointer variable, every function return slot and every field of every
abstract object becomes a node with a dense integer id. Object fields double
as the keys stored in points-to sets.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import NamedTuple

from .ir import MAX_FIELD, InstrId, PointerModule

log = logging.getLogger(__name__)

ADDR, COPY, LOAD, STORE, FIELD = "ADDROF", "COPY", "LOAD", "STORE", "FIELD"


class ObjectId(NamedTuple):
    kind: str  # "alloc" | "global" | "function"
    name: str
    site: InstrId | None = None
    context: tuple = ()

    @property
    def label(self) -> str:
        return self.name if self.kind == "alloc" else "@" + self.name


class NodeInfo(NamedTuple):
    kind: str  # "var" | "ret" | "field"
    function: str | None
    name: str | None
    obj: int = -1
    field: int = 0


class Constraint(NamedTuple):
    """``kind`` with ``dst``/``src`` nodes.

    ADDROF dst ⊇ {src};  COPY dst ⊇ src;  LOAD dst ⊇ *src;
    STORE *dst ⊇ src;  FIELD dst ⊇ src.offset
    """

    kind: str
    dst: int
    src: int
    offset: int = 0


class IndirectCall(NamedTuple):
    index: int
    site: InstrId
    fnptr: int
    args: tuple[int, ...]
    dest: int | None


class ResolutionError(ValueError):
    pass


@dataclass
class ConstraintSystem:
    max_field: int
    nodes: list[NodeInfo] = field(default_factory=list)
    objects: list[ObjectId] = field(default_factory=list)
    obj_base: list[int] = field(default_factory=list)
    constraints: list[Constraint] = field(default_factory=list)
    icalls: list[IndirectCall] = field(default_factory=list)
    direct_calls: list[tuple[InstrId, str]] = field(default_factory=list)
    var_node: dict[tuple[str, str], int] = field(default_factory=dict)
    fn_params: dict[str, tuple[int, ...]] = field(default_factory=dict)
    fn_ret: dict[str, int] = field(default_factory=dict)
    fn_object: dict[str, int] = field(default_factory=dict)
    # node -> representative after offline merging (None: identity)
    merge_map: list[int] | None = None
    _resolved: set[tuple[int, str]] = field(default_factory=set, repr=False)

    # -- node helpers ------------------------------------------------------
    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    def is_location(self, n: int) -> bool:
        return self.nodes[n].kind == "field"

    def location(self, obj: int, fld: int) -> int:
        return self.obj_base[obj] + fld

    def field_of(self, loc: int, offset: int) -> int:
        """Location ``offset`` fields past ``loc``; past MAX_FIELD folds to field 0."""
        info = self.nodes[loc]
        f = info.field + offset
        if f > self.max_field:
            f = 0
        return self.obj_base[info.obj] + f

    def function_of_location(self, loc: int) -> str | None:
        info = self.nodes[loc]
        if info.kind != "field" or info.field != 0:
            return None
        obj = self.objects[info.obj]
        return obj.name if obj.kind == "function" else None

    def node_name(self, n: int) -> str:
        info = self.nodes[n]
        if info.kind == "var":
            return f"{info.function}:%{info.name}"
        if info.kind == "ret":
            return f"{info.function}:$ret"
        return f"{self.objects[info.obj].label}.{info.field}"

    def variable_nodes(self) -> list[int]:
        return [n for n, i in enumerate(self.nodes) if i.kind == "var"]

    def fork(self) -> ConstraintSystem:
        """Shallow copy sharing tables but with fresh resolution state."""
        clone = ConstraintSystem.__new__(ConstraintSystem)
        clone.__dict__.update(self.__dict__)
        clone._resolved = set()
        return clone

    def dump(self) -> str:
        lines = []
        for c in self.constraints:
            d, s = self.node_name(c.dst), self.node_name(c.src)
            lines.append(f"{c.kind} {d} {s} {c.offset}" if c.kind == FIELD else f"{c.kind} {d} {s}")
        return "\n".join(sorted(lines)) + ("\n" if lines else "")


def _add_object(sys: ConstraintSystem, obj: ObjectId) -> int:
    idx = len(sys.objects)
    sys.objects.append(obj)
    sys.obj_base.append(len(sys.nodes))
    for f in range(sys.max_field + 1):
        sys.nodes.append(NodeInfo("field", None, None, idx, f))
    return idx


def generate(m: PointerModule, *, max_field: int = MAX_FIELD) -> ConstraintSystem:
    sys = ConstraintSystem(max_field=max_field)
    for f in m.functions:
        for v in f.variables():
            sys.var_node[(f.name, v)] = len(sys.nodes)
            sys.nodes.append(NodeInfo("var", f.name, v))
        sys.fn_ret[f.name] = len(sys.nodes)
        sys.nodes.append(NodeInfo("ret", f.name, None))
        sys.fn_params[f.name] = tuple(sys.var_node[(f.name, p)] for p in f.params)

    named: dict[str, int] = {}
    for g in m.globals:
        named[g.name] = _add_object(sys, ObjectId("global", g.name))
    for f in m.functions:
        named[f.name] = _add_object(sys, ObjectId("function", f.name))
        sys.fn_object[f.name] = named[f.name]
    alloc_obj: dict[InstrId, int] = {}
    for ins in m.instructions():
        if ins.op == "alloc":
            alloc_obj[ins.iid] = _add_object(sys, ObjectId("alloc", ins.symbol, ins.iid))

    seen: set[Constraint] = set()

    def emit(c: Constraint) -> None:
        if c not in seen:
            seen.add(c)
            sys.constraints.append(c)

    for f in m.functions:
        var = {v: n for (fn, v), n in sys.var_node.items() if fn == f.name}
        for ins in f.instructions():
            op = ins.op
            d = var[ins.dest] if ins.dest is not None else None
            if op == "alloc":
                emit(Constraint(ADDR, d, sys.location(alloc_obj[ins.iid], 0)))
            elif op == "addr":
                emit(Constraint(ADDR, d, sys.location(named[ins.symbol], 0)))
            elif op == "copy":
                emit(Constraint(COPY, d, var[ins.operands[0]]))
            elif op == "load":
                emit(Constraint(LOAD, d, var[ins.operands[0]]))
            elif op == "store":
                v, p = ins.operands
                emit(Constraint(STORE, var[p], var[v]))
            elif op == "field":
                emit(Constraint(FIELD, d, var[ins.operands[0]], ins.offset))
            elif op == "call":
                sys.direct_calls.append((ins.iid, ins.symbol))
                for param, a in zip(sys.fn_params[ins.symbol], ins.operands):
                    emit(Constraint(COPY, param, var[a]))
                emit(Constraint(COPY, d, sys.fn_ret[ins.symbol]))
            elif op == "icall":
                sys.icalls.append(
                    IndirectCall(
                        len(sys.icalls),
                        ins.iid,
                        var[ins.operands[0]],
                        tuple(var[a] for a in ins.operands[1:]),
                        d,
                    )
                )
            elif op == "ret" and ins.operands:
                emit(Constraint(COPY, sys.fn_ret[f.name], var[ins.operands[0]]))
    return sys


def resolve_indirect_call(sys: ConstraintSystem, record: IndirectCall, target: ObjectId | str) -> list[Constraint]:
    """Copy constraints binding ``record`` to function ``target``.

    Returns [] if the pair was already resolved, or on arity mismatch
    (logged as a warning).
    """
    if isinstance(target, ObjectId):
        if target.kind != "function":
            raise ResolutionError(f"{target.label} is not a function object")
        name = target.name
    else:
        name = target
    if name not in sys.fn_params:
        raise ResolutionError(f"@{name} is not a function")
    if record.index >= len(sys.icalls) or sys.icalls[record.index] != record:
        raise ResolutionError("indirect-call record does not belong to this system")
    key = (record.index, name)
    if key in sys._resolved:
        return []
    sys._resolved.add(key)
    params = sys.fn_params[name]
    if len(params) != len(record.args):
        log.warning(
            "icall at %s: @%s expects %d argument(s), got %d; ignored",
            record.site, name, len(params), len(record.args),
        )
        return []
    out = [Constraint(COPY, p, a) for p, a in zip(params, record.args)]
    if record.dest is not None:
        out.append(Constraint(COPY, record.dest, sys.fn_ret[name]))
    return out
