"""Offline constraint simplification: HVN, HU, and the HCD cycle table.

HVN/HU assign every node a label such that equal labels imply equal final
points-to sets, then merge equally-labelled nodes before solving. Nodes
whose incoming flow is not fully visible offline (object fields, indirect
call destinations, parameters of address-taken functions) get a unique
label and are never merged with anything outside their own copy cycle.
"""

from __future__ import annotations

from ..constraints import ADDR, COPY, FIELD, LOAD, STORE, Constraint, ConstraintSystem, IndirectCall
from ..graphs import topological_components

NON_POINTER = 0


def _indirect_nodes(sys: ConstraintSystem) -> set[int]:
    out = {n for n, info in enumerate(sys.nodes) if info.kind == "field"}
    for rec in sys.icalls:
        if rec.dest is not None:
            out.add(rec.dest)
    taken = {sys.function_of_location(c.src) for c in sys.constraints if c.kind == ADDR}
    for fn in taken:
        if fn is not None:
            out.update(sys.fn_params[fn])
    return out


def _label(sys: ConstraintSystem, union_sets: bool) -> list[int]:
    n_nodes = sys.num_nodes
    incoming: list[list[Constraint]] = [[] for _ in range(n_nodes)]
    deps: list[list[int]] = [[] for _ in range(n_nodes)]
    for c in sys.constraints:
        if c.kind in (ADDR, COPY, LOAD, FIELD):
            incoming[c.dst].append(c)
            if c.kind != ADDR:
                deps[c.src].append(c.dst)
    indirect = _indirect_nodes(sys)

    numbers: dict[object, int] = {}

    def vn(key: object) -> int:
        if key not in numbers:
            numbers[key] = len(numbers) + 1
        return numbers[key]

    label = [NON_POINTER] * n_nodes
    # HU only: node label id -> frozenset of base label ids
    base_of: dict[int, frozenset[int]] = {NON_POINTER: frozenset()}

    def finish(items: set[int]) -> int:
        items.discard(NON_POINTER)
        if union_sets:
            merged: set[int] = set()
            for it in items:
                merged |= base_of.get(it, {it})
            if not merged:
                return NON_POINTER
            if len(merged) == 1:  # a lone atom is its own label, as in HVN
                return next(iter(merged))
            key = frozenset(merged)
            lab = vn(("set", key))
            base_of[lab] = key
            return lab
        if not items:
            return NON_POINTER
        if len(items) == 1:
            return next(iter(items))
        return vn(("set", frozenset(items)))

    def fresh(n: int) -> int:
        lab = vn(("fresh", n))
        base_of.setdefault(lab, frozenset({lab}))
        return lab

    def item(c: Constraint) -> int:
        if c.kind == ADDR:
            return vn(("addr", c.src))
        src = label[c.src]
        if src == NON_POINTER:
            return NON_POINTER
        if c.kind == COPY:
            return src
        if c.kind == LOAD:
            return vn(("deref", src))
        return vn(("field", src, c.offset))

    for comp in topological_components(range(n_nodes), deps.__getitem__):
        members = set(comp)
        if len(comp) == 1 and comp[0] not in deps[comp[0]]:
            n = comp[0]
            label[n] = fresh(n) if n in indirect else finish({item(c) for c in incoming[n]})
            continue
        internal_complex = any(c.kind != COPY and c.src in members for m in comp for c in incoming[m])
        if internal_complex:
            for n in sorted(comp):
                label[n] = fresh(n)
            continue
        if members & indirect:
            lab = fresh(min(comp))
        else:
            lab = finish({item(c) for m in comp for c in incoming[m] if c.src not in members or c.kind == ADDR})
        for n in comp:
            label[n] = lab
    for n, info in enumerate(sys.nodes):
        if info.kind == "field":
            label[n] = fresh(n)
    return label


def _merge(sys: ConstraintSystem, label: list[int]) -> ConstraintSystem:
    first: dict[int, int] = {}
    rep = []
    for n, lab in enumerate(label):
        rep.append(first.setdefault(lab, n))
    merged = sys.fork()
    out: list[Constraint] = []
    seen: set[Constraint] = set()
    for c in sys.constraints:
        if c.kind == ADDR:
            c2 = Constraint(ADDR, rep[c.dst], c.src)
        else:
            c2 = Constraint(c.kind, rep[c.dst], rep[c.src], c.offset)
            if c.kind == COPY and c2.dst == c2.src:
                continue
        if c2 not in seen:
            seen.add(c2)
            out.append(c2)
    merged.constraints = out
    merged.icalls = [
        IndirectCall(r.index, r.site, rep[r.fnptr], tuple(rep[a] for a in r.args), None if r.dest is None else rep[r.dest])
        for r in sys.icalls
    ]
    merged.merge_map = rep
    return merged


def offline_hvn(sys: ConstraintSystem) -> tuple[ConstraintSystem, dict[int, int]]:
    """Hash-based value numbering; returns (merged system, node -> label)."""
    label = _label(sys, union_sets=False)
    return _merge(sys, label), dict(enumerate(label))


def offline_hu(sys: ConstraintSystem) -> tuple[ConstraintSystem, dict[int, int]]:
    """HVN with set-union labels across dereference nodes."""
    label = _label(sys, union_sets=True)
    return _merge(sys, label), dict(enumerate(label))


def offline_hcd(sys: ConstraintSystem) -> dict[int, int]:
    """Pointer node -> node that every pointee must be collapsed with.

    Built from SCCs of the offline graph with ``*p`` ref nodes. Only SCCs
    holding exactly one ref node are used: every cycle through ``*a`` then
    becomes a real cycle ``o -> ... -> b -> ... -> o`` for each pointee o.
    """
    n_nodes = sys.num_nodes
    succ: dict[int, set[int]] = {}

    def ref(n: int) -> int:
        return n_nodes + n

    def edge(a: int, b: int) -> None:
        succ.setdefault(a, set()).add(b)

    for c in sys.constraints:
        if c.kind == COPY:
            edge(c.src, c.dst)
        elif c.kind == LOAD:
            edge(ref(c.src), c.dst)
        elif c.kind == STORE:
            edge(c.src, ref(c.dst))
    nodes = sorted(set(succ) | {w for ws in succ.values() for w in ws})
    table: dict[int, int] = {}
    for comp in topological_components(nodes, lambda v: sorted(succ.get(v, ()))):
        refs = [v for v in comp if v >= n_nodes]
        plain = [v for v in comp if v < n_nodes]
        if len(refs) == 1 and plain:
            table[refs[0] - n_nodes] = min(plain)
    return table
