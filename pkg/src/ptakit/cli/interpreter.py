"""Concrete small-step interpreter used as a soundness oracle.

Every execution of an ``alloc`` creates a fresh heap instance. Values are
either ``None`` (null / never assigned) or an :class:`Address` naming an
instance and a field. Facts are reported against abstract objects (the
allocation site label, ``@g`` for globals and functions) together with the
call strings needed by context-sensitive checks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

from ..ir import MAX_FIELD, Instruction, InstrId, PointerModule

DEFAULT_STEP_CAP = 10**6
DEFAULT_INSTANCE_CAP = 10**4
DEFAULT_DEPTH_CAP = 512


class Instance(NamedTuple):
    label: str  # abstract object: alloc name, "@global" or "@function"
    serial: int
    alloc_stack: tuple[InstrId, ...] = ()  # call string when allocated


class Address(NamedTuple):
    instance: Instance
    field: int


class VarFact(NamedTuple):
    """``var`` held ``obj.field`` just before (``in``) or after (``out``) ``iid``."""

    iid: InstrId
    var: str
    obj: str
    field: int
    phase: str
    stack: tuple[InstrId, ...]
    alloc_stack: tuple[InstrId, ...]


class MemFact(NamedTuple):
    """Cell ``obj.field`` held ``value_obj.value_field`` before a load / after a store."""

    iid: InstrId
    obj: str
    field: int
    value_obj: str
    value_field: int
    phase: str


class InterpreterError(ValueError):
    pass


@dataclass
class Trace:
    facts: set[VarFact] = field(default_factory=set)
    mem_facts: set[MemFact] = field(default_factory=set)
    # (load iid, object label, field) -> store iids that produced the values read
    load_sources: dict[tuple[InstrId, str, int], set[InstrId]] = field(default_factory=dict)
    executed: set[InstrId] = field(default_factory=set)
    steps: int = 0
    outcome: str = "ret"  # "ret" | "trap: ..." | "cap: ..."

    def lines(self) -> list[str]:
        out = []
        for f in sorted(self.facts, key=lambda f: (str(f.iid), f.phase, f.var, f.obj, f.field, f.stack, f.alloc_stack)):
            out.append(f"{f.iid} {f.phase} %{f.var} -> {f.obj}.{f.field}")
        return sorted(set(out))


class _Frame:
    __slots__ = ("function", "env", "block", "index", "call_site", "stack")

    def __init__(self, function: str, env: dict, block: str, call_site: Instruction | None, stack: tuple[InstrId, ...]):
        self.function = function
        self.env = env
        self.block = block
        self.index = 0
        self.call_site = call_site
        self.stack = stack


def interpret(
    m: PointerModule,
    *,
    step_cap: int = DEFAULT_STEP_CAP,
    instance_cap: int = DEFAULT_INSTANCE_CAP,
    max_field: int = MAX_FIELD,
    depth_cap: int = DEFAULT_DEPTH_CAP,
    stack_suffix: int | None = None,
) -> Trace:
    """Run ``m`` from its entry function; requires single-target branches.

    ``stack_suffix`` keeps only the most recent call sites in recorded
    stacks, which is all a k-limited context check needs.
    """
    for ins in m.instructions():
        if ins.op == "br" and len(ins.targets) != 1:
            raise InterpreterError(f"{ins.iid}: two-target branch in a module given to the interpreter")
    blocks = {f.name: {b.label: b.instructions for b in f.blocks} for f in m.functions}
    funcs = {f.name: f for f in m.functions}
    named = {g.name: Instance("@" + g.name, 0) for g in m.globals}
    named.update({f.name: Instance("@" + f.name, 0) for f in m.functions})
    fn_of_instance = {Instance("@" + f.name, 0): f.name for f in m.functions}
    memory: dict[tuple[Instance, int], Address | None] = {}
    writer: dict[tuple[Instance, int], InstrId] = {}
    counts: dict[str, int] = {}
    trace = Trace()
    facts, mem_facts = trace.facts, trace.mem_facts

    entry = funcs[m.entry]
    if entry.params:
        raise InterpreterError(f"entry function @{m.entry} must take no parameters")
    frames = [_Frame(entry.name, {}, entry.blocks[0].label, None, ())]

    def note(ins: Instruction, var: str, value: Address | None, phase: str, stack) -> None:
        if value is not None:
            facts.add(VarFact(ins.iid, var, value.instance.label, value.field, phase, stack, value.instance.alloc_stack))

    def deref(ins: Instruction, var: str, env: dict) -> Address:
        a = env.get(var)
        if a is None:
            raise _Trap(f"trap: {ins.iid} dereferences null %{var}")
        return a

    while frames:
        if trace.steps >= step_cap:
            trace.outcome = f"cap: {step_cap} steps"
            break
        fr = frames[-1]
        ins = blocks[fr.function][fr.block][fr.index]
        env = fr.env
        trace.steps += 1
        trace.executed.add(ins.iid)
        for v in ins.operands:
            note(ins, v, env.get(v), "in", fr.stack)
        op = ins.op
        try:
            if op == "alloc":
                n = counts.get(ins.symbol, 0)
                if n >= instance_cap:
                    trace.outcome = f"cap: {instance_cap} instances of {ins.symbol}"
                    break
                counts[ins.symbol] = n + 1
                env[ins.dest] = Address(Instance(ins.symbol, n, fr.stack), 0)
            elif op == "addr":
                env[ins.dest] = Address(named[ins.symbol], 0)
            elif op == "copy":
                env[ins.dest] = env.get(ins.operands[0])
            elif op == "load":
                a = deref(ins, ins.operands[0], env)
                cell = (a.instance, a.field)
                val = memory.get(cell)
                if val is not None:
                    mem_facts.add(MemFact(ins.iid, a.instance.label, a.field, val.instance.label, val.field, "in"))
                src = writer.get(cell)
                if src is not None:
                    trace.load_sources.setdefault((ins.iid, a.instance.label, a.field), set()).add(src)
                env[ins.dest] = val
            elif op == "store":
                value, ptr = ins.operands
                a = deref(ins, ptr, env)
                val = env.get(value)
                memory[(a.instance, a.field)] = val
                writer[(a.instance, a.field)] = ins.iid
                if val is not None:
                    mem_facts.add(MemFact(ins.iid, a.instance.label, a.field, val.instance.label, val.field, "out"))
            elif op == "field":
                a = deref(ins, ins.operands[0], env)
                f = a.field + ins.offset
                env[ins.dest] = Address(a.instance, f if f <= max_field else 0)
            elif op in ("call", "icall"):
                if op == "call":
                    callee = ins.symbol
                else:
                    a = deref(ins, ins.operands[0], env)
                    callee = fn_of_instance.get(a.instance)
                    if callee is None or a.field != 0:
                        raise _Trap(f"trap: {ins.iid} calls a non-function address")
                    if len(funcs[callee].params) != len(ins.args):
                        raise _Trap(f"trap: {ins.iid} calls @{callee} with the wrong arity")
                fdef = funcs[callee]
                callee_env = {p: env.get(a) for p, a in zip(fdef.params, ins.args)}
                if len(frames) >= depth_cap:
                    trace.outcome = f"cap: call depth {depth_cap}"
                    break
                stack = fr.stack + (ins.iid,)
                if stack_suffix is not None:
                    stack = stack[len(stack) - stack_suffix :] if stack_suffix else ()
                frames.append(_Frame(callee, callee_env, fdef.blocks[0].label, ins, stack))
                continue  # dest is written on return
            elif op == "ret":
                val = env.get(ins.operands[0]) if ins.operands else None
                frames.pop()
                if fr.call_site is not None:
                    caller = frames[-1]
                    caller.env[fr.call_site.dest] = val
                    note(fr.call_site, fr.call_site.dest, val, "out", caller.stack)
                    caller.index += 1
                continue
            elif op == "br":
                fr.block = ins.targets[0]
                fr.index = 0
                continue
        except _Trap as t:
            trace.outcome = str(t)
            break
        if ins.dest is not None:
            note(ins, ins.dest, env.get(ins.dest), "out", fr.stack)
        fr.index += 1
    return trace


class _Trap(Exception):
    pass
