"""Seeded random program generator for test corpora and benchmarks.

Programs follow a loose type discipline so that points-to sets stay sparse
like those of real code:

* ``p1`` points to plain data, ``p2`` to cells holding ``p1`` values and
  ``p3`` to cells holding ``p2`` values;
* functions fall into signature classes; ``fK`` holds addresses of class-K
  functions and ``pfK`` points to cells holding ``fK`` values, so indirect
  calls only reach functions whose parameters match what they pass;
* results of ``field`` carry an interior mark: they may be dereferenced but
  are never offset again, passed on, returned or stored.

A small ``pun_rate`` lets values cross types to exercise untyped flows.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from ..ir import MAX_FIELD

DEFAULT_WEIGHTS = {
    "alloc": 3.0,
    "addr": 1.0,
    "copy": 3.0,
    "load": 2.0,
    "store": 2.0,
    "field": 1.0,
    "call": 1.2,
    "icall": 0.6,
}

PTR_TYPES = ("p1", "p2", "p3")
INTERIOR = "+"


@dataclass
class GenParams:
    size: int = 50
    functions: int | None = None  # besides main; None picks from size
    vars_per_function: int = 10
    globals: int = 2
    weights: dict[str, float] = field(default_factory=lambda: dict(DEFAULT_WEIGHTS))
    branch_density: float = 0.5
    icall_density: float | None = None  # overrides weights["icall"] when set
    recursion: bool = True
    back_edge_rate: float = 0.1  # with recursion on: chance a call may target any function
    deterministic: bool = False
    block_length: int = 5
    pun_rate: float = 0.03
    max_field: int = MAX_FIELD


def _base(t: str) -> str:
    return t[: -len(INTERIOR)] if t.endswith(INTERIOR) else t


def loaded_type(t: str) -> str | None:
    """Type of the value read through a pointer of type ``t`` (None: plain data)."""
    t = _base(t)
    if t == "p2":
        return "p1"
    if t == "p3":
        return "p2"
    if t.startswith("pf"):
        return t[1:]
    return None


class _FunctionBuilder:
    def __init__(self, gen: "_Generator", name: str) -> None:
        self.gen = gen
        self.rng = gen.rng
        self.name = name
        params, _ret = gen.sig_of(name)
        self.params = [f"a{i}" for i in range(len(params))]
        self.types: dict[str, str] = dict(zip(self.params, params))
        self.defined: list[str] = list(self.params)
        self.counter = 0
        self.lines: list[str] = []

    def typed(self, t: str) -> list[str]:
        return [v for v in self.defined if self.types[v] == t]

    def use(self, t: str, interior: bool = False) -> str:
        """A defined variable of type ``t`` (or its interior class), materializing one if needed."""
        rng = self.rng
        if rng.random() < self.gen.p.pun_rate:
            bases = [v for v in self.defined if not self.types[v].endswith(INTERIOR)]
            if bases:
                return rng.choice(bases)
        pool = self.typed(t)
        if interior:
            pool += self.typed(t + INTERIOR)
        if pool:
            return rng.choice(pool)
        return self.produce(t)

    def dest(self, t: str) -> str:
        rng = self.rng
        pool = self.typed(t)
        if pool and (self.counter >= self.gen.p.vars_per_function or rng.random() < 0.35):
            return rng.choice(pool)
        v = f"v{self.counter}"
        self.counter += 1
        self.types[v] = t
        return v

    def define(self, v: str) -> None:
        if v not in self.defined:
            self.defined.append(v)

    def produce(self, t: str) -> str:
        """Emit an instruction yielding a fresh value of type ``t``."""
        gen, rng = self.gen, self.rng
        if t.startswith("f"):
            cls = gen.members[int(t[1:])]
            fwd = [f for f in gen.callees(self.name) if f in cls]
            d = self.dest(t)
            self.lines.append(f"%{d} = addr @{rng.choice(fwd or cls)}")
        elif gen.globals and rng.random() < 0.2:
            d = self.dest(t)
            self.lines.append(f"%{d} = addr @{rng.choice(gen.globals)}")
        else:
            d = self.dest(t)
            self.lines.append(f"%{d} = alloc {gen.fresh_object()}")
            inner = loaded_type(t)
            if gen.p.deterministic and inner is not None and rng.random() < 0.8:
                # initialize the new cell so executions get past the first load
                self.define(d)
                self.lines.append(f"store %{self.use(inner)}, %{d}")
        self.define(d)
        return d

    def emit(self, op: str) -> None:
        rng = self.rng
        gen = self.gen
        if op == "alloc":
            self.produce(gen.pick_type(("p1", "p2", "p3", "pf")))
        elif op == "addr":
            self.produce(gen.pick_type(("f",) if rng.random() < 0.6 else PTR_TYPES))
        elif op == "copy":
            src = self.use(gen.pick_type(("p1", "p2", "p3", "f", "pf")), interior=True)
            d = self.dest(self.types[src])
            self.lines.append(f"%{d} = copy %{src}")
            self.define(d)
        elif op == "load":
            src = self.use(gen.pick_type(("p2", "p3", "pf")), interior=True)
            d = self.dest(loaded_type(self.types[src]) or "p1")
            self.lines.append(f"%{d} = load %{src}")
            self.define(d)
        elif op == "store":
            ptr = self.use(gen.pick_type(("p2", "p3", "pf")), interior=True)
            val = self.use(loaded_type(self.types[ptr]) or "p1")
            self.lines.append(f"store %{val}, %{ptr}")
        elif op == "field":
            src = self.use(gen.pick_type(("p1", "p2", "p3", "pf")))
            off = rng.randint(0, 2) if rng.random() < 0.9 else rng.randint(0, gen.p.max_field)
            d = self.dest(_base(self.types[src]) + INTERIOR)
            self.lines.append(f"%{d} = field %{src}, {off}")
            self.define(d)
        elif op == "call":
            callees = gen.callees(self.name)
            if not callees:
                self.emit("copy")
                return
            callee = rng.choice(callees)
            params, ret = gen.sig_of(callee)
            args = ", ".join("%" + self.use(t) for t in params)
            d = self.dest(ret)
            self.lines.append(f"%{d} = call @{callee}({args})")
            self.define(d)
        elif op == "icall":
            if not gen.callable:
                self.emit("copy")
                return
            k = rng.choice(gen.used_classes)
            fp = self.use(f"f{k}")
            params, ret = gen.classes[k]
            if rng.random() < 0.05:
                params = tuple(rng.choice(PTR_TYPES) for _ in range(rng.randint(0, 2)))
            args = ", ".join("%" + self.use(t) for t in params)
            d = self.dest(ret)
            self.lines.append(f"%{d} = icall %{fp}({args})")
            self.define(d)


class _Generator:
    def __init__(self, seed: int, p: GenParams) -> None:
        self.p = p
        self.rng = random.Random(seed)
        rng = self.rng
        n_funcs = p.functions if p.functions is not None else max(1, p.size // 40)
        self.names = [f"f{i}" for i in range(n_funcs)] + ["main"]
        # signature classes; a parameter may hold functions of an earlier class
        n_classes = max(1, n_funcs // 4)
        self.classes: list[tuple[tuple[str, ...], str]] = []
        for k in range(n_classes):
            kinds = PTR_TYPES + (("f",) if k else ())
            params = []
            for _ in range(rng.randint(0, 2)):
                t = rng.choice(kinds)
                params.append(f"f{rng.randrange(k)}" if t == "f" else t)
            self.classes.append((tuple(params), rng.choice(PTR_TYPES)))
        self.class_of = {f: (i if i < n_classes else rng.randrange(n_classes)) for i, f in enumerate(self.names[:-1])}
        self.members: list[list[str]] = [[] for _ in range(n_classes)]
        for f, k in self.class_of.items():
            self.members[k].append(f)
        self.used_classes = [k for k in range(n_classes) if self.members[k]]
        self.callable = self.names[:-1]
        self.globals = [f"g{i}" for i in range(p.globals)]
        self.objects = 0
        self.weights = dict(p.weights)
        if p.icall_density is not None:
            self.weights["icall"] = p.icall_density

    def sig_of(self, name: str) -> tuple[tuple[str, ...], str]:
        if name == "main":
            return (), "p1"
        return self.classes[self.class_of[name]]

    def pick_type(self, kinds: tuple[str, ...]) -> str:
        """A concrete type from ``kinds``; ``f``/``pf`` pick a signature class."""
        kinds = tuple(k for k in kinds if k in PTR_TYPES or self.used_classes)
        t = self.rng.choice(kinds)
        if t in ("f", "pf"):
            return f"{t}{self.rng.choice(self.used_classes)}"
        return t

    def fresh_object(self) -> str:
        self.objects += 1
        return f"O{self.objects - 1}"

    def callees(self, caller: str) -> list[str]:
        """Call targets for a new call site; forward in declaration order unless a back edge is drawn."""
        if self.p.recursion and self.rng.random() < self.p.back_edge_rate:
            return list(self.callable)
        if caller == "main":
            return list(self.callable)
        idx = self.names.index(caller)
        return self.callable[idx + 1 :]

    def pick_op(self) -> str:
        ops = sorted(self.weights)
        return self.rng.choices(ops, [self.weights[o] for o in ops])[0]

    def function(self, name: str, budget: int) -> list[str]:
        p, rng = self.p, self.rng
        fb = _FunctionBuilder(self, name)
        n_blocks = max(1, budget // (p.block_length + 1))
        per_block = max(1, budget // n_blocks - 1)
        blocks: list[list[str]] = []
        for b in range(n_blocks):
            fb.lines = []
            while len(fb.lines) < per_block:
                fb.emit(self.pick_op())
            if b == n_blocks - 1:
                ret_t = self.sig_of(name)[1]
                if rng.random() < 0.85:
                    fb.lines.append(f"ret %{fb.use(ret_t)}")
                else:
                    fb.lines.append("ret")
            elif p.deterministic:
                fb.lines.append(f"br b{rng.randint(b + 1, min(b + 2, n_blocks - 1))}")
            elif rng.random() < p.branch_density:
                other = rng.randrange(n_blocks)
                if other == b + 1:
                    other = b
                fb.lines.append(f"br b{b + 1}, b{other}")
            else:
                fb.lines.append(f"br b{b + 1}")
            blocks.append(fb.lines)
        head = ", ".join("%" + a for a in fb.params)
        out = [f"func @{name}({head}) {{"]
        for b, lines in enumerate(blocks):
            out.append(f"b{b}:")
            out.extend("  " + ln for ln in lines)
        out.append("}")
        return out

    def program(self) -> str:
        p = self.p
        share = max(2, p.size // len(self.names))
        budget = {f: share for f in self.names}
        budget["main"] += max(0, p.size - share * len(self.names))
        out = [f"global @{g}" for g in self.globals]
        for name in self.names:
            if out:
                out.append("")
            out.extend(self.function(name, budget[name]))
        return "\n".join(out) + "\n"


def generate_program(seed: int, params: GenParams | None = None) -> str:
    """Program text; identical for identical (seed, params)."""
    return _Generator(seed, params or GenParams()).program()


def cmd_gen(seed: int, params: GenParams | None = None) -> str:
    return generate_program(seed, params)
