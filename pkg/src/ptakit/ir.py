"""The miniature pointer IR: data model, parser, validator, printer and CFGs.

Grammar (``.pir`` files)::

    module  := (global | func)*
    global  := "global" "@" IDENT
    func    := "func" "@" IDENT "(" [ "%"ID ("," "%"ID)* ] ")" "{" block+ "}"
    block   := IDENT ":" instr*
    instr   := "%"ID "=" "alloc" IDENT
             | "%"ID "=" "addr" "@"IDENT
             | "%"ID "=" "copy" "%"ID
             | "%"ID "=" "load" "%"ID
             | "store" "%"ID "," "%"ID          ; store v, p  means *p = v
             | "%"ID "=" "field" "%"ID "," INT  ; address of field INT
             | "%"ID "=" "call" "@"IDENT "(" args ")"
             | "%"ID "=" "icall" "%"ID "(" args ")"
             | "ret" [ "%"ID ] | "br" IDENT [ "," IDENT ]

``;`` starts a comment running to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

MAX_FIELD = 8
DEFAULT_ENTRY = "main"

TERMINATORS = frozenset({"ret", "br"})
CALLS = frozenset({"call", "icall"})


class InstrId(NamedTuple):
    function: str
    block: str
    index: int

    def __str__(self) -> str:
        return f"{self.function}:{self.block}:{self.index}"


@dataclass(frozen=True)
class Diagnostic:
    severity: str  # "error" | "warning"
    message: str
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.severity}: {self.message}"


class IRError(Exception):
    """Raised when text cannot be turned into a valid module."""

    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = list(diagnostics)
        super().__init__("\n".join(str(d) for d in self.diagnostics))


@dataclass(frozen=True)
class Instruction:
    """One IR instruction.

    ``operands`` holds variable names (without ``%``) in source order:
    copy/load ``(src,)``, store ``(value, ptr)``, field ``(base,)``,
    call ``args``, icall ``(fnptr, *args)``, ret ``(v,)`` or ``()``.
    ``symbol`` is the alloc object name, addr target or direct callee.
    """

    op: str
    iid: InstrId
    dest: str | None = None
    operands: tuple[str, ...] = ()
    symbol: str | None = None
    offset: int = 0
    targets: tuple[str, ...] = ()
    line: int = field(default=0, compare=False)
    col: int = field(default=0, compare=False)

    @property
    def is_terminator(self) -> bool:
        return self.op in TERMINATORS

    @property
    def args(self) -> tuple[str, ...]:
        if self.op == "icall":
            return self.operands[1:]
        if self.op == "call":
            return self.operands
        return ()

    def uses(self) -> tuple[str, ...]:
        return self.operands


@dataclass(frozen=True)
class BasicBlock:
    label: str
    instructions: tuple[Instruction, ...]
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class GlobalDecl:
    name: str
    line: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Function:
    name: str
    params: tuple[str, ...]
    blocks: tuple[BasicBlock, ...]
    line: int = field(default=0, compare=False)

    @property
    def entry(self) -> BasicBlock:
        return self.blocks[0]

    def instructions(self) -> Iterator[Instruction]:
        for b in self.blocks:
            yield from b.instructions

    def block(self, label: str) -> BasicBlock:
        for b in self.blocks:
            if b.label == label:
                return b
        raise KeyError(label)

    def variables(self) -> tuple[str, ...]:
        """Params followed by every assigned name, in first-appearance order."""
        seen = dict.fromkeys(self.params)
        for ins in self.instructions():
            if ins.dest is not None:
                seen.setdefault(ins.dest)
        return tuple(seen)


@dataclass(frozen=True)
class PointerModule:
    globals: tuple[GlobalDecl, ...]
    functions: tuple[Function, ...]
    entry: str = DEFAULT_ENTRY

    def function(self, name: str) -> Function:
        for f in self.functions:
            if f.name == name:
                return f
        raise KeyError(name)

    def has_function(self, name: str) -> bool:
        return any(f.name == name for f in self.functions)

    def instructions(self) -> Iterator[Instruction]:
        for f in self.functions:
            yield from f.instructions()

    def instruction(self, iid: InstrId) -> Instruction:
        f = self.function(iid.function)
        return f.block(iid.block).instructions[iid.index]

    def instruction_count(self) -> int:
        return sum(1 for _ in self.instructions())

    def address_taken_functions(self) -> tuple[str, ...]:
        names = {f.name for f in self.functions}
        seen: dict[str, None] = {}
        for ins in self.instructions():
            if ins.op == "addr" and ins.symbol in names:
                seen.setdefault(ins.symbol)
        return tuple(seen)


# ---------------------------------------------------------------------------
# Lexer / parser
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r]+)
  | (?P<nl>\n)
  | (?P<comment>;[^\n]*)
  | (?P<gname>@[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<lname>%[A-Za-z0-9_.]+)
  | (?P<int>[0-9]+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_.]*)
  | (?P<punct>[(){},:=])
    """,
    re.VERBOSE,
)


class _Tok(NamedTuple):
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise IRError([Diagnostic("error", f"unexpected character {text[pos]!r}", line, pos - line_start + 1)])
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind not in ("ws", "comment"):
            toks.append(_Tok(kind, m.group(), line, pos - line_start + 1))
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


_VALUE_OPS = ("alloc", "addr", "copy", "load", "field", "call", "icall")


class _Parser:
    def __init__(self, text: str):
        self.toks = _tokenize(text)
        self.i = 0

    def peek(self, k: int = 0) -> _Tok:
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def next(self) -> _Tok:
        t = self.toks[self.i]
        self.i = min(self.i + 1, len(self.toks) - 1)
        return t

    def fail(self, expected: str) -> IRError:
        t = self.peek()
        got = t.text if t.kind != "eof" else "end of input"
        return IRError([Diagnostic("error", f"expected {expected}, got {got!r}", t.line, t.col)])

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> _Tok:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            raise self.fail(what or repr(text or kind))
        return self.next()

    def at(self, kind: str, text: str | None = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    def module(self, entry: str) -> PointerModule:
        globals_: list[GlobalDecl] = []
        funcs: list[Function] = []
        while not self.at("eof"):
            if self.at("ident", "global"):
                kw = self.next()
                name = self.expect("gname", what="global name '@name'")
                globals_.append(GlobalDecl(name.text[1:], kw.line))
            elif self.at("ident", "func"):
                funcs.append(self.function())
            else:
                raise self.fail("'global' or 'func'")
        return PointerModule(tuple(globals_), tuple(funcs), entry)

    def function(self) -> Function:
        kw = self.next()
        name = self.expect("gname", what="function name '@name'").text[1:]
        self.expect("punct", "(")
        params: list[str] = []
        if not self.at("punct", ")"):
            params.append(self.expect("lname", what="parameter '%name'").text[1:])
            while self.at("punct", ","):
                self.next()
                params.append(self.expect("lname", what="parameter '%name'").text[1:])
        self.expect("punct", ")")
        self.expect("punct", "{")
        blocks: list[BasicBlock] = []
        while not self.at("punct", "}"):
            blocks.append(self.block(name))
        if not blocks:
            raise self.fail("block label")
        self.expect("punct", "}")
        return Function(name, tuple(params), tuple(blocks), kw.line)

    def block(self, fname: str) -> BasicBlock:
        lab = self.expect("ident", what="block label")
        self.expect("punct", ":")
        instrs: list[Instruction] = []
        while True:
            t = self.peek()
            if t.kind == "punct" and t.text == "}":
                break
            if t.kind == "ident" and self.peek(1).kind == "punct" and self.peek(1).text == ":":
                break
            instrs.append(self.instruction(InstrId(fname, lab.text, len(instrs))))
        return BasicBlock(lab.text, tuple(instrs), lab.line)

    def _args(self) -> list[str]:
        self.expect("punct", "(")
        args: list[str] = []
        if not self.at("punct", ")"):
            args.append(self.expect("lname", what="argument '%name'").text[1:])
            while self.at("punct", ","):
                self.next()
                args.append(self.expect("lname", what="argument '%name'").text[1:])
        self.expect("punct", ")")
        return args

    def instruction(self, iid: InstrId) -> Instruction:
        t = self.peek()
        pos = {"line": t.line, "col": t.col}
        if t.kind == "lname":
            dest = self.next().text[1:]
            self.expect("punct", "=")
            op = self.expect("ident", what="operation").text
            if op == "alloc":
                obj = self.expect("ident", what="object name").text
                return Instruction("alloc", iid, dest, symbol=obj, **pos)
            if op == "addr":
                sym = self.expect("gname", what="'@name'").text[1:]
                return Instruction("addr", iid, dest, symbol=sym, **pos)
            if op in ("copy", "load"):
                src = self.expect("lname", what="'%name'").text[1:]
                return Instruction(op, iid, dest, (src,), **pos)
            if op == "field":
                base = self.expect("lname", what="'%name'").text[1:]
                self.expect("punct", ",")
                off = int(self.expect("int", what="field index").text)
                return Instruction("field", iid, dest, (base,), offset=off, **pos)
            if op == "call":
                callee = self.expect("gname", what="callee '@name'").text[1:]
                return Instruction("call", iid, dest, tuple(self._args()), symbol=callee, **pos)
            if op == "icall":
                fp = self.expect("lname", what="function pointer '%name'").text[1:]
                return Instruction("icall", iid, dest, (fp, *self._args()), **pos)
            self.i -= 1
            raise self.fail("one of " + ", ".join(_VALUE_OPS))
        if t.kind == "ident" and t.text == "store":
            self.next()
            v = self.expect("lname", what="'%name'").text[1:]
            self.expect("punct", ",")
            p = self.expect("lname", what="'%name'").text[1:]
            return Instruction("store", iid, None, (v, p), **pos)
        if t.kind == "ident" and t.text == "ret":
            self.next()
            if self.at("lname") and not (self.peek(1).kind == "punct" and self.peek(1).text == "="):
                return Instruction("ret", iid, None, (self.next().text[1:],), **pos)
            return Instruction("ret", iid, **pos)
        if t.kind == "ident" and t.text == "br":
            self.next()
            targets = [self.expect("ident", what="branch target").text]
            if self.at("punct", ","):
                self.next()
                targets.append(self.expect("ident", what="branch target").text)
            return Instruction("br", iid, targets=tuple(targets), **pos)
        raise self.fail("instruction")


def parse_module(text: str, *, entry: str = DEFAULT_ENTRY, max_field: int = MAX_FIELD) -> PointerModule:
    """Parse and validate ``text``; raises :class:`IRError` on any error diagnostic."""
    m = _Parser(text).module(entry)
    errors = [d for d in validate(m, max_field=max_field) if d.severity == "error"]
    if errors:
        raise IRError(errors)
    return m


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate(m: PointerModule, *, max_field: int = MAX_FIELD) -> list[Diagnostic]:
    diags: list[Diagnostic] = []

    def err(msg: str, line: int = 0, col: int = 0) -> None:
        diags.append(Diagnostic("error", msg, line, col))

    symbols: dict[str, str] = {}
    for g in m.globals:
        if g.name in symbols:
            err(f"duplicate name @{g.name}", g.line)
        symbols.setdefault(g.name, "global")
    arity: dict[str, int] = {}
    for f in m.functions:
        if f.name in symbols:
            err(f"duplicate name @{f.name}", f.line)
        symbols.setdefault(f.name, "function")
        arity.setdefault(f.name, len(f.params))
    if m.entry not in arity:
        err(f"entry function @{m.entry} is not defined")

    objects: set[str] = set()
    for f in m.functions:
        seen_params: set[str] = set()
        for p in f.params:
            if p in seen_params:
                err(f"duplicate parameter %{p} in @{f.name}", f.line)
            seen_params.add(p)
        labels: set[str] = set()
        for b in f.blocks:
            if b.label in labels:
                err(f"duplicate block label {b.label} in @{f.name}", b.line)
            labels.add(b.label)
        defined = set(f.variables())
        for b in f.blocks:
            term = next((i for i, ins in enumerate(b.instructions) if ins.is_terminator), None)
            if term is None:
                err(f"block {b.label} in @{f.name} has no terminator", b.line)
            elif term != len(b.instructions) - 1:
                extra = b.instructions[term + 1]
                err(f"instruction follows terminator in block {b.label} of @{f.name}", extra.line, extra.col)
            for ins in b.instructions:
                for v in ins.uses():
                    if v not in defined:
                        err(f"unresolved variable %{v} in @{f.name}", ins.line, ins.col)
                if ins.op == "alloc":
                    if ins.symbol in objects:
                        err(f"duplicate object name {ins.symbol}", ins.line, ins.col)
                    objects.add(ins.symbol)
                elif ins.op == "addr" and ins.symbol not in symbols:
                    err(f"unresolved name @{ins.symbol}", ins.line, ins.col)
                elif ins.op == "call":
                    if ins.symbol not in arity:
                        err(f"call to undefined function @{ins.symbol}", ins.line, ins.col)
                    elif arity[ins.symbol] != len(ins.operands):
                        err(
                            f"call to @{ins.symbol} passes {len(ins.operands)} argument(s), "
                            f"expected {arity[ins.symbol]}",
                            ins.line,
                            ins.col,
                        )
                elif ins.op == "field" and not 0 <= ins.offset <= max_field:
                    err(f"field index {ins.offset} exceeds MAX_FIELD={max_field}", ins.line, ins.col)
                elif ins.op == "br":
                    for t in ins.targets:
                        if t not in labels:
                            err(f"unresolved branch target {t} in @{f.name}", ins.line, ins.col)
                    if len(set(ins.targets)) != len(ins.targets):
                        err("duplicate branch target", ins.line, ins.col)
        if not any(d.severity == "error" for d in diags):
            reach = _reachable_blocks(f)
            for b in f.blocks:
                if b.label not in reach:
                    diags.append(Diagnostic("warning", f"unreachable block {b.label} in @{f.name}", b.line))
    return diags


def _reachable_blocks(f: Function) -> set[str]:
    labels = {b.label for b in f.blocks}
    seen = {f.entry.label}
    stack = [f.entry]
    while stack:
        b = stack.pop()
        last = b.instructions[-1] if b.instructions else None
        if last is None or last.op != "br":
            continue
        for t in last.targets:
            if t in labels and t not in seen:
                seen.add(t)
                stack.append(f.block(t))
    return seen


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------


def format_instruction(ins: Instruction) -> str:
    op, d = ins.op, ins.dest
    if op == "alloc":
        return f"%{d} = alloc {ins.symbol}"
    if op == "addr":
        return f"%{d} = addr @{ins.symbol}"
    if op in ("copy", "load"):
        return f"%{d} = {op} %{ins.operands[0]}"
    if op == "store":
        return f"store %{ins.operands[0]}, %{ins.operands[1]}"
    if op == "field":
        return f"%{d} = field %{ins.operands[0]}, {ins.offset}"
    if op == "call":
        return f"%{d} = call @{ins.symbol}(" + ", ".join("%" + a for a in ins.operands) + ")"
    if op == "icall":
        return f"%{d} = icall %{ins.operands[0]}(" + ", ".join("%" + a for a in ins.operands[1:]) + ")"
    if op == "ret":
        return "ret" + (f" %{ins.operands[0]}" if ins.operands else "")
    if op == "br":
        return "br " + ", ".join(ins.targets)
    raise ValueError(f"unknown op {op}")


def pretty_print(m: PointerModule) -> str:
    out: list[str] = [f"global @{g.name}" for g in m.globals]
    for f in m.functions:
        if out:
            out.append("")
        out.append(f"func @{f.name}(" + ", ".join("%" + p for p in f.params) + ") {")
        for b in f.blocks:
            out.append(f"{b.label}:")
            out.extend("  " + format_instruction(ins) for ins in b.instructions)
        out.append("}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# CFG
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CFG:
    function: str
    nodes: tuple[InstrId, ...]
    succ: dict[InstrId, tuple[InstrId, ...]]
    pred: dict[InstrId, tuple[InstrId, ...]]

    @property
    def entry(self) -> InstrId:
        return self.nodes[0]

    def edges(self) -> list[tuple[InstrId, InstrId]]:
        return [(a, b) for a in self.nodes for b in self.succ[a]]

    def exits(self) -> list[InstrId]:
        return [n for n in self.nodes if not self.succ[n]]


def build_cfg(f: Function) -> CFG:
    first = {b.label: InstrId(f.name, b.label, 0) for b in f.blocks}
    nodes: list[InstrId] = []
    succ: dict[InstrId, list[InstrId]] = {}
    for b in f.blocks:
        for i, ins in enumerate(b.instructions):
            nodes.append(ins.iid)
            if ins.op == "br":
                succ[ins.iid] = [first[t] for t in ins.targets]
            elif ins.op == "ret":
                succ[ins.iid] = []
            else:
                succ[ins.iid] = [InstrId(f.name, b.label, i + 1)]
    pred: dict[InstrId, list[InstrId]] = {n: [] for n in nodes}
    for n in nodes:
        for s in succ[n]:
            pred[s].append(n)
    return CFG(
        f.name,
        tuple(nodes),
        {n: tuple(v) for n, v in succ.items()},
        {n: tuple(v) for n, v in pred.items()},
    )


def cyclic_blocks(f: Function) -> set[str]:
    """Labels of blocks that lie on some CFG cycle."""
    succ: dict[str, list[str]] = {}
    for b in f.blocks:
        last = b.instructions[-1]
        succ[b.label] = list(last.targets) if last.op == "br" else []
    out: set[str] = set()
    for b in f.blocks:
        stack = list(succ[b.label])
        seen: set[str] = set()
        while stack:
            x = stack.pop()
            if x == b.label:
                out.add(b.label)
                break
            if x in seen:
                continue
            seen.add(x)
            stack.extend(succ[x])
    return out
