"""Small directed-graph helpers: SCCs, condensation order, dominators."""

from __future__ import annotations

from typing import Callable, Hashable, Iterable, TypeVar

N = TypeVar("N", bound=Hashable)


def tarjan_scc(nodes: Iterable[N], succ: Callable[[N], Iterable[N]]) -> list[list[N]]:
    """Strongly connected components, iterative Tarjan.

    Components come out in reverse topological order of the condensation
    (a component is emitted after every component it can reach).
    """
    index: dict[N, int] = {}
    low: dict[N, int] = {}
    on_stack: set[N] = set()
    stack: list[N] = []
    out: list[list[N]] = []
    counter = 0
    for root in nodes:
        if root in index:
            continue
        index[root] = low[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(succ(root)))]
        while work:
            v, it = work[-1]
            pushed = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter
                    counter += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ(w))))
                    pushed = True
                    break
                if w in on_stack and index[w] < low[v]:
                    low[v] = index[w]
            if pushed:
                continue
            work.pop()
            if work:
                u = work[-1][0]
                if low[v] < low[u]:
                    low[u] = low[v]
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                out.append(comp)
    return out


def topological_components(nodes: Iterable[N], succ: Callable[[N], Iterable[N]]) -> list[list[N]]:
    """SCCs with sources first."""
    comps = tarjan_scc(nodes, succ)
    comps.reverse()
    return comps


def reachable(start: Iterable[N], succ: Callable[[N], Iterable[N]]) -> set[N]:
    seen = set(start)
    stack = list(seen)
    while stack:
        for w in succ(stack.pop()):
            if w not in seen:
                seen.add(w)
                stack.append(w)
    return seen


def immediate_dominators(nodes: list[N], entry: N, pred: Callable[[N], Iterable[N]], succ: Callable[[N], Iterable[N]]) -> dict[N, N]:
    """Cooper-Harvey-Kennedy iterative dominators over nodes reachable from ``entry``.

    The entry maps to itself; unreachable nodes are absent.
    """
    order: list[N] = []
    seen = {entry}
    work = [(entry, iter(succ(entry)))]
    while work:
        v, it = work[-1]
        for w in it:
            if w not in seen:
                seen.add(w)
                work.append((w, iter(succ(w))))
                break
        else:
            work.pop()
            order.append(v)
    order.reverse()
    rpo = {n: i for i, n in enumerate(order)}
    idom: dict[N, N] = {entry: entry}

    def intersect(a: N, b: N) -> N:
        while a != b:
            while rpo[a] > rpo[b]:
                a = idom[a]
            while rpo[b] > rpo[a]:
                b = idom[b]
        return a

    changed = True
    while changed:
        changed = False
        for n in order[1:]:
            new = None
            for p in pred(n):
                if p in idom:
                    new = p if new is None else intersect(p, new)
            if new is not None and idom.get(n) != new:
                idom[n] = new
                changed = True
    return idom


def dominance_frontiers(nodes: Iterable[N], idom: dict[N, N], pred: Callable[[N], Iterable[N]]) -> dict[N, set[N]]:
    df: dict[N, set[N]] = {n: set() for n in idom}
    for n in nodes:
        if n not in idom:
            continue
        ps = [p for p in pred(n) if p in idom]
        if len(ps) < 2:
            continue
        for p in ps:
            runner = p
            while runner != idom[n]:
                df[runner].add(n)
                runner = idom[runner]
    return df
