"""Worklist iteration orders for the constraint solver."""

from __future__ import annotations

import heapq
import itertools
from collections import deque
from enum import Enum
from typing import Callable


class WorklistOrder(str, Enum):
    FIFO = "fifo"
    LIFO = "lifo"
    LRF = "lrf"
    TWO_LRF = "2lrf"
    TOPO = "topo"


class EmptyWorklistError(IndexError):
    pass


class Worklist:
    """Set-like queue of node ids; a node is present at most once."""

    def __init__(self) -> None:
        self._members: set[int] = set()

    def __len__(self) -> int:
        return len(self._members)

    def __bool__(self) -> bool:
        return bool(self._members)

    def __contains__(self, n: int) -> bool:
        return n in self._members

    def push(self, n: int) -> None:
        if n not in self._members:
            self._members.add(n)
            self._enqueue(n)

    def pop(self) -> int:
        if not self._members:
            raise EmptyWorklistError("pop from empty worklist")
        n = self._dequeue()
        self._members.discard(n)
        return n

    def _enqueue(self, n: int) -> None:
        raise NotImplementedError

    def _dequeue(self) -> int:
        raise NotImplementedError


class FIFOWorklist(Worklist):
    def __init__(self) -> None:
        super().__init__()
        self._q: deque[int] = deque()

    def _enqueue(self, n: int) -> None:
        self._q.append(n)

    def _dequeue(self) -> int:
        return self._q.popleft()


class LIFOWorklist(Worklist):
    def __init__(self) -> None:
        super().__init__()
        self._q: list[int] = []

    def _enqueue(self, n: int) -> None:
        self._q.append(n)

    def _dequeue(self) -> int:
        return self._q.pop()


class LRFWorklist(Worklist):
    """Least recently fired first; never-fired nodes count as oldest."""

    def __init__(self) -> None:
        super().__init__()
        self._heap: list[tuple[int, int, int]] = []
        self._fired: dict[int, int] = {}
        self._tick = 0
        self._seq = itertools.count()

    def _enqueue(self, n: int) -> None:
        heapq.heappush(self._heap, (self._fired.get(n, -1), next(self._seq), n))

    def _dequeue(self) -> int:
        n = heapq.heappop(self._heap)[2]
        self._tick += 1
        self._fired[n] = self._tick
        return n


class TwoPhaseLRFWorklist(Worklist):
    """Drain ``current`` in LRF order; arrivals wait in ``next`` until it empties."""

    def __init__(self) -> None:
        super().__init__()
        self._current: list[tuple[int, int, int]] = []
        self._next: list[int] = []
        self._fired: dict[int, int] = {}
        self._tick = 0
        self._seq = itertools.count()

    def _enqueue(self, n: int) -> None:
        self._next.append(n)

    def _dequeue(self) -> int:
        if not self._current:
            self._current = [(self._fired.get(n, -1), next(self._seq), n) for n in self._next]
            heapq.heapify(self._current)
            self._next = []
        n = heapq.heappop(self._current)[2]
        self._tick += 1
        self._fired[n] = self._tick
        return n


class TopoWorklist(Worklist):
    """Smallest topological index first; the index is recomputed every ``refresh`` pops."""

    def __init__(self, order: Callable[[], dict[int, int]], refresh: int = 1024) -> None:
        super().__init__()
        self._order_fn = order
        self._refresh = refresh
        self._order: dict[int, int] = {}
        self._heap: list[tuple[int, int, int]] = []
        self._seq = itertools.count()
        self._pops = 0

    def _key(self, n: int) -> int:
        return self._order.get(n, len(self._order) + n)

    def _enqueue(self, n: int) -> None:
        heapq.heappush(self._heap, (self._key(n), next(self._seq), n))

    def _dequeue(self) -> int:
        self._pops += 1
        if self._pops % self._refresh == 1 % self._refresh:
            self._order = self._order_fn()
            self._heap = [(self._key(n), s, n) for _, s, n in self._heap]
            heapq.heapify(self._heap)
        return heapq.heappop(self._heap)[2]


def make_worklist(order: WorklistOrder | str, topo_order: Callable[[], dict[int, int]] | None = None, refresh: int = 1024) -> Worklist:
    order = WorklistOrder(order)
    if order is WorklistOrder.FIFO:
        return FIFOWorklist()
    if order is WorklistOrder.LIFO:
        return LIFOWorklist()
    if order is WorklistOrder.LRF:
        return LRFWorklist()
    if order is WorklistOrder.TWO_LRF:
        return TwoPhaseLRFWorklist()
    if topo_order is None:
        raise ValueError("topological worklist needs an order callback")
    return TopoWorklist(topo_order, refresh)


def worklist_next(wl: Worklist) -> int:
    return wl.pop()
