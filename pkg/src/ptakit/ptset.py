"""Points-to set representations behind one interface.

Keys are small dense non-negative integers handed out by the constraint
node table. Two concrete backends exist:

* :class:`SparseBitVector` -- word-addressed sparse blocks held in a dict
  of Python ints, cheap bulk union.
* :class:`SortedVector` -- a sorted list, used as the oracle backend.

Every set also keeps an append-only insertion log so that difference
propagation can ask "what arrived since token T".
"""

from __future__ import annotations

import itertools
from bisect import bisect_left
from enum import Enum
from typing import Iterable, Iterator, NamedTuple


class SetBackendKind(str, Enum):
    SPARSE_BITVECTOR = "bitvec"
    SORTED_VECTOR = "sorted"
    # reserved; no BDD engine ships with this package
    BDD = "bdd"


class Snapshot(NamedTuple):
    owner: int
    position: int


class StaleSnapshotError(ValueError):
    pass


_ids = itertools.count(1)


class PointsToSet:
    """Abstract set of integer keys with ascending iteration."""

    __slots__ = ("_log", "_uid")

    def __init__(self) -> None:
        self._log: list[int] = []
        self._uid = next(_ids)

    # -- backend hooks -----------------------------------------------------
    def __contains__(self, key: int) -> bool:  # pragma: no cover - abstract
        raise NotImplementedError

    def __iter__(self) -> Iterator[int]:  # pragma: no cover - abstract
        raise NotImplementedError

    def _absorb(self, keys: Iterable[int]) -> list[int]:  # pragma: no cover - abstract
        """Add keys, returning the ones that were new (ascending)."""
        raise NotImplementedError

    def _absorb_set(self, other: PointsToSet) -> list[int]:
        return self._absorb(other)

    # -- shared API --------------------------------------------------------
    def __len__(self) -> int:
        return len(self._log)

    def __bool__(self) -> bool:
        return bool(self._log)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, PointsToSet):
            return NotImplemented
        return len(self) == len(other) and list(self) == list(other)

    def __hash__(self) -> int:  # sets are mutable; identity hash
        return id(self)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({list(self)})"

    def insert(self, key: int) -> bool:
        if key in self:
            return False
        self._absorb((key,))
        return True

    def update(self, keys: Iterable[int]) -> bool:
        """Insert many keys; True iff any was new."""
        return bool(self._absorb(keys))

    def union_into(self, src: PointsToSet) -> bool:
        """``self |= src``; True iff self grew."""
        if src is self or not src._log:
            return False
        return bool(self._absorb_set(src))

    def snapshot(self) -> Snapshot:
        return Snapshot(self._uid, len(self._log))

    def full_history(self) -> Snapshot:
        return Snapshot(self._uid, 0)

    def since(self, token: Snapshot | None) -> list[int]:
        """Keys inserted after ``token`` was issued, in insertion order.

        ``None`` stands for the full history.
        """
        if token is None:
            return list(self._log)
        if token.owner != self._uid:
            raise StaleSnapshotError("snapshot was issued by a different set")
        return self._log[token.position :]

    def diff_union_into(self, src: PointsToSet, since: Snapshot | None) -> tuple[bool, Snapshot]:
        """Absorb only what ``src`` gained after ``since``; return (changed, new token)."""
        delta = src.since(since)
        changed = bool(self._absorb(delta)) if delta else False
        return changed, src.snapshot()

    def issubset(self, other: PointsToSet) -> bool:
        if len(self) > len(other):
            return False
        return all(k in other for k in self._log)

    def intersects(self, other: PointsToSet) -> bool:
        a, b = (self, other) if len(self) <= len(other) else (other, self)
        return any(k in b for k in a._log)

    def to_tuple(self) -> tuple[int, ...]:
        return tuple(self)


class SortedVector(PointsToSet):
    __slots__ = ("_keys",)

    def __init__(self, keys: Iterable[int] = ()) -> None:
        super().__init__()
        self._keys: list[int] = []
        if keys:
            self._absorb(keys)

    def __contains__(self, key: int) -> bool:
        i = bisect_left(self._keys, key)
        return i < len(self._keys) and self._keys[i] == key

    def __iter__(self) -> Iterator[int]:
        return iter(self._keys)

    def _absorb(self, keys: Iterable[int]) -> list[int]:
        new = sorted(set(keys).difference(self._keys))
        if not new:
            return new
        if new[0] > (self._keys[-1] if self._keys else -1):
            self._keys.extend(new)
        else:
            self._keys = sorted(itertools.chain(self._keys, new))
        self._log.extend(new)
        return new


_WORD = 64
_SHIFT = 6
_MASK = _WORD - 1


def _bits(word: int) -> Iterator[int]:
    while word:
        low = word & -word
        yield low.bit_length() - 1
        word ^= low


class SparseBitVector(PointsToSet):
    __slots__ = ("_blocks",)

    def __init__(self, keys: Iterable[int] = ()) -> None:
        super().__init__()
        self._blocks: dict[int, int] = {}
        if keys:
            self._absorb(keys)

    def __contains__(self, key: int) -> bool:
        return bool(self._blocks.get(key >> _SHIFT, 0) >> (key & _MASK) & 1)

    def __iter__(self) -> Iterator[int]:
        # the log holds every member exactly once
        return iter(sorted(self._log))

    def _absorb(self, keys: Iterable[int]) -> list[int]:
        blocks = self._blocks
        new: list[int] = []
        for k in keys:
            b = k >> _SHIFT
            w = blocks.get(b, 0)
            m = 1 << (k & _MASK)
            if not w & m:
                blocks[b] = w | m
                new.append(k)
        if new:
            new.sort()
            self._log.extend(new)
        return new

    def _absorb_set(self, other: PointsToSet) -> list[int]:
        if not isinstance(other, SparseBitVector):
            return self._absorb(other)
        blocks = self._blocks
        new: list[int] = []
        for b, sw in other._blocks.items():
            w = blocks.get(b, 0)
            fresh = sw & ~w
            if fresh:
                blocks[b] = w | fresh
                base = b << _SHIFT
                new.extend(base + bit for bit in _bits(fresh))
        if new:
            new.sort()
            self._log.extend(new)
        return new

    def intersects(self, other: PointsToSet) -> bool:
        if isinstance(other, SparseBitVector):
            ob = other._blocks
            return any(w & ob.get(b, 0) for b, w in self._blocks.items())
        return super().intersects(other)

    def issubset(self, other: PointsToSet) -> bool:
        if isinstance(other, SparseBitVector):
            ob = other._blocks
            return all(w & ~ob.get(b, 0) == 0 for b, w in self._blocks.items())
        return super().issubset(other)


def make_set(kind: SetBackendKind | str, keys: Iterable[int] = ()) -> PointsToSet:
    kind = SetBackendKind(kind)
    if kind is SetBackendKind.SPARSE_BITVECTOR:
        return SparseBitVector(keys)
    if kind is SetBackendKind.SORTED_VECTOR:
        return SortedVector(keys)
    raise NotImplementedError(f"points-to backend {kind.value!r} is not available")


# free-function spellings of the core operations


def insert(s: PointsToSet, key: int) -> bool:
    return s.insert(key)


def union_into(dst: PointsToSet, src: PointsToSet) -> bool:
    return dst.union_into(src)


def diff_union_into(dst: PointsToSet, src: PointsToSet, since: Snapshot) -> tuple[bool, Snapshot]:
    return dst.diff_union_into(src, since)
