import pytest
from hypothesis import given, strategies as st

from ptakit.ptset import (
    SetBackendKind,
    SortedVector,
    SparseBitVector,
    StaleSnapshotError,
    diff_union_into,
    insert,
    make_set,
    union_into,
)

BACKENDS = ["sorted", "bitvec"]
keys = st.lists(st.integers(0, 5000), max_size=60)


@pytest.mark.parametrize("kind", BACKENDS)
class TestContract:
    def test_insert(self, kind):
        s = make_set(kind)
        assert insert(s, 5) and list(s) == [5]
        assert not insert(s, 5)
        assert insert(s, 3) and list(s) == [3, 5]

    def test_union(self, kind):
        a, b = make_set(kind, [1, 2]), make_set(kind, [2, 3])
        assert union_into(a, b) and list(a) == [1, 2, 3]
        assert not union_into(make_set(kind, [1]), make_set(kind))
        c = make_set(kind)
        assert union_into(c, make_set(kind, [7, 9])) and list(c) == [7, 9]

    def test_diff_union(self, kind):
        src, dst = make_set(kind, [1, 2]), make_set(kind)
        tok = src.snapshot()
        src.insert(4)
        changed, tok2 = diff_union_into(dst, src, tok)
        assert changed and list(dst) == [4]
        changed, _ = diff_union_into(dst, src, tok2)
        assert not changed

    def test_stale_token(self, kind):
        a, b = make_set(kind, [1]), make_set(kind, [2])
        with pytest.raises(StaleSnapshotError):
            make_set(kind).diff_union_into(b, a.snapshot())

    @given(keys, keys)
    def test_matches_python_sets(self, kind, xs, ys):
        a, b = make_set(kind, xs), make_set(kind, ys)
        assert list(a) == sorted(set(xs))
        assert len(a) == len(set(xs))
        assert a.issubset(b) == (set(xs) <= set(ys))
        assert a.intersects(b) == bool(set(xs) & set(ys))
        assert all(k in a for k in xs)
        grew = a.union_into(b)
        assert grew == (not set(ys) <= set(xs))
        assert list(a) == sorted(set(xs) | set(ys))

    @given(st.lists(keys, min_size=1, max_size=8))
    def test_full_history_equals_union(self, kind, batches):
        """Delta unions from a full-history token behave like plain unions."""
        src = make_set(kind)
        via_diff, via_union = make_set(kind), make_set(kind)
        tok = src.full_history()
        for batch in batches:
            src.update(batch)
            c1, tok = via_diff.diff_union_into(src, tok)
            c2 = via_union.union_into(src)
            assert c1 == c2
            assert list(via_diff) == list(via_union)


def test_backend_kinds():
    assert isinstance(make_set("sorted"), SortedVector)
    assert isinstance(make_set(SetBackendKind.SPARSE_BITVECTOR), SparseBitVector)
    with pytest.raises(NotImplementedError):
        make_set("bdd")
    with pytest.raises(ValueError):
        make_set("bogus")


@given(keys)
def test_backends_agree(xs):
    assert list(make_set("sorted", xs)) == list(make_set("bitvec", xs))
    assert make_set("sorted", xs) == make_set("bitvec", xs)
