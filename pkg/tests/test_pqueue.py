import random

import pytest
from hypothesis import given, strategies as st

from covtour.pqueue import BoundedBest, MinMaxHeap


@given(st.lists(st.tuples(st.sampled_from("pnx"), st.integers(-50, 50)), max_size=200))
def test_heap_matches_sorted_list(ops):
    heap = MinMaxHeap()
    ref = []
    for op, value in ops:
        if op == "p" or not ref:
            heap.push(value)
            ref.append(value)
        elif op == "n":
            assert heap.pop_min() == min(ref)
            ref.remove(min(ref))
        else:
            assert heap.pop_max() == max(ref)
            ref.remove(max(ref))
        assert len(heap) == len(ref)
        if ref:
            assert heap.min() == min(ref)
            assert heap.max() == max(ref)
    assert sorted(heap) == sorted(ref)


def test_empty_heap_raises():
    heap = MinMaxHeap()
    with pytest.raises(IndexError):
        heap.min()
    with pytest.raises(IndexError):
        heap.pop_max()


def test_bounded_best_keeps_cheapest_distinct():
    best = BoundedBest(3)
    assert best.offer(5.0, "a", "A")
    assert best.offer(7.0, "b", "B")
    assert not best.offer(1.0, "a", "A again")
    assert best.offer(6.0, "c", "C")
    assert not best.offer(9.0, "d", "D")
    assert best.offer(2.0, "e", "E")
    assert best.items() == ["E", "A", "C"]
    assert "b" not in best and "e" in best
    assert (best.best_key(), best.worst_key()) == (2.0, 6.0)
    # the evicted key may come back
    assert best.offer(3.0, "b", "B")


def test_bounded_best_never_overflows():
    rng = random.Random(0)
    best = BoundedBest(7)
    for n in range(10_000):
        best.offer(rng.random(), rng.randrange(40), n)
        assert len(best) <= 7
