"""Min-max heap: O(1) peek at both ends, O(log n) push and pop at either end."""

from __future__ import annotations

from typing import Any, Generic, Iterator, TypeVar

T = TypeVar("T")


def _is_min_level(i: int) -> bool:
    return ((i + 1).bit_length() - 1) % 2 == 0


class MinMaxHeap(Generic[T]):
    """Items are compared directly; wrap them in tuples to order by a key.

    Even levels (root at level 0) hold minima of their subtrees, odd levels maxima.
    """

    def __init__(self, items=()):
        self._a: list[T] = []
        for item in items:
            self.push(item)

    def __len__(self) -> int:
        return len(self._a)

    def __bool__(self) -> bool:
        return bool(self._a)

    def __iter__(self) -> Iterator[T]:
        return iter(sorted(self._a))

    def min(self) -> T:
        if not self._a:
            raise IndexError("min of empty heap")
        return self._a[0]

    def _max_index(self) -> int:
        a = self._a
        if not a:
            raise IndexError("max of empty heap")
        if len(a) == 1:
            return 0
        if len(a) == 2:
            return 1
        return 1 if a[1] >= a[2] else 2

    def max(self) -> T:
        return self._a[self._max_index()]

    def push(self, item: T) -> None:
        a = self._a
        a.append(item)
        i = len(a) - 1
        if i == 0:
            return
        parent = (i - 1) // 2
        if _is_min_level(i):
            if a[i] > a[parent]:
                a[i], a[parent] = a[parent], a[i]
                self._bubble_up(parent, maxi=True)
            else:
                self._bubble_up(i, maxi=False)
        else:
            if a[i] < a[parent]:
                a[i], a[parent] = a[parent], a[i]
                self._bubble_up(parent, maxi=False)
            else:
                self._bubble_up(i, maxi=True)

    def _bubble_up(self, i: int, maxi: bool) -> None:
        a = self._a
        while i > 2:
            g = ((i - 1) // 2 - 1) // 2
            if (a[i] > a[g]) if maxi else (a[i] < a[g]):
                a[i], a[g] = a[g], a[i]
                i = g
            else:
                break

    def pop_min(self) -> T:
        if not self._a:
            raise IndexError("pop from empty heap")
        return self._pop_at(0)

    def pop_max(self) -> T:
        return self._pop_at(self._max_index())

    def _pop_at(self, i: int) -> T:
        a = self._a
        last = a.pop()
        if i == len(a):
            return last
        out = a[i]
        a[i] = last
        self._trickle_down(i)
        return out

    def _trickle_down(self, i: int) -> None:
        a = self._a
        n = len(a)
        maxi = not _is_min_level(i)
        better = (lambda u, v: u > v) if maxi else (lambda u, v: u < v)
        while True:
            first = 2 * i + 1
            if first >= n:
                return
            # best among children and grandchildren
            cands = [c for c in (first, first + 1) if c < n]
            for c in (first, first + 1):
                cands.extend(g for g in (2 * c + 1, 2 * c + 2) if g < n)
            m = cands[0]
            for c in cands[1:]:
                if better(a[c], a[m]):
                    m = c
            if m <= first + 1:
                if better(a[m], a[i]):
                    a[m], a[i] = a[i], a[m]
                return
            if not better(a[m], a[i]):
                return
            a[m], a[i] = a[i], a[m]
            parent = (m - 1) // 2
            if better(a[parent], a[m]):
                a[m], a[parent] = a[parent], a[m]
            i = m


class BoundedBest(Generic[T]):
    """Keeps the ``capacity`` smallest ``(key, item)`` entries seen, with unique identities.

    :meth:`offer` accepts an entry when the container has room or when its key
    beats the current worst, which is then evicted.
    """

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be at least 1")
        self.capacity = capacity
        self._heap: MinMaxHeap[tuple[Any, int, Any, T]] = MinMaxHeap()
        self._ids: set = set()
        self._seq = 0

    def __len__(self) -> int:
        return len(self._heap)

    def __contains__(self, ident) -> bool:
        return ident in self._ids

    def worst_key(self):
        return self._heap.max()[0]

    def best_key(self):
        return self._heap.min()[0]

    def offer(self, key, ident, item: T) -> bool:
        if ident in self._ids:
            return False
        if len(self._heap) >= self.capacity:
            if not key < self.worst_key():
                return False
            evicted = self._heap.pop_max()
            self._ids.discard(evicted[2])
        self._heap.push((key, self._seq, ident, item))
        self._seq += 1
        self._ids.add(ident)
        return True

    def items(self) -> list[T]:
        """Entries from best to worst key (insertion order breaks ties)."""
        return [entry[3] for entry in self._heap]
