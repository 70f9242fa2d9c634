"""Persistent sequence with O(1) indexing and slicing and amortized O(1) append."""

from __future__ import annotations

from typing import Generic, Iterable, Iterator, TypeVar

T = TypeVar("T")


class PSeq(Generic[T]):
    """An immutable view ``items[lo:hi]`` over a list that is only ever grown.

    Appending to a view that ends at the end of its backing list extends the
    list in place; the new slot is invisible to every existing view, so all
    views stay immutable.  Any other append copies.  The identity check after
    ``list.append`` makes a lost race between two appenders fall back to a copy.
    """

    __slots__ = ("_items", "_lo", "_hi")

    def __init__(self, items: Iterable[T] = ()):
        self._items = list(items)
        self._lo = 0
        self._hi = len(self._items)

    @classmethod
    def _view(cls, items: list, lo: int, hi: int) -> PSeq[T]:
        s = object.__new__(cls)
        s._items, s._lo, s._hi = items, lo, hi
        return s

    def __len__(self) -> int:
        return self._hi - self._lo

    def __getitem__(self, i):
        if isinstance(i, slice):
            lo, hi, step = i.indices(self._hi - self._lo)
            if step != 1:
                raise ValueError("PSeq slices must be contiguous")
            hi = max(hi, lo)
            return PSeq._view(self._items, self._lo + lo, self._lo + hi)
        n = self._hi - self._lo
        if i < 0:
            i += n
        if not 0 <= i < n:
            raise IndexError("PSeq index out of range")
        return self._items[self._lo + i]

    def __iter__(self) -> Iterator[T]:
        items = self._items
        for i in range(self._lo, self._hi):
            yield items[i]

    def __reversed__(self) -> Iterator[T]:
        items = self._items
        for i in range(self._hi - 1, self._lo - 1, -1):
            yield items[i]

    def append(self, x: T) -> PSeq[T]:
        items, hi = self._items, self._hi
        if hi < len(items) and items[hi] is x:
            return PSeq._view(items, self._lo, hi + 1)
        if hi == len(items):
            items.append(x)
            if items[hi] is x:
                return PSeq._view(items, self._lo, hi + 1)
        fresh = items[self._lo:hi]
        fresh.append(x)
        return PSeq._view(fresh, 0, len(fresh))

    def extend(self, xs: Iterable[T]) -> PSeq[T]:
        s = self
        for x in xs:
            s = s.append(x)
        return s

    def to_tuple(self) -> tuple[T, ...]:
        return tuple(self._items[self._lo:self._hi])

    def __eq__(self, other) -> bool:
        if not isinstance(other, PSeq):
            return NotImplemented
        if len(self) != len(other):
            return False
        if self._items is other._items and self._lo == other._lo:
            return True
        return self.to_tuple() == other.to_tuple()

    def __hash__(self) -> int:
        return hash(self.to_tuple())

    def __repr__(self) -> str:
        return f"PSeq({list(self)!r})"
