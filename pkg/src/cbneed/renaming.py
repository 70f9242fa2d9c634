"""
Renaming environments: delayed index adjustments for a control string.

An environment holds one offset per variable in scope; slot ``n`` is the
offset ``R(n)`` for index ``n`` and the *effective index* of ``n`` is
``n + R(n)``.  Applying an environment to a term performs the renaming.

Offsets are normally non-negative.  Compaction may need to move a variable
*down* past a deleted frame when its own index already reaches past it, so an
offset may drop below zero as long as the effective index stays non-negative.
"""

from __future__ import annotations

from typing import Iterable, Iterator

from ._pseq import PSeq
from .syntax import App, Lam, Term, Var

__all__ = ["RenamingEnv", "EMPTY", "MalformedStateError", "lookup", "apply", "add_all", "adjust"]


class MalformedStateError(RuntimeError):
    """A machine state violates its structural invariants."""


class RenamingEnv:
    """Immutable sequence of offsets, ``env[n] == R(n)``.

    Consing a slot and adding a constant to every slot are O(1): slots are kept
    in a persistent sequence (slot 0 last) relative to a shared bias.
    """

    __slots__ = ("_slots", "_bias")

    def __init__(self, offsets: Iterable[int] = ()):
        offsets = list(offsets)
        if any(j + o < 0 for j, o in enumerate(offsets)):
            raise ValueError(f"effective indices must be non-negative: {offsets}")
        self._slots = PSeq(reversed(offsets))
        self._bias = 0

    @classmethod
    def _make(cls, slots: PSeq, bias: int) -> RenamingEnv:
        r = object.__new__(cls)
        r._slots, r._bias = slots, bias
        return r

    def __len__(self) -> int:
        return len(self._slots)

    def __getitem__(self, n: int) -> int:
        k = len(self._slots)
        if not 0 <= n < k:
            raise MalformedStateError(f"no renaming slot for index {n} (environment has {k})")
        return self._slots[k - 1 - n] + self._bias

    def __iter__(self) -> Iterator[int]:
        bias = self._bias
        for s in reversed(self._slots):
            yield s + bias

    def cons(self, offset: int = 0) -> RenamingEnv:
        """``offset : R``, the environment under one more binder."""
        return RenamingEnv._make(self._slots.append(offset - self._bias), self._bias)

    def add_all(self, x: int) -> RenamingEnv:
        if x == 0:
            return self
        return RenamingEnv._make(self._slots, self._bias + x)

    def adjust(self, x: int, threshold: int) -> RenamingEnv:
        """Add ``x`` to slot ``j`` whenever its effective index ``j + R(j)`` exceeds ``threshold``."""
        if x == 0:
            return self
        out = []
        changed = False
        for j, o in enumerate(self):
            if j + o > threshold:
                o += x
                changed = True
                if j + o < 0:
                    raise MalformedStateError(f"slot {j} would get effective index {j + o}")
            out.append(o)
        return RenamingEnv(out) if changed else self

    def reach(self) -> int:
        """Largest effective index over all slots, or -1 when empty."""
        return max((j + o for j, o in enumerate(self)), default=-1)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RenamingEnv):
            return NotImplemented
        return len(self) == len(other) and tuple(self) == tuple(other)

    def __hash__(self) -> int:
        return hash(tuple(self))

    def __repr__(self) -> str:
        return f"RenamingEnv({list(self)!r})"

    def __str__(self) -> str:
        return "(" + ", ".join(map(str, self)) + ")"


EMPTY = RenamingEnv()


def lookup(r: RenamingEnv, n: int) -> int:
    return r[n]


def add_all(r: RenamingEnv, x: int) -> RenamingEnv:
    return r.add_all(x)


def adjust(t: Term, r: RenamingEnv, x: int, threshold: int) -> RenamingEnv:
    """``(t, r)`` with offsets moved by ``x`` past ``threshold``.

    Applied to every slot rather than only to variables occurring in ``t``;
    slots of absent variables are never dereferenced.
    """
    return r.adjust(x, threshold)


def apply(r: RenamingEnv, t: Term) -> Term:
    """Rename ``t``: each free ``Var(n)`` becomes ``Var(n + R(n))``."""
    if len(r) == 0:
        return t

    def go(t: Term, depth: int) -> Term:
        if isinstance(t, Var):
            if t.index < depth:
                return t
            return Var(t.index + r[t.index - depth])
        if isinstance(t, Lam):
            return Lam(go(t.body, depth + 1))
        return App(go(t.fn, depth), go(t.arg, depth))

    return go(t, 0)
