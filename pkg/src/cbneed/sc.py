"""
Stack compaction: drop bind frames that no live variable can reach.

The SC machine scans a CK+ continuation stack from the top, carrying the set
of frame distances still referenced (relative to the next frame to scan).  A
complete frame at distance 0 is kept; any other is popped, its inner partial
frame is grafted onto the bottom of the kept stack, and offsets that reached
past it are decremented.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Union

from ._pseq import PSeq
from .ckplus import (
    MT, Arg, Bind, ContinuationStack, Eval, MachineState, Mt, Op, PartialFrame,
    shift_stack, stack_metrics,
)
from .renaming import MalformedStateError, RenamingEnv
from .syntax import App, Lam, Term, Var, free_indices, shift

__all__ = [
    "fv_term", "fv_frame", "fv_stack", "dec", "merge", "merge_partial",
    "SCState", "sc_step", "initial_sc_state", "compact",
    "CompactionPolicy", "Compactor", "normalize",
]

FreeSet = frozenset


def fv_term(t: Term, r: RenamingEnv, m: int) -> frozenset[int]:
    """Distances ``n + R(n) - m`` of the free variables of ``t`` that reach at least ``m``."""
    out = set()
    for n in free_indices(t):
        e = n + r[n]
        if e >= m:
            out.add(e - m)
    return frozenset(out)


# Frames are immutable and shared between successive states, so each frame's
# distances from its own level are computed once and reused.  The memo is
# keyed by identity and holds the frame, so ids cannot be recycled while cached.
_MEMO: dict[int, tuple[object, frozenset[int]]] = {}
_MEMO_LIMIT = 1 << 18
_EMPTY: frozenset[int] = frozenset()


def _remember(obj, value: frozenset[int]) -> frozenset[int]:
    if len(_MEMO) >= _MEMO_LIMIT:
        _MEMO.clear()
    _MEMO[id(obj)] = (obj, value)
    return value


def _recall(obj) -> frozenset[int] | None:
    hit = _MEMO.get(id(obj))
    return hit[1] if hit is not None and hit[0] is obj else None


def _above(ds: frozenset[int], m: int) -> frozenset[int]:
    """Distances seen from ``m`` levels further up; those below ``m`` are bound on the way."""
    if m == 0 or not ds:
        return ds
    return frozenset(d - m for d in ds if d >= m)


def _partial0(k: PartialFrame) -> frozenset[int]:
    pending = []
    acc = _EMPTY
    while not isinstance(k, Mt):
        hit = _recall(k)
        if hit is not None:
            acc = hit
            break
        pending.append(k)
        k = k.rest
    for k in reversed(pending):
        own = fv_term(k.term, k.env, 0) if isinstance(k, Arg) else _above(_stack0(k.saved), 1)
        acc = _remember(k, own | acc)
    return acc


def _stack0(s: ContinuationStack) -> frozenset[int]:
    hit = _recall(s)
    if hit is not None:
        return hit
    out = set(_above(_partial0(s.top), len(s.below)))
    for b, f in enumerate(s.below):
        out |= _above(_frame0(f), b)
    return _remember(s, frozenset(out))


def _frame0(f) -> frozenset[int]:
    if not isinstance(f, Bind):
        return _partial0(f)
    hit = _recall(f)
    if hit is not None:
        return hit
    return _remember(f, fv_term(f.term, f.env, 0) | _partial0(f.inner))


def _fv_partial(k: PartialFrame, m: int) -> frozenset[int]:
    return _above(_partial0(k), m)


def fv_stack(s: ContinuationStack, m: int) -> frozenset[int]:
    """Free distances of a stack nested under one binder, as inside an ``op`` frame.

    ``m`` counts the binder the stack sits under; a frame with ``b`` complete
    frames beneath it inside the stack sees ``b`` more.
    """
    return _above(_stack0(s), m)


def fv_frame(f, m: int = 0) -> frozenset[int]:
    return _above(_frame0(f), m)


def dec(free: frozenset[int]) -> frozenset[int]:
    """Decrement every element; 0 names the frame just scanned and drops out."""
    return frozenset(d - 1 for d in free if d >= 1)


def merge_partial(k: PartialFrame, tail: PartialFrame) -> PartialFrame:
    """Graft ``tail`` in place of the ``mt`` that ends ``k``."""
    if isinstance(k, Mt):
        return tail
    if isinstance(k, Arg):
        return Arg(k.term, k.env, merge_partial(k.rest, tail))
    return Op(k.saved, merge_partial(k.rest, tail), k.label)


def merge(s: ContinuationStack, k: PartialFrame) -> ContinuationStack:
    """``s @ k``: graft ``k`` into the bottom frame of ``s``."""
    if not s.below:
        return ContinuationStack(merge_partial(s.top, k), s.below)
    bottom = s.below[0]
    bottom = Bind(bottom.term, bottom.env, merge_partial(bottom.inner, k), bottom.label)
    return ContinuationStack(s.top, PSeq([bottom]).extend(s.below[1:]))


@dataclass(frozen=True, slots=True)
class SCState:
    """``<free, (term, env), input, output>``.

    ``input_top`` is the unscanned partial frame (``None`` once shifted) and
    ``input`` the unscanned complete frames, bottom first.  ``output`` is the
    kept stack.
    """
    free: frozenset
    term: Term
    env: RenamingEnv
    input_top: Optional[PartialFrame]
    input: PSeq
    output: Optional[ContinuationStack]


def initial_sc_state(s: Eval) -> SCState:
    return SCState(fv_term(s.control, s.env, 0), s.control, s.env, s.stack.top, s.stack.below, None)


def sc_step(s: SCState) -> tuple[str, SCState] | None:
    """One SC transition as ``(rule, next)``, or ``None`` when the input is exhausted."""
    if s.output is None:
        if s.input_top is None:
            raise MalformedStateError("SC state has neither a partial frame to shift nor output")
        k = s.input_top
        free = s.free | _fv_partial(k, 0)
        return "shift-partial-frame", SCState(frozenset(free), s.term, s.env, None, s.input, ContinuationStack(k))
    if not s.input:
        if s.free:
            raise MalformedStateError(f"references past the bottom of the stack: {sorted(s.free)}")
        return None
    frame = s.input[-1]
    rest = s.input[:-1]
    if 0 in s.free:
        free = dec(s.free) | fv_frame(frame, 0)
        out = ContinuationStack(s.output.top, PSeq([frame]).extend(s.output.below))
        return "shift-complete-frame", SCState(free, s.term, s.env, None, rest, out)
    # nothing reaches this frame: every reference past it moves up by one.
    # Its inner partial frame survives at the same level, so its references
    # stay live.
    threshold = s.output.binds
    env = s.env.adjust(-1, threshold)
    out = merge(shift_stack(s.output, -1, 0), frame.inner)
    free = dec(s.free) | _fv_partial(frame.inner, 0)
    return "pop-frame", SCState(free, s.term, env, None, rest, out)


def _has_dead_frame(s: Eval) -> bool:
    """Run the SC scan's liveness bookkeeping alone, without building output."""
    free = fv_term(s.control, s.env, 0) | _fv_partial(s.stack.top, 0)
    for frame in reversed(s.stack.below):
        if 0 not in free:
            return True
        free = dec(free) | fv_frame(frame, 0)
    if free:
        raise MalformedStateError(f"references past the bottom of the stack: {sorted(free)}")
    return False


def compact(s: Eval) -> Eval:
    """The ``[sc]`` transition: remove every unreachable bind frame from ``s``."""
    if not isinstance(s, Eval):
        raise TypeError("compaction applies to eval states only")
    # a scan that keeps every frame returns the state unchanged; the SC
    # machine's output is rebuilt frame by frame, so skip it in that case
    if not _has_dead_frame(s):
        return s
    st = initial_sc_state(s)
    popped = False
    while True:
        nxt = sc_step(st)
        if nxt is None:
            break
        rule, st = nxt
        popped |= rule == "pop-frame"
    if not popped:
        return s
    return Eval(s.control, st.env, st.output)


# ---------------------------------------------------------------------------
# policies

@dataclass(frozen=True)
class CompactionPolicy:
    """When to apply ``[sc]`` during a run.

    ``kind`` is ``"off"`` / ``"manual"`` (never automatically), ``"every"``
    (at the first eval state after each ``n`` machine steps) or ``"depth"``
    (whenever an eval state holds more than ``n`` bind frames, or more than
    twice what the previous compaction kept, whichever is larger).
    """
    kind: str = "off"
    n: int = 0

    def __post_init__(self) -> None:
        if self.kind not in ("off", "manual", "every", "depth"):
            raise ValueError(f"unknown compaction policy {self.kind!r}")
        if self.kind in ("every", "depth") and self.n < 1:
            raise ValueError(f"compaction policy {self.kind} needs a positive parameter")

    @classmethod
    def parse(cls, text: str) -> CompactionPolicy:
        kind, _, arg = text.partition(":")
        if kind in ("off", "manual"):
            if arg:
                raise ValueError(f"policy {kind!r} takes no parameter")
            return cls(kind)
        try:
            n = int(arg)
        except ValueError:
            raise ValueError(f"bad compaction policy {text!r}; expected off|manual|every:N|depth:D") from None
        return cls(kind, n)

    def compactor(self) -> Optional[Compactor]:
        if self.kind in ("off", "manual"):
            return None
        return Compactor(self)

    def __str__(self) -> str:
        return self.kind if self.kind in ("off", "manual") else f"{self.kind}:{self.n}"


class Compactor:
    """Callback for :func:`cbneed.ckplus.run` implementing a policy."""

    def __init__(self, policy: CompactionPolicy):
        self.policy = policy
        self.pending = False
        self.limit = policy.n

    def __call__(self, s: MachineState, steps: int) -> Optional[MachineState]:
        p = self.policy
        if p.kind == "every":
            if steps % p.n == 0:
                self.pending = True
            if self.pending and isinstance(s, Eval):
                self.pending = False
                return compact(s)
            return None
        if isinstance(s, Eval) and stack_metrics(s).bind_count > self.limit:
            c = compact(s)
            # back off while most of the stack is live, so that a growing live
            # stack is rescanned a logarithmic number of times, not every step
            self.limit = max(p.n, 2 * stack_metrics(c).bind_count)
            return c
        return None


# ---------------------------------------------------------------------------
# garbage-insensitive comparison

def normalize(t: Term) -> Term:
    """Erase every binding whose parameter is unused: ``(\\. M) N -> M`` with indices moved down."""
    if isinstance(t, Var):
        return t
    if isinstance(t, Lam):
        return Lam(normalize(t.body))
    fn, arg = normalize(t.fn), normalize(t.arg)
    if isinstance(fn, Lam) and 0 not in free_indices(fn.body):
        return shift(fn.body, -1, 1)
    return App(fn, arg)
