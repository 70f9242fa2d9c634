"""
The CK+ machine: call-by-need evaluation with variables resolved on the control stack.

A continuation stack is one partial frame on top of a sequence of complete
(``Bind``) frames, one per established application.  When the control string
is ``Var(n)`` with renaming environment ``R`` its binding is the complete frame
at position ``n + R(n)`` counted from the top, so :func:`step` reaches it by
index.  Complete frames live in a persistent sequence, which makes locating
and splitting off that frame O(1).

Machine rules, in dispatch order::

    shift-arg    <M N, R, <k, K..>>           -> <M, R, <arg(N,R,k), K..>>
    descend-lam  <\\.M, R, <arg(N,R',k), K..>> -> <M, 0:R, <mt, bind(N,R',k), K..>>
    lookup-arg   <n, R, S1 ++ <bind(N,R',k), K..>>, |S1| = n+R(n)+1
                                              -> <N, R', <op(S1,k), K..>>
    resume       <V, R, <op(S,k), K..>>       -> <V, R+|S|, S ++ <bind(V,R,k), K..>>
    ans-search1  <V, R, <mt, K..>>            -> <V, R, <K..>, <mt>>
    ans-search2  <V, R, <F', K..>, <mt, F..>> -> <V, R, <K..>, <mt, F.., F'>>
    assoc-L      <V, R, <K.., bind(M,R',arg(N,R'',k))>, <mt, F..>>
                   -> <body(V), 0:R, <mt, bind(N,R''+|F..|+1,mt), F.., bind(M,R',k), K..>>
    assoc-R      <V, R, <K.., bind(M,R',op(S,k))>, <mt, F..>>
                   -> <V, R, <op(S',mt), F.., bind(M,R',k), K..>>

(search states list the remaining frames bottom first.)  In assoc-R, ``S'`` is
``S`` with every reference that escapes it moved past the ``|F..|`` answer
frames and the binder of ``V``; the ``resume`` that follows performs the
dereference, so each reduction rule is exactly one step of the calculus.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Callable, Iterator, Optional, Union

from ._pseq import PSeq
from .calculus import Answer, BudgetExceeded
from .renaming import EMPTY, MalformedStateError, RenamingEnv, apply
from .syntax import App, Lam, Term, Var, free_indices, pretty

__all__ = [
    "Mt", "MT", "Arg", "Op", "Bind", "PartialFrame", "ContinuationStack",
    "Eval", "Search", "MachineState", "StepRecord", "StackMetrics",
    "MalformedStateError", "OpenTermError",
    "RULES", "REDUCTION_RULES", "DEFAULT_STEP_BUDGET",
    "inject", "step", "is_final", "unload", "run", "eval_ckplus",
    "stack_metrics", "check_state", "shift_stack", "plug_stack",
    "record_to_json", "trace_header",
]

DEFAULT_STEP_BUDGET = 100_000

RULES = (
    "shift-arg", "descend-λ", "lookup-arg", "resume",
    "ans-search1", "ans-search2", "assoc-L", "assoc-R",
)
REDUCTION_RULES = frozenset({"resume", "assoc-L", "assoc-R"})

# bind frames carry a provenance label (ignored by equality) so that traces can
# tell which binding a lookup targets even after frames have been rebuilt
_labels = itertools.count()


class OpenTermError(ValueError):
    pass


# ---------------------------------------------------------------------------
# frames and stacks

@dataclass(frozen=True, slots=True)
class Mt:
    def __repr__(self) -> str:
        return "Mt"


MT = Mt()


@dataclass(frozen=True, slots=True)
class Arg:
    term: Term
    env: RenamingEnv
    rest: PartialFrame


@dataclass(frozen=True, slots=True)
class Op:
    saved: ContinuationStack
    rest: PartialFrame
    label: int = field(default=-1, compare=False)


@dataclass(frozen=True, slots=True)
class Bind:
    term: Term
    env: RenamingEnv
    inner: PartialFrame
    label: int = field(default=-1, compare=False)


PartialFrame = Union[Mt, Arg, Op]


class ContinuationStack:
    """A partial frame ``top`` above complete frames ``below`` (stored bottom first).

    ``len(stack)`` counts every frame including the top one, as ``|S|`` does.
    """

    __slots__ = ("top", "below")

    def __init__(self, top: PartialFrame = MT, below: PSeq | None = None):
        self.top = top
        self.below = PSeq() if below is None else below

    def __len__(self) -> int:
        return 1 + len(self.below)

    @property
    def binds(self) -> int:
        return len(self.below)

    def complete(self, i: int) -> Bind:
        """The ``i``-th complete frame counted from the top (0-based)."""
        return self.below[len(self.below) - 1 - i]

    def frames(self) -> Iterator:
        """All frames, top first."""
        yield self.top
        yield from reversed(self.below)

    def __eq__(self, other) -> bool:
        if not isinstance(other, ContinuationStack):
            return NotImplemented
        return self.top == other.top and self.below == other.below

    def __hash__(self) -> int:
        return hash((self.top, self.below))

    def __repr__(self) -> str:
        return "<" + ", ".join(repr(f) for f in self.frames()) + ">"


# ---------------------------------------------------------------------------
# machine states

@dataclass(frozen=True, slots=True)
class Eval:
    control: Term
    env: RenamingEnv
    stack: ContinuationStack


@dataclass(frozen=True, slots=True)
class Search:
    """Answer search: ``remaining`` is stored bottom first, ``answers`` in the order found."""
    value: Lam
    env: RenamingEnv
    remaining: PSeq
    answers: PSeq


MachineState = Union[Eval, Search]


@dataclass(frozen=True, slots=True)
class StepRecord:
    rule: str
    before: MachineState
    after: MachineState


@dataclass(frozen=True, slots=True)
class StackMetrics:
    depth: int
    bind_count: int
    answer_frames: int


def inject(t: Term) -> Eval:
    if free_indices(t):
        raise OpenTermError(f"program is not closed: {pretty(t)}")
    return Eval(t, EMPTY, ContinuationStack())


def is_final(s: MachineState) -> bool:
    return isinstance(s, Search) and len(s.remaining) == 0


# ---------------------------------------------------------------------------
# offset adjustment over frames

def _shift_partial(k: PartialFrame, x: int, threshold: int) -> PartialFrame:
    if isinstance(k, Mt):
        return k
    if isinstance(k, Arg):
        return Arg(k.term, k.env.adjust(x, threshold), _shift_partial(k.rest, x, threshold))
    return Op(shift_stack(k.saved, x, threshold + 1), _shift_partial(k.rest, x, threshold), k.label)


def _shift_bind(f: Bind, x: int, threshold: int) -> Bind:
    return Bind(f.term, f.env.adjust(x, threshold), _shift_partial(f.inner, x, threshold), f.label)


def shift_stack(s: ContinuationStack, x: int, threshold: int) -> ContinuationStack:
    """Move by ``x`` every offset that reaches below the bottom of ``s``.

    ``threshold`` applies to the bottom complete frame and grows by one per
    frame towards the top: a reference from that frame with effective index
    ``e`` escapes the stack iff ``e > threshold``.
    """
    below = PSeq(_shift_bind(f, x, threshold + b) for b, f in enumerate(s.below))
    return ContinuationStack(_shift_partial(s.top, x, threshold + len(below)), below)


# ---------------------------------------------------------------------------
# transitions

def step(s: MachineState) -> Optional[StepRecord]:
    """Apply the unique applicable rule; ``None`` for a final state."""
    if isinstance(s, Eval):
        c, r, stack = s.control, s.env, s.stack
        top = stack.top
        if isinstance(c, App):
            return StepRecord("shift-arg", s, Eval(c.fn, r, ContinuationStack(Arg(c.arg, r, top), stack.below)))
        if isinstance(c, Var):
            j = c.index + r[c.index]
            if j >= stack.binds:
                raise MalformedStateError(f"variable {c.index} resolves to frame {j + 1} of {len(stack)}")
            below = stack.below
            cut = len(below) - 1 - j
            bind = below[cut]
            saved = ContinuationStack(top, below[cut + 1:])
            nxt = Eval(bind.term, bind.env, ContinuationStack(Op(saved, bind.inner, bind.label), below[:cut]))
            return StepRecord("lookup-arg", s, nxt)
        if isinstance(top, Arg):
            bind = Bind(top.term, top.env, top.rest, next(_labels))
            nxt = Eval(c.body, r.cons(0), ContinuationStack(MT, stack.below.append(bind)))
            return StepRecord("descend-λ", s, nxt)
        if isinstance(top, Op):
            saved = top.saved
            below = stack.below.append(Bind(c, r, top.rest, top.label)).extend(saved.below)
            nxt = Eval(c, r.add_all(len(saved)), ContinuationStack(saved.top, below))
            return StepRecord("resume", s, nxt)
        return StepRecord("ans-search1", s, Search(c, r, stack.below, PSeq()))

    rem, answers = s.remaining, s.answers
    if not rem:
        return None
    frame = rem[-1]
    inner = frame.inner
    if isinstance(inner, Mt):
        return StepRecord("ans-search2", s, Search(s.value, s.env, rem[:-1], answers.append(frame)))
    if isinstance(inner, Arg):
        outer = Bind(frame.term, frame.env, inner.rest, frame.label)
        arg = Bind(inner.term, inner.env.add_all(len(answers) + 1), MT, next(_labels))
        below = rem[:-1].append(outer).extend(reversed(answers)).append(arg)
        nxt = Eval(s.value.body, s.env.cons(0), ContinuationStack(MT, below))
        return StepRecord("assoc-L", s, nxt)
    # the demanding context moves inside the answer's bindings; references
    # from it that escape below it now also cross the answer frames and the
    # new binder.  The value is handed back to it by the next [resume].
    saved = shift_stack(inner.saved, len(answers) + 1, 0)
    outer = Bind(frame.term, frame.env, inner.rest, frame.label)
    below = rem[:-1].append(outer).extend(reversed(answers))
    nxt = Eval(s.value, s.env, ContinuationStack(Op(saved, MT, inner.label), below))
    return StepRecord("assoc-R", s, nxt)


# ---------------------------------------------------------------------------
# unloading

def _plug_partial(k: PartialFrame, t: Term) -> Term:
    while not isinstance(k, Mt):
        if isinstance(k, Arg):
            t = App(t, apply(k.env, k.term))
        else:
            t = App(Lam(plug_stack(k.saved, Var(len(k.saved) - 1))), t)
        k = k.rest
    return t


def _plug_bind(f: Bind, t: Term) -> Term:
    return _plug_partial(f.inner, App(Lam(t), apply(f.env, f.term)))


def plug_stack(s: ContinuationStack, t: Term) -> Term:
    t = _plug_partial(s.top, t)
    for f in reversed(s.below):
        t = _plug_bind(f, t)
    return t


def unload(s: MachineState) -> Term:
    """Reconstruct the program a state stands for."""
    if isinstance(s, Eval):
        return plug_stack(s.stack, apply(s.env, s.control))
    t = apply(s.env, s.value)
    for f in s.answers:
        t = _plug_bind(f, t)
    for f in reversed(s.remaining):
        t = _plug_bind(f, t)
    return t


# ---------------------------------------------------------------------------
# running

Compactor = Callable[[MachineState, int], Optional[MachineState]]


def run(
    s: MachineState,
    budget: int | None = DEFAULT_STEP_BUDGET,
    *,
    max_reductions: int | None = None,
    step_fn: Callable[[MachineState], Optional[StepRecord]] = step,
    compactor: Compactor | None = None,
    check: bool = False,
) -> Iterator[StepRecord]:
    """Yield the machine's transitions from ``s``.

    Stops at a final state, after ``budget`` transitions (``None`` for no
    limit), or before a reduction that would exceed ``max_reductions``.  A ``compactor`` is
    consulted after every transition and may replace the state; such
    replacements are yielded with rule ``"sc"`` and not counted.  With
    ``check`` every state reached is validated by :func:`check_state`.
    """
    steps = reductions = 0
    while budget is None or steps < budget:
        rec = step_fn(s)
        if rec is None:
            return
        if rec.rule in REDUCTION_RULES and max_reductions is not None:
            if reductions == max_reductions:
                return
            reductions += 1
        steps += 1
        if check:
            check_state(rec.after)
        yield rec
        s = rec.after
        if compactor is not None:
            c = compactor(s, steps)
            if c is not None and c is not s:
                if check:
                    check_state(c)
                yield StepRecord("sc", s, c)
                s = c


def eval_ckplus(
    t: Term,
    budget: int | None = DEFAULT_STEP_BUDGET,
    *,
    max_reductions: int | None = None,
    step_fn: Callable[[MachineState], Optional[StepRecord]] = step,
    compactor: Compactor | None = None,
    check: bool = False,
) -> Answer | BudgetExceeded:
    """Run the machine from ``inject(t)``; ``Answer.steps`` counts machine transitions."""
    s: MachineState = inject(t)
    steps = 0
    for rec in run(s, budget, max_reductions=max_reductions, step_fn=step_fn, compactor=compactor, check=check):
        s = rec.after
        if rec.rule != "sc":
            steps += 1
    if is_final(s):
        return Answer(unload(s), steps)
    return BudgetExceeded(steps)


def stack_metrics(s: MachineState) -> StackMetrics:
    if isinstance(s, Eval):
        return StackMetrics(len(s.stack), s.stack.binds, 0)
    return StackMetrics(len(s.remaining), len(s.remaining) + len(s.answers), len(s.answers))


# ---------------------------------------------------------------------------
# well-formedness

def _check_pair(t: Term, r: RenamingEnv, avail: int, where: str) -> None:
    for n in free_indices(t):
        if n >= len(r):
            raise MalformedStateError(f"{where}: index {n} has no renaming slot ({len(r)} slots)")
        e = n + r[n]
        if e >= avail:
            raise MalformedStateError(f"{where}: index {n} reaches frame {e + 1}, only {avail} binders below")


def _check_partial(k, avail: int, where: str) -> None:
    while not isinstance(k, Mt):
        if isinstance(k, Arg):
            _check_pair(k.term, k.env, avail, where + "/arg")
        elif isinstance(k, Op):
            _check_stack(k.saved, avail + 1, where + "/op")
        else:
            raise MalformedStateError(f"{where}: {type(k).__name__} inside a partial frame")
        k = k.rest


def _check_bind(f, avail: int, where: str, answer: bool = False) -> None:
    if not isinstance(f, Bind):
        raise MalformedStateError(f"{where}: expected a complete frame, got {type(f).__name__}")
    if answer and not isinstance(f.inner, Mt):
        raise MalformedStateError(f"{where}: answer frame with non-empty inner continuation")
    _check_pair(f.term, f.env, avail, where)
    _check_partial(f.inner, avail, where)


def _check_stack(s: ContinuationStack, base: int, where: str) -> None:
    for b, f in enumerate(s.below):
        _check_bind(f, base + b, f"{where}[{len(s.below) - b}]")
    if isinstance(s.top, Bind):
        raise MalformedStateError(f"{where}: top frame is complete")
    _check_partial(s.top, base + len(s.below), f"{where}[0]")


def check_state(s: MachineState) -> None:
    """Raise :class:`MalformedStateError` unless ``s`` is well formed.

    Every free variable of every (term, environment) pair must have a slot,
    and its effective index must land on an existing binder below the pair's
    position; the stack must be a partial frame over complete frames; answer
    frames must have empty inner continuations.
    """
    if isinstance(s, Eval):
        _check_stack(s.stack, 0, "stack")
        _check_pair(s.control, s.env, s.stack.binds, "control")
        return
    if not isinstance(s.value, Lam):
        raise MalformedStateError("answer search on a non-value")
    n_rem, n_ans = len(s.remaining), len(s.answers)
    for b, f in enumerate(s.remaining):
        _check_bind(f, b, f"remaining[{n_rem - b}]")
    for i, f in enumerate(s.answers):
        _check_bind(f, n_rem + n_ans - 1 - i, f"answers[{i}]", answer=True)
    _check_pair(s.value, s.env, n_rem + n_ans, "value")


# ---------------------------------------------------------------------------
# trace serialization

TRACE_SCHEMA = "cbneed-trace/1"


def trace_header(term: Term) -> str:
    return json.dumps({"schema": TRACE_SCHEMA, "program": pretty(term)}, ensure_ascii=False)


def record_to_json(i: int, rec: StepRecord, phi: bool = False, check: str | None = None) -> str:
    after = rec.after
    if isinstance(after, Eval):
        control, env = after.control, after.env
    else:
        control, env = after.value, after.env
    obj = {
        "step": i,
        "rule": rec.rule,
        "control": pretty(control),
        "env": list(env),
        "stack_depth": stack_metrics(after).depth,
    }
    if phi:
        obj["phi"] = pretty(unload(after))
    if check is not None:
        obj["check"] = check
    return json.dumps(obj, ensure_ascii=False)
