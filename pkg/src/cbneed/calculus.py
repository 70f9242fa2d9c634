"""
The call-by-need calculus on de Bruijn terms and its standard-reduction evaluator.

Evaluation contexts::

    E ::= []  |  E M  |  (\\. E) M  |  (\\. E'[n]) E      where n = delta(E')

Answers are values under retained bindings, ``A[V]`` with ``A ::= [] | (\\. A) M``.
The three notions of reduction (with index shifts)::

    deref    (\\. E[n]) V              ->  (\\. E[shift(V, delta(E)+1)]) V
    assoc-L  ((\\. A[V]) M) N          ->  (\\. A[V shift(N, delta(A)+1)]) M
    assoc-R  (\\. E[n]) ((\\. A[V]) M)  ->  (\\. A[shift(\\. E[n], delta(A)+1) V]) M

:func:`step_need` decomposes the whole program, contracts and plugs back.
:func:`eval_need` computes the same reduction sequence but resumes the search
for the next redex from the contractum instead of from the root, which keeps
long divergent runs affordable.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Union

from .syntax import App, Lam, Term, Var, shift

__all__ = [
    "Hole", "AppL", "BindBody", "BindArg", "HOLE", "EvalContext",
    "AHole", "ABind", "AHOLE", "AnswerContext",
    "Deref", "AssocL", "AssocR", "Redex",
    "IsAnswer", "Decomposed", "Decomposition",
    "Answer", "BudgetExceeded", "AT_ANSWER", "StuckError",
    "delta", "plug", "to_eval_context", "decompose", "contract", "step_need",
    "eval_need", "eval_need_naive", "is_answer", "redex_term",
    "DEFAULT_REDUCTION_BUDGET",
]

DEFAULT_REDUCTION_BUDGET = 10_000


# ---------------------------------------------------------------------------
# contexts

@dataclass(frozen=True, slots=True)
class Hole:
    pass


@dataclass(frozen=True, slots=True)
class AppL:
    """``E M``: the hole is in operator position."""
    ctx: EvalContext
    arg: Term


@dataclass(frozen=True, slots=True)
class BindBody:
    """``(\\. E) M``: the hole is in the body of an applied abstraction."""
    ctx: EvalContext
    arg: Term


@dataclass(frozen=True, slots=True)
class BindArg:
    """``(\\. E'[n]) E``: the body demands its parameter, the hole is in the argument."""
    body: EvalContext
    ctx: EvalContext


@dataclass(frozen=True, slots=True)
class AHole:
    pass


@dataclass(frozen=True, slots=True)
class ABind:
    """``(\\. A) M``."""
    ctx: AnswerContext
    arg: Term


HOLE = Hole()
AHOLE = AHole()

EvalContext = Union[Hole, AppL, BindBody, BindArg]
AnswerContext = Union[AHole, ABind]


def to_eval_context(a: AnswerContext) -> EvalContext:
    layers = []
    while isinstance(a, ABind):
        layers.append(a.arg)
        a = a.ctx
    e: EvalContext = HOLE
    for arg in reversed(layers):
        e = BindBody(e, arg)
    return e


def delta(e: EvalContext | AnswerContext) -> int:
    """Number of binders between the top of ``e`` and its hole."""
    n = 0
    while True:
        if isinstance(e, (Hole, AHole)):
            return n
        if isinstance(e, (BindBody, ABind)):
            n += 1
        e = e.ctx


def plug(e: EvalContext | AnswerContext, t: Term) -> Term:
    layers = []
    while not isinstance(e, (Hole, AHole)):
        layers.append(e)
        e = e.ctx
    for layer in reversed(layers):
        if isinstance(layer, AppL):
            t = App(t, layer.arg)
        elif isinstance(layer, (BindBody, ABind)):
            t = App(Lam(t), layer.arg)
        else:
            t = App(Lam(plug(layer.body, Var(delta(layer.body)))), t)
    return t


# ---------------------------------------------------------------------------
# redexes and decomposition

@dataclass(frozen=True, slots=True)
class Deref:
    """``(\\. body[n]) value`` with n = delta(body)."""
    body: EvalContext
    value: Lam


@dataclass(frozen=True, slots=True)
class AssocL:
    """``((\\. a[v]) m) n``."""
    a: AnswerContext
    v: Lam
    m: Term
    n: Term


@dataclass(frozen=True, slots=True)
class AssocR:
    """``(\\. body[n]) ((\\. a[v]) m)`` with n = delta(body)."""
    body: EvalContext
    a: AnswerContext
    v: Lam
    m: Term


Redex = Union[Deref, AssocL, AssocR]


@dataclass(frozen=True, slots=True)
class IsAnswer:
    a: AnswerContext
    v: Lam


@dataclass(frozen=True, slots=True)
class Decomposed:
    e: EvalContext
    r: Redex


Decomposition = Union[IsAnswer, Decomposed]


class StuckError(RuntimeError):
    """A demanded variable has no binder: the program was not closed."""


def redex_term(r: Redex) -> Term:
    if isinstance(r, Deref):
        return App(Lam(plug(r.body, Var(delta(r.body)))), r.value)
    if isinstance(r, AssocL):
        return App(App(Lam(plug(r.a, r.v)), r.m), r.n)
    return App(Lam(plug(r.body, Var(delta(r.body)))), App(Lam(plug(r.a, r.v)), r.m))


def _split(t: Term):
    # ("ans", A, V) | ("need", E, distance) | ("redex", E, r)
    if isinstance(t, Var):
        return ("need", HOLE, t.index)
    if isinstance(t, Lam):
        return ("ans", AHOLE, t)
    kind, ctx, x = _split(t.fn)
    if kind == "redex":
        return ("redex", AppL(ctx, t.arg), x)
    if kind == "need":
        return ("need", AppL(ctx, t.arg), x)
    if isinstance(ctx, ABind):
        return ("redex", HOLE, AssocL(ctx.ctx, x, ctx.arg, t.arg))
    # operator is a bare abstraction: search its body
    kind, body, y = _split(x.body)
    if kind == "redex":
        return ("redex", BindBody(body, t.arg), y)
    if kind == "ans":
        return ("ans", ABind(body, t.arg), y)
    if y > 0:
        return ("need", BindBody(body, t.arg), y - 1)
    # the body demands this binder's argument
    kind, ctx, z = _split(t.arg)
    if kind == "redex":
        return ("redex", BindArg(body, ctx), z)
    if kind == "need":
        return ("need", BindArg(body, ctx), z)
    if isinstance(ctx, AHole):
        return ("redex", HOLE, Deref(body, z))
    return ("redex", HOLE, AssocR(body, ctx.ctx, z, ctx.arg))


def decompose(t: Term) -> Decomposition:
    """Split a closed term into an answer, or an evaluation context and a redex."""
    kind, ctx, x = _split(t)
    if kind == "ans":
        return IsAnswer(ctx, x)
    if kind == "redex":
        return Decomposed(ctx, x)
    raise StuckError(f"free variable at distance {x} is demanded")


def is_answer(t: Term) -> bool:
    while isinstance(t, App):
        if not isinstance(t.fn, Lam):
            return False
        t = t.fn.body
    return isinstance(t, Lam)


def contract(r: Redex) -> Term:
    if isinstance(r, Deref):
        return App(Lam(plug(r.body, shift(r.value, delta(r.body) + 1, 0))), r.value)
    if isinstance(r, AssocL):
        return App(Lam(plug(r.a, App(r.v, shift(r.n, delta(r.a) + 1, 0)))), r.m)
    lam = Lam(plug(r.body, Var(delta(r.body))))
    return App(Lam(plug(r.a, App(shift(lam, delta(r.a) + 1, 0), r.v))), r.m)


class _AtAnswer:
    __slots__ = ()

    def __repr__(self) -> str:
        return "AT_ANSWER"


AT_ANSWER = _AtAnswer()


def step_need(t: Term) -> Term | _AtAnswer:
    """One standard reduction step, or ``AT_ANSWER`` when ``t`` is an answer."""
    d = decompose(t)
    if isinstance(d, IsAnswer):
        return AT_ANSWER
    return plug(d.e, contract(d.r))


# ---------------------------------------------------------------------------
# evaluators

@dataclass(frozen=True, slots=True)
class Answer:
    term: Term
    steps: int


@dataclass(frozen=True, slots=True)
class BudgetExceeded:
    steps: int


def eval_need_naive(t: Term, budget: int = DEFAULT_REDUCTION_BUDGET) -> Answer | BudgetExceeded:
    """Iterate :func:`step_need`; at most ``budget`` reductions."""
    for steps in range(budget + 1):
        nxt = step_need(t)
        if nxt is AT_ANSWER:
            return Answer(t, steps)
        if steps == budget:
            break
        t = nxt
    return BudgetExceeded(budget)


# zipper layers, root first; each describes the App node just above the focus
_OP = 0    # ("E M"):          (_OP, M)
_BODY = 1  # ("(\\. E) M"):    (_BODY, M)
_ARG = 2   # ("(\\. E'[n]) E"): (_ARG, layers of E', n)


def _plug_layers(layers, t: Term) -> Term:
    for layer in reversed(layers):
        tag = layer[0]
        if tag == _OP:
            t = App(t, layer[1])
        elif tag == _BODY:
            t = App(Lam(t), layer[1])
        else:
            t = App(Lam(_plug_layers(layer[1], Var(layer[2]))), t)
    return t


def eval_need(
    t: Term,
    budget: int = DEFAULT_REDUCTION_BUDGET,
    observe: Callable[[Term], None] | None = None,
) -> Answer | BudgetExceeded:
    """Evaluate a closed term by standard reduction, performing at most ``budget`` reductions.

    The program is kept as a zipper (context layers plus a focus).  After each
    contraction the search continues at the contractum; moving up through the
    layers replays exactly the choices :func:`decompose` makes at each
    application node, so the reduction sequence is that of :func:`step_need`.
    ``observe``, if given, receives the whole program after every reduction.
    """
    zipper: list = []
    focus = t
    steps = 0
    while True:
        while isinstance(focus, App):
            zipper.append((_OP, focus.arg))
            focus = focus.fn
        demand = isinstance(focus, Var)
        if demand:
            dist, binders = focus.index, 0
        i = len(zipper) - 1
        while True:
            if i < 0:
                if demand:
                    raise StuckError(f"free variable at distance {dist} is demanded")
                return Answer(_plug_layers(zipper, focus), steps)
            layer = zipper[i]
            tag = layer[0]
            if demand:
                if tag == _BODY:
                    if dist == 0:
                        zipper[i] = (_ARG, zipper[i + 1:], binders)
                        del zipper[i + 1:]
                        focus = layer[1]
                        break
                    dist -= 1
                    binders += 1
                i -= 1
                continue
            if tag == _BODY:
                i -= 1
                continue
            answer_layers = zipper[i + 1:]
            if tag == _OP and not answer_layers:
                zipper[i] = (_BODY, layer[1])
                del zipper[i + 1:]
                focus = focus.body
                break
            # a redex sits at this layer's application node
            if steps == budget:
                return BudgetExceeded(budget)
            steps += 1
            if tag == _OP:
                m = answer_layers[0][1]
                inner = answer_layers[1:]
                focus = App(Lam(_plug_layers(inner, App(focus, shift(layer[1], len(inner) + 1, 0)))), m)
            elif not answer_layers:
                focus = App(Lam(_plug_layers(layer[1], shift(focus, layer[2] + 1, 0))), focus)
            else:
                m = answer_layers[0][1]
                inner = answer_layers[1:]
                fn = shift(Lam(_plug_layers(layer[1], Var(layer[2]))), len(inner) + 1, 0)
                focus = App(Lam(_plug_layers(inner, App(fn, focus))), m)
            del zipper[i:]
            if observe is not None:
                observe(_plug_layers(zipper, focus))
            break
