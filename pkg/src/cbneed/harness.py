"""
Verification harness: term corpora, differential testing of the two
evaluators, simulation and laziness checks, trace replay, mutants and the
lookup-cost benchmark.
"""

from __future__ import annotations

import gc
import json
import random
import statistics
import time
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Iterable, Iterator, Optional

from . import ckplus
from ._pseq import PSeq
from .calculus import AT_ANSWER, Answer, BudgetExceeded, DEFAULT_REDUCTION_BUDGET, eval_need, step_need
from .ckplus import (
    MT, REDUCTION_RULES, Arg, Bind, ContinuationStack, Eval, MachineState, Mt, Op, Search,
    StepRecord, inject, is_final, run, step, unload,
)
from .renaming import EMPTY, RenamingEnv
from .syntax import App, Lam, Term, Var, parse, pretty, size

__all__ = [
    "CorpusEntry", "Corpus", "closed_terms", "enumerate_closed", "random_closed_term",
    "regression_terms", "gen_corpus", "exhaustive_corpus", "church", "chain",
    "Outcome", "DiffReport", "diff_term", "diff_corpus",
    "SimulationViolation", "check_simulation", "LazinessViolation", "check_laziness",
    "ReplayResult", "trace_lines", "replay_trace",
    "MUTANTS", "mutant_step",
    "BenchRow", "bench_lookup",
]


# ---------------------------------------------------------------------------
# corpora

@dataclass(frozen=True)
class CorpusEntry:
    name: str
    term: Term


@dataclass(frozen=True)
class Corpus:
    entries: tuple[CorpusEntry, ...]
    seed: int | None = None
    max_size: int | None = None
    count: int | None = None

    def __len__(self) -> int:
        return len(self.entries)

    def __iter__(self) -> Iterator[CorpusEntry]:
        return iter(self.entries)


@lru_cache(maxsize=None)
def _closed(n: int, scope: int) -> tuple[Term, ...]:
    # all terms of exactly n nodes whose free indices are below scope
    if n == 1:
        return tuple(Var(i) for i in range(scope))
    out = [Lam(b) for b in _closed(n - 1, scope + 1)]
    for k in range(1, n - 1):
        for f in _closed(k, scope):
            out.extend(App(f, a) for a in _closed(n - 1 - k, scope))
    return tuple(out)


def closed_terms(n: int) -> tuple[Term, ...]:
    """Every closed term with exactly ``n`` nodes."""
    return _closed(n, 0) if n >= 1 else ()


def enumerate_closed(max_size: int) -> Iterator[Term]:
    """Every closed term of at most ``max_size`` nodes, smallest first."""
    for n in range(1, max_size + 1):
        yield from closed_terms(n)


def _min_size(scope: int) -> int:
    return 1 if scope else 2


def _random_term(rng: random.Random, n: int, scope: int) -> Term:
    if n == 1:
        return Var(rng.randrange(scope))
    can_app = n - 1 >= 2 * _min_size(scope)
    if n == 2 or not can_app or rng.random() < 0.3:
        if scope and rng.random() < 0.1 and n == 2:
            return Var(rng.randrange(scope))
        return Lam(_random_term(rng, n - 1, scope + 1))
    lo = _min_size(scope)
    k = rng.randint(lo, n - 1 - lo)
    # favour abstractions in operator position so that bindings get established
    if k >= 2 and rng.random() < 0.6:
        fn: Term = Lam(_random_term(rng, k - 1, scope + 1))
    else:
        fn = _random_term(rng, k, scope)
    return App(fn, _random_term(rng, n - 1 - k, scope))


def random_closed_term(rng: random.Random, max_size: int) -> Term:
    """A random closed term of at most ``max_size`` nodes (at least ``\\. 0``)."""
    n = rng.randint(2, max_size) if max_size > 2 else 2
    return _random_term(rng, n, 0)


def church(n: int) -> Term:
    """The Church numeral ``\\f. \\x. f (f .. x)``."""
    body: Term = Var(0)
    for _ in range(n):
        body = App(Var(1), body)
    return Lam(Lam(body))


CHURCH_PLUS = parse("\\m. \\n. \\f. \\x. m f (n f x)", "named")


def chain(k: int) -> Term:
    """``L_k``: ``k`` nested bindings of ``\\. 0``, each unused once its body is reached, applied to ``\\. 0``."""
    ident = Lam(Var(0))
    t: Term = ident
    for _ in range(k):
        t = App(Lam(t), ident)
    return App(t, ident)


def regression_terms() -> tuple[CorpusEntry, ...]:
    from .syntax import to_debruijn

    plus = to_debruijn(CHURCH_PLUS)
    fixed = [
        ("identity-applied", "(\\. 0) (\\. 0)"),
        ("value", "\\. 0"),
        ("deref-example", "(\\. 0) (\\. 0)"),
        ("assoc-l-example", "((\\. \\. 0) (\\. 0)) (\\. 0)"),
        ("assoc-r-example", "(\\. 0) ((\\. \\. 0) (\\. 0))"),
        ("operator-redex", "((\\. 0) (\\. 0)) (\\. 0)"),
        ("assoc-r-nested-offsets", "(\\. (\\. 1 0) (\\. \\. 1)) ((\\. \\. 0) (\\. \\. \\. 2))"),
        ("compaction-reaches-past", "(\\. (\\. 1) 0) (\\. 0)"),
        ("compaction-keeps-inner", "(\\. 0 0 0) (\\. 0)"),
        ("omega", "(\\. 0 0) (\\. 0 0)"),
        ("k-combinator", "(\\. \\. 1) (\\. 0) ((\\. 0 0) (\\. 0 0))"),
    ]
    out = [CorpusEntry(name, parse(src)) for name, src in fixed]
    out += [CorpusEntry(f"chain-{k}", chain(k)) for k in (1, 10, 100)]
    out.append(CorpusEntry("church-2+2", App(App(plus, church(2)), church(2))))
    out.append(CorpusEntry("church-2+2-applied", App(App(App(App(plus, church(2)), church(2)), Lam(Var(0))), Lam(Var(0)))))
    return tuple(out)


def gen_corpus(seed: int = 42, max_size: int = 12, count: int = 10_000, regressions: bool = True) -> Corpus:
    """A deterministic corpus of ``count`` closed terms.

    With ``regressions`` the fixed regression terms come first (they do not
    obey ``max_size``); the rest are random terms of at most ``max_size``
    nodes drawn from ``random.Random(seed)``.
    """
    entries: list[CorpusEntry] = list(regression_terms())[:count] if regressions else []
    rng = random.Random(seed)
    i = 0
    while len(entries) < count:
        entries.append(CorpusEntry(f"random-{seed}-{i}", random_closed_term(rng, max_size)))
        i += 1
    return Corpus(tuple(entries), seed, max_size, count)


def exhaustive_corpus(max_size: int = 7) -> Corpus:
    terms = enumerate_closed(max_size)
    return Corpus(tuple(CorpusEntry(f"closed-{i}", t) for i, t in enumerate(terms)), None, max_size, None)


# ---------------------------------------------------------------------------
# simulation and laziness

@dataclass(frozen=True)
class SimulationViolation:
    step: int
    rule: str
    before: Term
    after: Term
    reason: str


def simulation_check(rec: StepRecord) -> Optional[str]:
    """``None`` when ``rec`` simulates the calculus, else a reason.

    Reductions must take exactly one standard-reduction step of the unloaded
    program; every other rule must leave it unchanged.
    """
    before, after = unload(rec.before), unload(rec.after)
    if rec.rule in REDUCTION_RULES:
        nxt = step_need(before)
        if nxt is AT_ANSWER or nxt != after:
            return "reduction rule did not take the standard reduction step"
        return None
    if before != after:
        return "administrative rule changed the program"
    return None


def check_simulation(t: Term, budget: int | None = ckplus.DEFAULT_STEP_BUDGET, step_fn=step) -> list[SimulationViolation]:
    out = []
    for i, rec in enumerate(run(inject(t), budget, step_fn=step_fn)):
        reason = simulation_check(rec)
        if reason is not None:
            out.append(SimulationViolation(i + 1, rec.rule, unload(rec.before), unload(rec.after), reason))
    return out


@dataclass(frozen=True)
class LazinessViolation:
    label: int
    evaluations: int


def check_laziness(t: Term, budget: int | None = ckplus.DEFAULT_STEP_BUDGET) -> list[LazinessViolation]:
    """Bindings whose argument was evaluated more than once.

    A ``lookup-arg`` that finds a non-value starts evaluating that binding's
    argument; the binding is identified by the label its frame keeps through
    ``resume`` and ``assoc-R``.
    """
    forced: dict[int, int] = {}
    for rec in run(inject(t), budget):
        if rec.rule == "lookup-arg" and not isinstance(rec.after.control, Lam):
            label = rec.after.stack.top.label
            forced[label] = forced.get(label, 0) + 1
    return [LazinessViolation(lbl, n) for lbl, n in sorted(forced.items()) if n > 1]


# ---------------------------------------------------------------------------
# differential testing

@dataclass(frozen=True)
class Outcome:
    """One corpus entry's verdict: ``"answer"``, ``"budget"`` or ``"mismatch"``."""
    index: int
    name: str
    term: Term
    kind: str
    need: Answer | BudgetExceeded | None
    ckplus: Answer | BudgetExceeded | None
    detail: str = ""
    simulation: tuple[SimulationViolation, ...] = ()

    @property
    def ok(self) -> bool:
        return self.kind != "mismatch"

    def to_json(self) -> str:
        def res(r):
            if isinstance(r, Answer):
                return {"answer": pretty(r.term), "steps": r.steps}
            if isinstance(r, BudgetExceeded):
                return {"budget_exceeded": r.steps}
            return None

        obj = {
            "index": self.index, "name": self.name, "term": pretty(self.term),
            "outcome": self.kind, "need": res(self.need), "ckplus": res(self.ckplus),
        }
        if self.detail:
            obj["detail"] = self.detail
        if self.simulation:
            obj["simulation_violations"] = [
                {"step": v.step, "rule": v.rule, "reason": v.reason} for v in self.simulation
            ]
        return json.dumps(obj, ensure_ascii=False)


@dataclass(frozen=True)
class DiffReport:
    outcomes: tuple[Outcome, ...]

    @property
    def mismatches(self) -> tuple[Outcome, ...]:
        return tuple(o for o in self.outcomes if not o.ok)

    def count(self, kind: str) -> int:
        return sum(o.kind == kind for o in self.outcomes)

    def summary(self) -> str:
        return (
            f"{len(self.outcomes)} terms: {self.count('answer')} agree (answer), "
            f"{self.count('budget')} agree (budget exceeded), {self.count('mismatch')} MISMATCH"
        )


def _step_cap(budget: int) -> int:
    # administrative transitions between reductions are finite but not
    # constant; the cap only stops a broken machine that never reduces
    return 100 * (budget + 1) + ckplus.DEFAULT_STEP_BUDGET


def first_divergence(t: Term, budget: int, step_fn=step) -> str:
    """Describe the first reduction after which the two evaluators' programs differ."""
    need_seq: list[Term] = []
    eval_need(t, budget, observe=need_seq.append)
    i = 0
    try:
        for rec in run(inject(t), _step_cap(budget), max_reductions=budget, step_fn=step_fn):
            if rec.rule not in REDUCTION_RULES:
                continue
            got = unload(rec.after)
            if i >= len(need_seq):
                return f"need stops after {len(need_seq)} reductions, ckplus continues with {pretty(got)}"
            if got != need_seq[i]:
                return f"reduction {i + 1}: need gives {pretty(need_seq[i])}, ckplus gives {pretty(got)}"
            i += 1
    except Exception as exc:  # a broken machine may crash mid-run
        return f"ckplus raised {type(exc).__name__} after {i} matching reductions: {exc}"
    if i != len(need_seq):
        return f"need performs {len(need_seq)} reductions, ckplus {i}"
    return "same reduction sequence, different final result"


def diff_term(
    t: Term,
    budget: int = DEFAULT_REDUCTION_BUDGET,
    *,
    index: int = 0,
    name: str = "",
    check_simulation_steps: bool = False,
    step_fn=step,
) -> Outcome:
    """Run both evaluators on ``t`` with the same reduction budget and compare.

    The machine is limited by reductions (resume, assoc-L, assoc-R) rather
    than transitions, so that both sides give up at exactly the same point.
    """
    need = eval_need(t, budget)
    violations: list[SimulationViolation] = []
    try:
        s: MachineState = inject(t)
        steps = 0
        for rec in run(s, _step_cap(budget), max_reductions=budget, step_fn=step_fn):
            steps += 1
            if check_simulation_steps and isinstance(need, Answer):
                reason = simulation_check(rec)
                if reason is not None:
                    violations.append(SimulationViolation(steps, rec.rule, unload(rec.before), unload(rec.after), reason))
            s = rec.after
        machine = Answer(unload(s), steps) if is_final(s) else BudgetExceeded(steps)
    except Exception as exc:
        return Outcome(index, name, t, "mismatch", need, None, f"ckplus raised {type(exc).__name__}: {exc}")
    if isinstance(need, Answer) and isinstance(machine, Answer) and need.term == machine.term:
        kind, detail = "answer", ""
    elif isinstance(need, BudgetExceeded) and isinstance(machine, BudgetExceeded):
        kind, detail = "budget", ""
    else:
        kind, detail = "mismatch", first_divergence(t, budget, step_fn)
    if violations:
        kind = "mismatch"
        detail = (detail + "; " if detail else "") + f"{len(violations)} simulation violation(s)"
    return Outcome(index, name, t, kind, need, machine, detail, tuple(violations))


def diff_corpus(
    corpus: Iterable[CorpusEntry],
    budget: int = DEFAULT_REDUCTION_BUDGET,
    *,
    check_simulation_steps: bool = False,
    step_fn=step,
) -> DiffReport:
    outcomes = tuple(
        diff_term(e.term, budget, index=i, name=e.name, check_simulation_steps=check_simulation_steps, step_fn=step_fn)
        for i, e in enumerate(corpus)
    )
    return DiffReport(outcomes)


# ---------------------------------------------------------------------------
# trace replay

def _state_fields(s: MachineState) -> dict:
    if isinstance(s, Eval):
        control, env = s.control, s.env
    else:
        control, env = s.value, s.env
    return {"control": pretty(control), "env": list(env), "stack_depth": ckplus.stack_metrics(s).depth}


def trace_lines(
    t: Term,
    budget: int | None = ckplus.DEFAULT_STEP_BUDGET,
    *,
    phi: bool = False,
    compactor=None,
) -> Iterator[str]:
    """The JSON-lines trace of a run.

    A schema header comes first, then an ``inject`` record for the initial
    state, one record per transition, and a closing ``final`` or ``budget``
    record.  With ``phi`` every record carries the unloaded program and, for
    transitions, the simulation verdict (``ok`` or a reason).
    """
    s: MachineState = inject(t)
    yield ckplus.trace_header(t)
    first = {"step": 0, "rule": "inject", **_state_fields(s)}
    if phi:
        first["phi"] = pretty(unload(s))
    yield json.dumps(first, ensure_ascii=False)
    i = 0
    for rec in run(s, budget, compactor=compactor):
        if rec.rule != "sc":
            i += 1
        check = None
        if phi:
            check = "ok" if rec.rule == "sc" else (simulation_check(rec) or "ok")
        yield ckplus.record_to_json(i, rec, phi=phi, check=check)
        s = rec.after
    if is_final(s):
        yield json.dumps({"step": i, "rule": "final", "answer": pretty(unload(s))}, ensure_ascii=False)
    else:
        yield json.dumps({"step": i, "rule": "budget"}, ensure_ascii=False)


@dataclass(frozen=True)
class ReplayResult:
    ok: bool
    checked: int
    message: str = ""


def replay_trace(lines: Iterable[str]) -> ReplayResult:
    """Re-run the program named in a trace header and compare every record.

    Each transition record must name the rule the machine applies at that
    point and report the state it reaches.  ``sc`` records are not supported.
    """
    it = iter(lines)
    try:
        header = json.loads(next(it))
    except StopIteration:
        return ReplayResult(False, 0, "empty trace")
    if header.get("schema") != ckplus.TRACE_SCHEMA:
        return ReplayResult(False, 0, f"unknown schema {header.get('schema')!r}")
    s: MachineState = inject(parse(header["program"]))
    checked = 0
    for line in it:
        rec = json.loads(line)
        rule = rec["rule"]
        if rule == "inject":
            want = _state_fields(s)
            got = {k: rec[k] for k in want}
            if got != want:
                return ReplayResult(False, checked, "initial state differs")
            continue
        if rule == "final":
            if not is_final(s) or pretty(unload(s)) != rec["answer"]:
                return ReplayResult(False, checked, "trace claims a final answer the machine does not reach")
            return ReplayResult(True, checked)
        if rule == "budget":
            if is_final(s):
                return ReplayResult(False, checked, "trace stops at a final state but reports the budget")
            return ReplayResult(True, checked)
        if rule == "sc":
            return ReplayResult(False, checked, "replay of compaction records is not supported")
        nxt = step(s)
        if nxt is None:
            return ReplayResult(False, checked, f"step {rec['step']}: machine is final but trace applies {rule}")
        if nxt.rule != rule:
            return ReplayResult(False, checked, f"step {rec['step']}: trace applies {rule}, machine applies {nxt.rule}")
        want = _state_fields(nxt.after)
        got = {k: rec.get(k) for k in want}
        if got != want:
            return ReplayResult(False, checked, f"step {rec['step']}: state after {rule} differs")
        s = nxt.after
        checked += 1
    return ReplayResult(False, checked, "trace ends without a final or budget record")


# ---------------------------------------------------------------------------
# mutants (harness self-tests)

def _bump_everything(s: ContinuationStack, x: int) -> ContinuationStack:
    # add x to every offset of every environment, nested stacks included
    def partial(k):
        if isinstance(k, Mt):
            return k
        if isinstance(k, Arg):
            return Arg(k.term, k.env.add_all(x), partial(k.rest))
        return Op(_bump_everything(k.saved, x), partial(k.rest), k.label)

    below = PSeq(Bind(f.term, f.env.add_all(x), partial(f.inner), f.label) for f in s.below)
    return ContinuationStack(partial(s.top), below)


def _swap_assoc_l(s: MachineState) -> Optional[StepRecord]:
    rec = step(s)
    if rec is None or rec.rule != "assoc-L":
        return rec
    rem, answers = s.remaining, s.answers
    frame = rem[-1]
    inner = frame.inner
    # the binding's argument and the pending operand trade places
    outer = Bind(inner.term, inner.env, inner.rest, frame.label)
    arg = Bind(frame.term, frame.env.add_all(len(answers) + 1), MT, frame.label)
    below = rem[:-1].append(outer).extend(reversed(answers)).append(arg)
    return StepRecord("assoc-L", s, Eval(s.value.body, s.env.cons(0), ContinuationStack(MT, below)))


def _literal_assoc_r_bump(s: MachineState) -> Optional[StepRecord]:
    rec = step(s)
    if rec is None or rec.rule != "assoc-R":
        return rec
    rem, answers = s.remaining, s.answers
    frame = rem[-1]
    inner = frame.inner
    saved = _bump_everything(inner.saved, len(answers) + 1)
    outer = Bind(frame.term, frame.env, inner.rest, frame.label)
    below = rem[:-1].append(outer).extend(reversed(answers))
    return StepRecord("assoc-R", s, Eval(s.value, s.env, ContinuationStack(Op(saved, MT, inner.label), below)))


MUTANTS: dict[str, Callable[[MachineState], Optional[StepRecord]]] = {
    "swap-assoc-l": _swap_assoc_l,
    "uniform-assoc-r-bump": _literal_assoc_r_bump,
}


def mutant_step(name: str | None):
    if name is None:
        return step
    try:
        return MUTANTS[name]
    except KeyError:
        raise ValueError(f"unknown mutant {name!r}; choose from {', '.join(MUTANTS)}") from None


# ---------------------------------------------------------------------------
# lookup benchmark

@dataclass(frozen=True)
class BenchRow:
    depth: int
    ns_per_lookup: float
    reps: int


def _deep_lookup_state(depth: int) -> Eval:
    # depth bind frames of \. 0; the control demands the bottom one
    ident = Lam(Var(0))
    below = PSeq(Bind(ident, EMPTY, MT) for _ in range(depth))
    env = RenamingEnv([0] * depth)
    return Eval(Var(depth - 1), env, ContinuationStack(MT, below))


def _timed(fn: Callable[[], object], reps: int) -> float:
    clock = time.perf_counter_ns
    samples = []
    was_enabled = gc.isenabled()
    gc.disable()
    try:
        for _ in range(reps):
            t0 = clock()
            fn()
            samples.append(clock() - t0)
    finally:
        if was_enabled:
            gc.enable()
    return float(statistics.median(samples))


def bench_lookup(depths: Iterable[int] = (10, 10_000), reps: int = 100_000, linear_scan: bool = False) -> list[BenchRow]:
    """Median cost of locating and splitting off the demanded frame at each bind depth.

    The indexed variant times the machine's own ``lookup-arg`` transition on a
    state whose variable names the deepest frame.  The linear-scan baseline
    keeps the frames' binder names in a list, innermost first, and searches it
    for the variable's name, as a machine without static addresses must.
    """
    rows = []
    for d in depths:
        if d < 1:
            raise ValueError("bind depth must be at least 1")
        if linear_scan:
            names = [f"x{i}" for i in range(d)]
            names.reverse()
            frames = [Bind(Lam(Var(0)), EMPTY, MT) for _ in range(d)]
            target = names[-1]

            def lookup(names=names, frames=frames, target=target):
                return frames[names.index(target)]
        else:
            s = _deep_lookup_state(d)

            def lookup(s=s):
                return step(s)
        lookup()  # warm up
        rows.append(BenchRow(d, _timed(lookup, reps), reps))
    return rows
