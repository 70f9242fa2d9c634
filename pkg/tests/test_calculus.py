import pytest
from hypothesis import given, settings

from cbneed.calculus import (
    AHOLE, AT_ANSWER, ABind, AppL, AssocL, AssocR, Answer, BindArg, BindBody, BudgetExceeded,
    Decomposed, Deref, HOLE, IsAnswer, StuckError, contract, decompose, delta, eval_need,
    eval_need_naive, is_answer, plug, redex_term, step_need, to_eval_context,
)
from cbneed.harness import enumerate_closed, gen_corpus
from cbneed.syntax import App, Lam, Var, parse
from oracles import all_decompositions, answer_splits
from strategies import closed_terms

I = Lam(Var(0))
OMEGA = parse("(\\. 0 0) (\\. 0 0)")


class TestContexts:
    def test_delta(self):
        assert delta(HOLE) == 0
        assert delta(BindBody(HOLE, I)) == 1
        assert delta(BindArg(BindBody(HOLE, I), HOLE)) == 0
        assert delta(ABind(ABind(AHOLE, I), I)) == 2

    def test_plug(self):
        assert plug(HOLE, I) == I
        assert plug(AppL(HOLE, I), I) == App(I, I)
        assert plug(BindBody(HOLE, I), Var(0)) == App(I, I)

    def test_plug_arg_context_fills_the_demanded_variable(self):
        body = AppL(HOLE, Var(0))
        assert plug(BindArg(body, HOLE), I) == App(Lam(App(Var(0), Var(0))), I)

    def test_answer_context_embedding(self):
        a = ABind(ABind(AHOLE, I), Var(0))
        assert to_eval_context(a) == BindBody(BindBody(HOLE, I), Var(0))
        assert plug(a, I) == plug(to_eval_context(a), I)


class TestDecompose:
    def test_deref(self):
        assert decompose(App(I, I)) == Decomposed(HOLE, Deref(HOLE, I))

    def test_value(self):
        assert decompose(I) == IsAnswer(AHOLE, I)

    def test_assoc_l(self):
        t = App(App(Lam(I), I), I)
        assert decompose(t) == Decomposed(HOLE, AssocL(AHOLE, I, I, I))

    def test_assoc_r(self):
        t = App(I, App(Lam(I), I))
        assert decompose(t) == Decomposed(HOLE, AssocR(HOLE, AHOLE, I, I))

    def test_open_program_is_stuck(self):
        with pytest.raises(StuckError):
            decompose(App(Var(0), I))

    @settings(max_examples=300)
    @given(closed_terms())
    def test_plug_inverts_decompose(self, t):
        d = decompose(t)
        if isinstance(d, IsAnswer):
            assert plug(d.a, d.v) == t
        else:
            assert plug(d.e, redex_term(d.r)) == t

    def test_unique_against_brute_force(self):
        self.check_unique(10)

    @staticmethod
    def check_unique(max_size):
        redexes = 0
        for t in enumerate_closed(max_size):
            splits = all_decompositions(t)
            d = decompose(t)
            if isinstance(d, IsAnswer):
                assert splits == [] and list(answer_splits(t)) == [(d.a, d.v)]
            else:
                assert splits == [(d.e, d.r)]
                redexes += 1
        assert redexes > 0

    def test_is_answer(self):
        assert is_answer(App(Lam(I), OMEGA))
        assert not is_answer(App(I, I))


class TestContract:
    def test_deref(self):
        assert contract(Deref(HOLE, I)) == App(Lam(I), I)

    def test_assoc_l(self):
        assert contract(AssocL(AHOLE, I, I, I)) == App(Lam(App(I, I)), I)

    def test_assoc_r(self):
        assert contract(AssocR(HOLE, AHOLE, I, I)) == App(Lam(App(I, I)), I)

    def test_deref_shifts_value_past_the_body_binders(self):
        # (\. (\. 1) 0) (\. \. 2)  with the value's free-looking index crossing one binder
        body = BindBody(HOLE, Var(0))
        v = Lam(Lam(Var(1)))
        assert contract(Deref(body, v)) == App(Lam(App(Lam(v), Var(0))), v)


class TestStep:
    def test_examples(self):
        assert step_need(App(I, I)) == App(Lam(I), I)
        assert step_need(App(Lam(I), I)) is AT_ANSWER
        assert step_need(App(App(I, I), I)) == App(App(Lam(I), I), I)

    @settings(max_examples=200)
    @given(closed_terms())
    def test_answers_are_irreducible(self, t):
        assert (step_need(t) is AT_ANSWER) == isinstance(decompose(t), IsAnswer)


class TestEvaluate:
    def test_examples(self):
        assert eval_need(App(I, I), 100) == Answer(App(Lam(I), I), 1)
        assert eval_need(I, 0) == Answer(I, 0)
        assert eval_need(OMEGA, 1000) == BudgetExceeded(1000)

    def test_budget_counts_reductions(self):
        assert eval_need(App(I, I), 0) == BudgetExceeded(0)
        assert eval_need(App(I, I), 1) == Answer(App(Lam(I), I), 1)

    def test_observe_sees_every_program(self):
        seen = []
        eval_need(App(App(I, I), I), observe=seen.append)
        t, expected = App(App(I, I), I), []
        while (t := step_need(t)) is not AT_ANSWER:
            expected.append(t)
        assert seen == expected

    def test_refocusing_matches_naive_iteration(self):
        for t in list(enumerate_closed(7)) + [e.term for e in gen_corpus(7, 12, 1500)]:
            assert eval_need(t, 300) == eval_need_naive(t, 300)

    def test_open_program_is_stuck(self):
        with pytest.raises(StuckError):
            eval_need(App(Var(0), I))

    def test_long_divergent_run_is_cheap(self):
        assert eval_need(OMEGA) == BudgetExceeded(10_000)
