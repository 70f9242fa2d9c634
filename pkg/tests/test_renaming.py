import pytest
from hypothesis import given, settings, strategies as st

from cbneed.renaming import EMPTY, MalformedStateError, RenamingEnv, add_all, adjust, apply, lookup
from cbneed.syntax import App, Lam, Var, free_indices, shift
from oracles import apply_env_naive
from strategies import envs, offsets, terms


def env_for(t, extra=0):
    """Offsets long enough to cover every free variable of t."""
    return st.lists(st.integers(0, 6), min_size=max(free_indices(t), default=-1) + 1 + extra,
                    max_size=max(free_indices(t), default=-1) + 1 + extra + 3)


class TestLookup:
    def test_examples(self):
        assert lookup(RenamingEnv([2]), 0) == 2
        assert lookup(RenamingEnv([0, 5]), 1) == 5

    def test_missing_slot(self):
        with pytest.raises(MalformedStateError):
            lookup(EMPTY, 0)


class TestApply:
    def test_examples(self):
        t = App(Var(3), Lam(Var(0)))
        assert apply(EMPTY, t) is t
        assert apply(RenamingEnv([2]), Var(0)) == Var(2)
        assert apply(RenamingEnv([3]), Lam(Var(1))) == Lam(Var(4))

    def test_missing_slot(self):
        with pytest.raises(MalformedStateError):
            apply(RenamingEnv([1]), Var(1))

    @given(st.data())
    def test_matches_naive_renaming(self, data):
        t = data.draw(terms())
        offs = data.draw(env_for(t))
        assert apply(RenamingEnv(offs), t) == apply_env_naive(offs, t)


class TestAddAll:
    def test_examples(self):
        assert add_all(EMPTY, 5) == EMPTY
        assert add_all(RenamingEnv([1, 2]), 3) == RenamingEnv([4, 5])
        assert add_all(RenamingEnv([0]), 0) == RenamingEnv([0])

    @given(envs, st.integers(0, 9), st.integers(0, 9))
    def test_monoid_action(self, r, a, b):
        assert add_all(add_all(r, a), b) == add_all(r, a + b)
        assert len(add_all(r, a)) == len(r)

    @given(envs, st.integers(0, 9), st.integers(0, 9))
    def test_cons_after_add_all(self, r, a, o):
        assert list(r.add_all(a).cons(o)) == [o] + [x + a for x in r]

    @settings(max_examples=300)
    @given(st.data())
    def test_corollary_at_zero(self, data):
        t = data.draw(terms())
        r = RenamingEnv(data.draw(env_for(t)))
        x = data.draw(st.integers(0, 9))
        assert apply(add_all(r, x), t) == shift(apply(r, t), x, 0)


class TestAdjust:
    def test_examples(self):
        assert adjust(Var(0), RenamingEnv([0]), -1, 1) == RenamingEnv([0])
        assert adjust(Var(0), RenamingEnv([3]), -1, 1) == RenamingEnv([2])
        r = RenamingEnv([4, 1])
        assert adjust(Var(0), r, 0, 0) is r

    def test_offsets_may_go_below_zero_while_effective_index_stays_valid(self):
        # index 1 reaches past a deleted frame on its own
        assert list(RenamingEnv([0, 0]).adjust(-1, 0)) == [0, -1]

    def test_negative_effective_index_is_an_error(self):
        with pytest.raises(MalformedStateError):
            RenamingEnv([1]).adjust(-2, -1)

    @given(envs, st.integers(-1, 3))
    def test_identity_past_reach(self, r, x):
        assert r.adjust(x, max(r.reach(), 0)) == r

    @given(offsets, st.integers(0, 8))
    def test_slot_wise(self, offs, threshold):
        got = list(RenamingEnv(offs).adjust(-1, threshold))
        assert got == [o - 1 if j + o > threshold else o for j, o in enumerate(offs)]


class TestEnvironment:
    def test_str_and_equality(self):
        r = RenamingEnv([0, 5])
        assert str(r) == "(0, 5)"
        assert r == RenamingEnv([0, 5]) and hash(r) == hash(RenamingEnv([0, 5]))
        assert r != RenamingEnv([0])

    def test_rejects_negative_effective_index(self):
        with pytest.raises(ValueError):
            RenamingEnv([-1])

    def test_persistent_cons(self):
        base = RenamingEnv([1])
        a, b = base.cons(0), base.cons(7)
        assert list(a) == [0, 1] and list(b) == [7, 1] and list(base) == [1]


@st.composite
def commutation_instances(draw):
    """``(M, R1, R2, x)`` where ``R1`` renames indices below ``len(R1)`` to indices below it."""
    t = draw(terms())
    need = max(free_indices(t), default=-1) + 1
    m = draw(st.integers(0, need + 2))
    r1 = [draw(st.integers(0, m - 1 - i)) for i in range(m)]
    short = max(need - m, 0)
    r2 = draw(st.lists(st.integers(0, 6), min_size=short, max_size=short + 2))
    return t, r1, r2, draw(st.integers(0, 9))


def commutes(t, r1, r2, x) -> bool:
    whole = RenamingEnv(r1 + r2)
    split = RenamingEnv(r1 + [o + x for o in r2])
    return shift(apply(whole, t), x, len(r1)) == apply(split, t)


class TestCommutation:
    @settings(max_examples=500)
    @given(commutation_instances())
    def test_shift_after_rename(self, instance):
        assert commutes(*instance)

    def test_zero_prefix(self):
        t = Lam(App(Var(0), App(Var(1), Var(3))))
        for x in range(4):
            assert commutes(t, [0, 0], [2, 5], x)

    def test_prefix_pushing_past_the_split_breaks_it(self):
        # R1 sends index 0 to 1, which is no longer below the split point
        assert not commutes(Var(0), [1], [], 1)
