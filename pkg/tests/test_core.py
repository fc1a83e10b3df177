"""Structural utilities: lift, subst, decompose_app and their laws.

The lift/subst examples marked as derived use a brute-force oracle: a naive
recursive definition evaluated over an exhaustive enumeration of small
terms (depth <= 3), frozen here as hypothesis-driven properties plus the
enumerated check.
"""

import itertools

from hypothesis import given, settings, strategies as st

from boxtract.core import (App, Case, CaseBranch, Const, Ind, Kername, Lambda,
                           LetIn, PROP, Prod, Rel, Sort, TYPE0, decompose_app,
                           is_closed, lift, mk_app, subst)

NAT = Ind(Kername.parse("T.nat"))
C = Const(Kername.parse("T.c"))


def naive_lift(t, amount, cutoff):
    """Independent oracle: textbook definition, no sharing with lift()."""
    if isinstance(t, Rel):
        return Rel(t.index + amount) if t.index >= cutoff else t
    if isinstance(t, (Sort, Const, Ind)):
        return t
    if isinstance(t, Lambda):
        return Lambda(t.name, naive_lift(t.ty, amount, cutoff),
                      naive_lift(t.body, amount, cutoff + 1))
    if isinstance(t, Prod):
        return Prod(t.name, naive_lift(t.ty, amount, cutoff),
                    naive_lift(t.body, amount, cutoff + 1))
    if isinstance(t, App):
        return App(naive_lift(t.fn, amount, cutoff), naive_lift(t.arg, amount, cutoff))
    raise TypeError(t)


def naive_subst(t, j, v, depth=0):
    if isinstance(t, Rel):
        if t.index == j + depth:
            return naive_lift(v, depth, 0)
        return Rel(t.index - 1) if t.index > j + depth else t
    if isinstance(t, (Sort, Const, Ind)):
        return t
    if isinstance(t, Lambda):
        return Lambda(t.name, naive_subst(t.ty, j, v, depth),
                      naive_subst(t.body, j, v, depth + 1))
    if isinstance(t, Prod):
        return Prod(t.name, naive_subst(t.ty, j, v, depth),
                    naive_subst(t.body, j, v, depth + 1))
    if isinstance(t, App):
        return App(naive_subst(t.fn, j, v, depth), naive_subst(t.arg, j, v, depth))
    raise TypeError(t)


def enumerate_terms(depth):
    if depth == 0:
        yield from (Rel(0), Rel(1), Rel(2), C, NAT)
        return
    subs = list(enumerate_terms(depth - 1))
    for t in subs:
        yield t
    for a, b in itertools.product(subs[:6], subs[:6]):
        yield App(a, b)
        yield Lambda("x", NAT, b)


def test_lift_trivial_examples():
    assert lift(Rel(0), 1, 0) == Rel(1)
    assert lift(Lambda("x", NAT, Rel(0)), 1, 0) == Lambda("x", NAT, Rel(0))


def test_lift_derived_example_against_oracle():
    t = App(Rel(0), Rel(2))
    assert lift(t, 3, 1) == App(Rel(0), Rel(5))
    assert lift(t, 3, 1) == naive_lift(t, 3, 1)


def test_subst_examples():
    assert subst(Rel(0), 0, C) == C
    assert subst(Lambda("x", NAT, Rel(1)), 0, C) == Lambda("x", NAT, C)
    assert subst(Rel(1), 0, C) == Rel(0)


def test_exhaustive_small_terms_match_oracle():
    for t in enumerate_terms(2):
        for amount, cutoff in [(0, 0), (1, 0), (2, 1), (3, 2)]:
            assert lift(t, amount, cutoff) == naive_lift(t, amount, cutoff)
        for j in (0, 1):
            assert subst(t, j, C) == naive_subst(t, j, C)


def test_decompose_app():
    f = Const(Kername.parse("T.f"))
    a, b = Rel(0), Rel(1)
    assert decompose_app(App(App(f, a), b)) == (f, [a, b])
    assert decompose_app(f) == (f, [])
    lam = Lambda("x", NAT, Rel(0))
    assert decompose_app(App(lam, a)) == (lam, [a])


# hypothesis strategies over (open) terms

terms = st.deferred(lambda: st.one_of(
    st.integers(min_value=0, max_value=5).map(Rel),
    st.just(C),
    st.just(NAT),
    st.just(PROP),
    st.just(TYPE0),
    st.tuples(terms, terms).map(lambda p: App(*p)),
    st.tuples(terms, terms).map(lambda p: Lambda("x", p[0], p[1])),
    st.tuples(terms, terms).map(lambda p: Prod("y", p[0], p[1])),
    st.tuples(terms, terms, terms).map(lambda p: LetIn("z", p[0], p[1], p[2])),
))


@settings(max_examples=300)
@given(terms, st.integers(min_value=0, max_value=4))
def test_lift_zero_is_identity(t, c):
    assert lift(t, 0, c) == t


@settings(max_examples=300)
@given(terms, terms, st.integers(min_value=0, max_value=3))
def test_subst_inverts_lift(t, v, i):
    assert subst(lift(t, 1, i), i, v) == t


@settings(max_examples=300)
@given(terms)
def test_decompose_recompose_roundtrip(t):
    head, args = decompose_app(t)
    assert not isinstance(head, App)
    assert mk_app(head, args) == t


def test_is_closed():
    assert is_closed(Lambda("x", NAT, Rel(0)))
    assert not is_closed(Rel(0))
    assert is_closed(Case(Kername.parse("T.nat"), C, NAT,
                          (CaseBranch(0, C), CaseBranch(1, Lambda("p", NAT, Rel(0))))))
