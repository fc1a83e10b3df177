"""Typing, reduction, flags, conversion and evaluation over the fixtures."""

import itertools

import pytest

from boxtract.check import (Checker, EMPTY_CTX, OutOfFuel, StuckError,
                            TypeCheckError, VClosure, VConstruct, check_env,
                            ctx_push)
from boxtract.core import (App, Case, CaseBranch, Const, Construct, Ind,
                           Kername, Lambda, LetIn, PROP, Prod, Rel, Sort,
                           TYPE0, mk_app)
from boxtract.surface import parse_text


def load(fixtures_dir, name):
    env = parse_text((fixtures_dir / name).read_text(), name)
    ck = check_env(env)
    return env, ck


def kn(s):
    return Kername.parse(s)


@pytest.fixture(scope="module")
def gen(fixtures_dir):
    return load(fixtures_dir, "gen.src")


@pytest.fixture(scope="module")
def listops(fixtures_dir):
    return load(fixtures_dir, "listops.src")


def numeral(n, mod="Gen"):
    t = Construct(kn(f"{mod}.nat"), 0)
    for _ in range(n):
        t = App(Construct(kn(f"{mod}.nat"), 1), t)
    return t


def value_to_int(v):
    n = 0
    while isinstance(v, VConstruct) and v.ctor == 1:
        n += 1
        v = v.args[0]
    assert isinstance(v, VConstruct) and v.ctor == 0
    return n


# -- infer -------------------------------------------------------------------


def test_infer_lambda_product(gen):
    env, ck = gen
    nat = Ind(kn("Gen.nat"))
    t = Lambda("x", nat, Rel(0))
    assert ck.infer(EMPTY_CTX, t) == Prod("x", nat, nat)


def test_infer_prop_is_type0(gen):
    env, ck = gen
    assert ck.infer(EMPTY_CTX, PROP) == TYPE0


def test_infer_exist_fixture(gen):
    env, ck = gen
    # exist nat posP 1 (is_true_any (ltb O 1)) : sig nat posP
    posP = Const(kn("Gen.posP"))
    one = numeral(1)
    proof = App(Construct(kn("Gen.Is_true"), 0),
                mk_app(Const(kn("Gen.ltb")), [numeral(0), one]))
    t = mk_app(Construct(kn("Gen.sig"), 0), [Ind(kn("Gen.nat")), posP, one, proof])
    got = ck.infer(EMPTY_CTX, t)
    want = mk_app(Ind(kn("Gen.sig")), [Ind(kn("Gen.nat")), posP])
    assert ck.check_convertible(EMPTY_CTX, got, want)


def test_ill_typed_application_rejected(gen):
    env, ck = gen
    with pytest.raises(TypeCheckError):
        ck.infer(EMPTY_CTX, App(Const(kn("Gen.negb")), numeral(0)))


# -- reduce_biz ----------------------------------------------------------------


def test_reduce_beta(gen):
    env, ck = gen
    nat = Ind(kn("Gen.nat"))
    t = App(Lambda("x", nat, Rel(0)), numeral(0))
    assert ck.reduce_biz(EMPTY_CTX, t) == numeral(0)


def test_reduce_zeta(gen):
    env, ck = gen
    nat = Ind(kn("Gen.nat"))
    t = LetIn("x", numeral(0), nat, App(Construct(kn("Gen.nat"), 1), Rel(0)))
    assert ck.reduce_biz(EMPTY_CTX, t) == numeral(1)


def test_reduce_iota_matches_eval(gen):
    env, ck = gen
    nat = Ind(kn("Gen.nat"))
    t = Case(kn("Gen.nat"), numeral(1), nat,
             (CaseBranch(0, numeral(9)), CaseBranch(1, Lambda("p", nat, Rel(0)))))
    # ι-rule by hand: second branch applied to O
    assert ck.reduce_biz(EMPTY_CTX, t) == numeral(0)
    assert value_to_int(ck.eval(t)) == 0


def test_reduce_does_not_unfold_bare_constants(gen):
    env, ck = gen
    t = Const(kn("Gen.pred"))
    assert ck.reduce_biz(EMPTY_CTX, t) == t


# -- flag_of_type ---------------------------------------------------------------


def test_flags_paper_examples(gen):
    env, ck = gen
    f = ck.flag_of_type(EMPTY_CTX, TYPE0)
    assert (f.is_logical, f.conv_to_arity, f.is_sort) == (False, True, True)
    f = ck.flag_of_type(EMPTY_CTX, Prod("_", TYPE0, PROP))
    assert (f.is_logical, f.conv_to_arity, f.is_sort) == (True, True, False)
    f = ck.flag_of_type(EMPTY_CTX, Prod("A", TYPE0, Prod("_", Rel(0), Rel(1))))
    assert (f.is_logical, f.conv_to_arity, f.is_sort) == (False, False, False)


def enumerate_types(depth, gen_mod="Gen"):
    nat = Ind(kn(f"{gen_mod}.nat"))
    if depth == 0:
        return [PROP, TYPE0, nat]
    smaller = enumerate_types(depth - 1, gen_mod)
    out = list(smaller)
    for a, b in itertools.product(smaller, smaller):
        out.append(Prod("_", a, b))
    return out


def test_flag_of_type_matches_bruteforce_oracle(gen):
    env, ck = gen

    def oracle_arity(t):
        t = ck.nf(EMPTY_CTX, t)
        while isinstance(t, Prod):
            t = t.body
        return t if isinstance(t, Sort) else None

    def oracle(t):
        nf = ck.nf(EMPTY_CTX, t)
        concl = oracle_arity(t)
        is_sort = isinstance(nf, Sort)
        arity = concl is not None
        logical = (arity and concl.is_prop) or ck.sort_of(EMPTY_CTX, t).is_prop
        return logical, arity, is_sort

    # depth <= 4: every arrow combination over {Prop, Type, nat}
    types = enumerate_types(2)
    for a, b in itertools.product(enumerate_types(1), enumerate_types(1)):
        types.append(Prod("_", a, b))
    seen = set()
    for t in types:
        if t in seen:
            continue
        seen.add(t)
        f = ck.flag_of_type(EMPTY_CTX, t)
        assert (f.is_logical, f.conv_to_arity, f.is_sort) == oracle(t), t


# -- convertibility -------------------------------------------------------------


def test_eta_expansion_convertible(gen):
    env, ck = gen
    nat = Ind(kn("Gen.nat"))
    add = Const(kn("Gen.add"))
    expanded = Lambda("n", nat, Lambda("m", nat,
                                       mk_app(add, [Rel(1), Rel(0)])))
    assert ck.check_convertible(EMPTY_CTX, expanded, add)


def test_distinct_constructors_not_convertible(gen):
    env, ck = gen
    assert not ck.check_convertible(EMPTY_CTX, Construct(kn("Gen.bool"), 0),
                                    Construct(kn("Gen.bool"), 1))


def test_let_zeta_convertible(gen):
    env, ck = gen
    nat = Ind(kn("Gen.nat"))
    t = LetIn("x", numeral(0), nat, Rel(0))
    assert ck.check_convertible(EMPTY_CTX, t, numeral(0))


def test_convertibility_equivalence_on_normal_form_buckets(gen):
    env, ck = gen
    buckets = [
        [numeral(2), mk_app(Const(kn("Gen.add")), [numeral(1), numeral(1)]),
         mk_app(Const(kn("Gen.pred")), [numeral(3)])],
        [numeral(3), mk_app(Const(kn("Gen.add")), [numeral(0), numeral(3)])],
        [Construct(kn("Gen.bool"), 0),
         mk_app(Const(kn("Gen.even")), [numeral(4)])],
    ]
    for b in buckets:
        for x, y in itertools.product(b, b):
            assert ck.check_convertible(EMPTY_CTX, x, y)  # refl/sym/trans
    for b1, b2 in itertools.combinations(buckets, 2):
        for x, y in itertools.product(b1, b2):
            assert not ck.check_convertible(EMPTY_CTX, x, y)


# -- evaluation -------------------------------------------------------------------


def test_eval_add_2_3(gen):
    env, ck = gen
    v = ck.eval(mk_app(Const(kn("Gen.add")), [numeral(2), numeral(3)]))
    assert value_to_int(v) == 5


def test_eval_lambda_is_closure(gen):
    env, ck = gen
    v = ck.eval(Lambda("x", Ind(kn("Gen.nat")), Rel(0)))
    assert isinstance(v, VClosure)


def test_eval_prop_case_still_evaluates(gen):
    env, ck = gen
    # proofs are ordinary terms before erasure
    t = Case(kn("Gen.True"), Construct(kn("Gen.True"), 0), Ind(kn("Gen.nat")),
             (CaseBranch(0, numeral(7)),))
    assert value_to_int(ck.eval(t)) == 7


def test_eval_deterministic(gen):
    env, ck = gen
    t = mk_app(Const(kn("Gen.mul")), [numeral(3), numeral(4)])
    assert ck.eval(t) == ck.eval(t)
    assert value_to_int(ck.eval(t)) == 12


def test_eval_axiom_is_stuck():
    env = parse_text("inductive nat : Type := O : nat | S : nat -> nat\n"
                     "axiom opaque : nat")
    ck = check_env(env)
    with pytest.raises(StuckError):
        ck.eval(Const(kn("Top.opaque")))


def test_out_of_fuel():
    env = parse_text(
        "inductive nat : Type := O : nat | S : nat -> nat\n"
        "def spin : nat -> nat := fix spin (n : nat) {struct n} : nat :="
        " match n return nat with | O => O | S (p : nat) => spin (S p) end")
    ck = check_env(env)
    loop = Checker(env, fuel=5000)
    with pytest.raises(OutOfFuel):
        loop.eval(mk_app(Const(kn("Top.spin")), [App(Construct(kn("Top.nat"), 1),
                                                     Construct(kn("Top.nat"), 0))]))


# -- subject reduction on the corpus ------------------------------------------


def test_subject_reduction_on_fixture_bodies(fixtures_dir):
    for name in ("gen.src", "listops.src"):
        env = parse_text((fixtures_dir / name).read_text(), name)
        ck = check_env(env)
        from boxtract.core import ConstantDecl
        for d in env.decls:
            if isinstance(d, ConstantDecl) and d.body is not None:
                red = ck.reduce_biz(EMPTY_CTX, d.body)
                ty1 = ck.infer(EMPTY_CTX, d.body)
                ty2 = ck.infer(EMPTY_CTX, red)
                assert ck.check_convertible(EMPTY_CTX, ty1, ty2), d.name
