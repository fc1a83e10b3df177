import pytest

from boxtract.core import (App, ConstantDecl, Construct, Ind, InductiveDecl,
                           Kername, Lambda, Prod, Rel, Sort, TYPE0)
from boxtract.surface import (AmbiguousName, SourceFile, SurfaceSyntaxError,
                              UnboundName, parse_text, print_core, print_env)


def test_parse_def_id():
    env = parse_text("def id : forall (A : Type), A -> A := fun (A : Type) (x : A) => x")
    d = env.decls[0]
    assert isinstance(d, ConstantDecl)
    assert d.name == Kername.parse("Top.id")
    assert d.ty == Prod("A", TYPE0, Prod("_", Rel(0), Rel(1)))
    assert d.body == Lambda("A", TYPE0, Lambda("x", Rel(0), Rel(0)))


def test_parse_inductive_nat():
    env = parse_text("inductive nat : Type := O : nat | S : nat -> nat")
    d = env.decls[0]
    assert isinstance(d, InductiveDecl)
    assert d.param_count == 0
    assert [c.name for c in d.ctors] == ["O", "S"]
    assert d.ctors[0].arg_types == ()
    assert d.ctors[1].arg_types == (Ind(Kername.parse("Top.nat")),)


def test_unbound_name_is_an_error():
    with pytest.raises(UnboundName):
        parse_text("def bad := undefined_name")


def test_duplicate_name_is_an_error():
    from boxtract.core import DuplicateName
    with pytest.raises(DuplicateName):
        parse_text("def a : Type := Type\ndef a : Type := Type")


def test_parse_list_with_param():
    env = parse_text("module M\n"
                     "inductive nat : Type := O : nat | S : nat -> nat\n"
                     "inductive list (A : Type) : Type := nil : list A"
                     " | cons : A -> list A -> list A")
    lst = env.decls[1]
    assert lst.param_count == 1
    nil, cons = lst.ctors
    assert nil.arg_types == ()
    # under one param: A is Rel 0 for the first arg; under (param, arg0): Rel 1
    assert cons.arg_types[0] == Rel(0)
    assert cons.arg_types[1] == App(Ind(Kername.parse("M.list")), Rel(1))


def test_match_branch_order_enforced():
    src = ("inductive b : Type := t : b | f : b\n"
           "def x : b := match t return b with | f => f | t => t end")
    with pytest.raises(SurfaceSyntaxError):
        parse_text(src)


def test_empty_match_requires_in_annotation():
    src = ("inductive False : Prop :=\n"
           "axiom h : False\n"
           "def x : False := match h return False with end")
    with pytest.raises(SurfaceSyntaxError):
        parse_text(src)
    ok = ("inductive False : Prop :=\n"
          "axiom h : False\n"
          "def x : False := match h in False return False with end")
    env = parse_text(ok)
    assert env.decls[-1].body is not None


def test_ambiguous_base_name():
    src = ("module M\n"
           "inductive a : Type := mk : a\n"
           "def mk : a := mk\n"
           "def use : a := mk")
    with pytest.raises(AmbiguousName):
        parse_text(src)


def test_sorts_and_arrows():
    env = parse_text("def t : Type1 := Type -> Prop")
    assert env.decls[0].body == Prod("_", Sort(0), Sort(-1))


def test_print_core_examples(fixtures_dir):
    env = parse_text("inductive nat : Type := O : nat | S : nat -> nat\n"
                     "def f : nat -> nat := fun (x : nat) => x")
    d = env.decls[1]
    assert print_core(d.body, env) == "fun (x : nat) => x"
    assert print_core(Sort(-1)) == "Prop"


def test_roundtrip_fixture_corpus(fixtures_dir):
    for path in sorted(fixtures_dir.glob("*.src")):
        env = parse_text(path.read_text(), str(path))
        text = print_env(env)
        env2 = parse_text(text, f"{path}#roundtrip")
        assert len(env.decls) == len(env2.decls), path.name
        for d1, d2 in zip(env.decls, env2.decls):
            assert d1.name == d2.name
            if isinstance(d1, ConstantDecl):
                assert d1.body == d2.body, f"{path.name}:{d1.name}"
                if d1.ty is not None:
                    assert d1.ty == d2.ty
            else:
                assert d1.params == d2.params
                assert d1.ctors == d2.ctors
