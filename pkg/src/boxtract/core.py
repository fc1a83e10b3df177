"""Source calculus: terms, declarations, environments and pure term surgery.

Terms use de Bruijn indices (`Rel`) with display names kept on binders for
printing only. Application is binary; n-ary views are recovered with
`decompose_app`/`mk_app`. Sorts are `Prop` (level -1) or predicative
`Type(level)` with `Type_i : Type_{i+1}`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

PROP_LEVEL = -1


class BoxtractError(Exception):
    """Base class for all pipeline errors."""


@dataclass(frozen=True, order=True)
class Kername:
    """Fully qualified dotted name, e.g. ``Stdlib.List.map``."""

    segments: tuple[str, ...]

    def __post_init__(self):
        if not self.segments or any(not s for s in self.segments):
            raise ValueError(f"malformed kername: {self.segments!r}")

    @staticmethod
    def parse(text: str) -> "Kername":
        return Kername(tuple(text.split(".")))

    @property
    def base(self) -> str:
        return self.segments[-1]

    def __str__(self) -> str:
        return ".".join(self.segments)


@dataclass(frozen=True)
class Term:
    pass


@dataclass(frozen=True)
class Sort(Term):
    level: int  # PROP_LEVEL for Prop, >= 0 for Type_level

    @property
    def is_prop(self) -> bool:
        return self.level == PROP_LEVEL

    def __str__(self) -> str:
        if self.is_prop:
            return "Prop"
        return "Type" if self.level == 0 else f"Type{self.level}"


PROP = Sort(PROP_LEVEL)
TYPE0 = Sort(0)
TYPE1 = Sort(1)


@dataclass(frozen=True)
class Rel(Term):
    index: int


@dataclass(frozen=True)
class Lambda(Term):
    name: str
    ty: Term
    body: Term


@dataclass(frozen=True)
class Prod(Term):
    name: str
    ty: Term
    body: Term


@dataclass(frozen=True)
class LetIn(Term):
    name: str
    value: Term
    value_ty: Term
    body: Term


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Const(Term):
    name: Kername


@dataclass(frozen=True)
class Ind(Term):
    name: Kername


@dataclass(frozen=True)
class Construct(Term):
    ind: Kername
    ctor: int


@dataclass(frozen=True)
class CaseBranch:
    arg_count: int
    body: Term


@dataclass(frozen=True)
class Case(Term):
    ind: Kername
    disc: Term
    ret_ty: Term
    branches: tuple[CaseBranch, ...]


@dataclass(frozen=True)
class FixDef:
    name: str
    ty: Term
    body: Term


@dataclass(frozen=True)
class Fix(Term):
    defs: tuple[FixDef, ...]
    struct_index: int  # position of the structural argument of defs[0]


# ---------------------------------------------------------------------------
# Declarations and environments


@dataclass(frozen=True)
class CtorDecl:
    name: str
    arg_types: tuple[Term, ...]  # scoped over params + earlier args (Rels)
    arg_names: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.arg_names:
            object.__setattr__(self, "arg_names",
                               tuple(f"arg{i}" for i in range(len(self.arg_types))))


@dataclass
class ConstantDecl:
    name: Kername
    ty: Optional[Term]  # filled by the checker when omitted in the surface
    body: Optional[Term]  # None for axioms


@dataclass
class InductiveDecl:
    name: Kername
    params: tuple[tuple[str, Term], ...]
    arity: Term  # the sort (or product into sort) the inductive lands in
    ctors: tuple[CtorDecl, ...]

    @property
    def param_count(self) -> int:
        return len(self.params)


Decl = ConstantDecl | InductiveDecl


class DuplicateName(BoxtractError):
    pass


@dataclass
class GlobalEnv:
    """Ordered list of declarations; later entries reference earlier ones."""

    decls: list[Decl] = field(default_factory=list)

    def __post_init__(self):
        self._index: dict[Kername, Decl] = {}
        for d in self.decls:
            if d.name in self._index:
                raise DuplicateName(str(d.name))
            self._index[d.name] = d

    def add(self, decl: Decl) -> None:
        if decl.name in self._index:
            raise DuplicateName(str(decl.name))
        self.decls.append(decl)
        self._index[decl.name] = decl

    def lookup(self, name: Kername) -> Optional[Decl]:
        return self._index.get(name)

    def constant(self, name: Kername) -> ConstantDecl:
        d = self._index.get(name)
        if not isinstance(d, ConstantDecl):
            raise KeyError(f"no constant {name}")
        return d

    def inductive(self, name: Kername) -> InductiveDecl:
        d = self._index.get(name)
        if not isinstance(d, InductiveDecl):
            raise KeyError(f"no inductive {name}")
        return d

    def __iter__(self) -> Iterator[Decl]:
        return iter(self.decls)


# ---------------------------------------------------------------------------
# Structural utilities


def lift(t: Term, amount: int, cutoff: int = 0) -> Term:
    """Shift free Rel indices >= cutoff up by amount."""
    if amount == 0:
        return t
    match t:
        case Rel(i):
            return Rel(i + amount) if i >= cutoff else t
        case Sort() | Const() | Ind() | Construct():
            return t
        case Lambda(n, ty, body):
            return Lambda(n, lift(ty, amount, cutoff), lift(body, amount, cutoff + 1))
        case Prod(n, ty, body):
            return Prod(n, lift(ty, amount, cutoff), lift(body, amount, cutoff + 1))
        case LetIn(n, v, ty, body):
            return LetIn(n, lift(v, amount, cutoff), lift(ty, amount, cutoff),
                         lift(body, amount, cutoff + 1))
        case App(f, a):
            return App(lift(f, amount, cutoff), lift(a, amount, cutoff))
        case Case(ind, disc, ret, brs):
            return Case(ind, lift(disc, amount, cutoff), lift(ret, amount, cutoff),
                        tuple(CaseBranch(b.arg_count, lift(b.body, amount, cutoff))
                              for b in brs))
        case Fix(defs, si):
            n = len(defs)
            return Fix(tuple(FixDef(d.name, lift(d.ty, amount, cutoff),
                                    lift(d.body, amount, cutoff + n))
                             for d in defs), si)
    raise TypeError(f"lift: {t!r}")


def subst(t: Term, index: int, value: Term) -> Term:
    """Capture-avoiding substitution of value for Rel(index).

    `value` is scoped at t's top level; it is lifted by the number of
    binders crossed. Indices above the substituted one are decremented
    (the binder is consumed).
    """

    def go(t: Term, d: int) -> Term:
        match t:
            case Rel(i):
                if i == index + d:
                    return lift(value, d)
                return Rel(i - 1) if i > index + d else t
            case Sort() | Const() | Ind() | Construct():
                return t
            case Lambda(n, ty, body):
                return Lambda(n, go(ty, d), go(body, d + 1))
            case Prod(n, ty, body):
                return Prod(n, go(ty, d), go(body, d + 1))
            case LetIn(n, v, ty, body):
                return LetIn(n, go(v, d), go(ty, d), go(body, d + 1))
            case App(f, a):
                return App(go(f, d), go(a, d))
            case Case(ind, disc, ret, brs):
                return Case(ind, go(disc, d), go(ret, d),
                            tuple(CaseBranch(b.arg_count, go(b.body, d))
                                  for b in brs))
            case Fix(defs, si):
                k = len(defs)
                return Fix(tuple(FixDef(fd.name, go(fd.ty, d), go(fd.body, d + k))
                                 for fd in defs), si)
        raise TypeError(f"subst: {t!r}")

    return go(t, 0)


def subst_many(t: Term, values: list[Term]) -> Term:
    """Substitute Rel(0..k-1) by values[0..k-1] (values[0] innermost)."""
    for v in values:
        t = subst(t, 0, v)
    return t


def decompose_app(t: Term) -> tuple[Term, list[Term]]:
    args: list[Term] = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


def mk_app(head: Term, args) -> Term:
    for a in args:
        head = App(head, a)
    return head


def decompose_lambdas(t: Term) -> tuple[list[tuple[str, Term]], Term]:
    binders: list[tuple[str, Term]] = []
    while isinstance(t, Lambda):
        binders.append((t.name, t.ty))
        t = t.body
    return binders, t


def decompose_prods(t: Term) -> tuple[list[tuple[str, Term]], Term]:
    binders: list[tuple[str, Term]] = []
    while isinstance(t, Prod):
        binders.append((t.name, t.ty))
        t = t.body
    return binders, t


def rel_occurs(t: Term, index: int) -> bool:
    """Does Rel(index) occur free in t?"""
    match t:
        case Rel(i):
            return i == index
        case Sort() | Const() | Ind() | Construct():
            return False
        case Lambda(_, ty, body) | Prod(_, ty, body):
            return rel_occurs(ty, index) or rel_occurs(body, index + 1)
        case LetIn(_, v, ty, body):
            return (rel_occurs(v, index) or rel_occurs(ty, index)
                    or rel_occurs(body, index + 1))
        case App(f, a):
            return rel_occurs(f, index) or rel_occurs(a, index)
        case Case(_, disc, ret, brs):
            return (rel_occurs(disc, index) or rel_occurs(ret, index)
                    or any(rel_occurs(b.body, index) for b in brs))
        case Fix(defs, _):
            n = len(defs)
            return any(rel_occurs(d.ty, index) or rel_occurs(d.body, index + n)
                       for d in defs)
    raise TypeError(f"rel_occurs: {t!r}")


def max_free_rel(t: Term, depth: int = 0) -> int:
    """Largest free Rel index relative to depth, or -1 when closed."""
    match t:
        case Rel(i):
            return i - depth if i >= depth else -1
        case Sort() | Const() | Ind() | Construct():
            return -1
        case Lambda(_, ty, body) | Prod(_, ty, body):
            return max(max_free_rel(ty, depth), max_free_rel(body, depth + 1))
        case LetIn(_, v, ty, body):
            return max(max_free_rel(v, depth), max_free_rel(ty, depth),
                       max_free_rel(body, depth + 1))
        case App(f, a):
            return max(max_free_rel(f, depth), max_free_rel(a, depth))
        case Case(_, disc, ret, brs):
            return max(max_free_rel(disc, depth), max_free_rel(ret, depth),
                       *(max_free_rel(b.body, depth) for b in brs)) if brs else \
                max(max_free_rel(disc, depth), max_free_rel(ret, depth))
        case Fix(defs, _):
            n = len(defs)
            return max(max(max_free_rel(d.ty, depth), max_free_rel(d.body, depth + n))
                       for d in defs)
    raise TypeError(f"max_free_rel: {t!r}")


def is_closed(t: Term) -> bool:
    return max_free_rel(t) < 0
