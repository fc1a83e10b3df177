"""The erased λ□ IR: terms, erased types, environments, and CBV evaluation.

BoxTerm is the untyped calculus with a distinguished `BBox` node (erased
content) and `BEmptyMatch` (match on an empty inductive). BoxType is the
prenex erased type grammar. ErasedEnv is the typed intermediate
representation backends print from.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

from .core import BoxtractError, Kername


# ---------------------------------------------------------------------------
# Erased types


@dataclass(frozen=True)
class BoxType:
    pass


@dataclass(frozen=True)
class TVar(BoxType):
    level: int


@dataclass(frozen=True)
class TInd(BoxType):
    name: Kername


@dataclass(frozen=True)
class TConst(BoxType):
    name: Kername


@dataclass(frozen=True)
class TApp(BoxType):
    head: BoxType
    arg: BoxType


@dataclass(frozen=True)
class TArr(BoxType):
    dom: BoxType
    cod: BoxType


@dataclass(frozen=True)
class _TBox(BoxType):
    def __repr__(self):
        return "TBox"


@dataclass(frozen=True)
class _TAny(BoxType):
    def __repr__(self):
        return "TAny"


TBox = _TBox()
TAny = _TAny()


def can_have_args(t: BoxType) -> bool:
    """Only inductive and constant names may head a type application."""
    return isinstance(t, (TInd, TConst))


def decompose_tapp(t: BoxType) -> tuple[BoxType, list[BoxType]]:
    args: list[BoxType] = []
    while isinstance(t, TApp):
        args.append(t.arg)
        t = t.head
    args.reverse()
    return t, args


def mk_tapp(head: BoxType, args) -> BoxType:
    for a in args:
        head = TApp(head, a)
    return head


def decompose_tarr(t: BoxType) -> tuple[list[BoxType], BoxType]:
    doms: list[BoxType] = []
    while isinstance(t, TArr):
        doms.append(t.dom)
        t = t.cod
    return doms, t


def mk_tarr(doms, cod: BoxType) -> BoxType:
    for d in reversed(doms):
        cod = TArr(d, cod)
    return cod


def tvar_levels(t: BoxType) -> set[int]:
    match t:
        case TVar(l):
            return {l}
        case TApp(h, a):
            return tvar_levels(h) | tvar_levels(a)
        case TArr(d, c):
            return tvar_levels(d) | tvar_levels(c)
        case _:
            return set()


def map_tvars(t: BoxType, f) -> BoxType:
    match t:
        case TVar(l):
            return f(l)
        case TApp(h, a):
            return TApp(map_tvars(h, f), map_tvars(a, f))
        case TArr(d, c):
            return TArr(map_tvars(d, f), map_tvars(c, f))
        case _:
            return t


# ---------------------------------------------------------------------------
# λ□ terms


@dataclass(frozen=True)
class BoxTerm:
    pass


@dataclass(frozen=True)
class _BBox(BoxTerm):
    def __repr__(self):
        return "BBox"


BBox = _BBox()


@dataclass(frozen=True)
class BRel(BoxTerm):
    index: int


@dataclass(frozen=True)
class BLambda(BoxTerm):
    name: str
    body: BoxTerm


@dataclass(frozen=True)
class BLetIn(BoxTerm):
    name: str
    value: BoxTerm
    body: BoxTerm


@dataclass(frozen=True)
class BApp(BoxTerm):
    fn: BoxTerm
    arg: BoxTerm


@dataclass(frozen=True)
class BConst(BoxTerm):
    name: Kername


@dataclass(frozen=True)
class BConstruct(BoxTerm):
    ind: Kername
    ctor: int


@dataclass(frozen=True)
class BCaseBranch:
    arg_count: int
    body: BoxTerm


@dataclass(frozen=True)
class BCase(BoxTerm):
    ind: Kername
    disc: BoxTerm
    branches: tuple[BCaseBranch, ...]


@dataclass(frozen=True)
class BFixDef:
    name: str
    body: BoxTerm


@dataclass(frozen=True)
class BFix(BoxTerm):
    defs: tuple[BFixDef, ...]
    struct_index: int


@dataclass(frozen=True)
class BEmptyMatch(BoxTerm):
    ind: Kername
    disc: BoxTerm


def decompose_bapp(t: BoxTerm) -> tuple[BoxTerm, list[BoxTerm]]:
    args: list[BoxTerm] = []
    while isinstance(t, BApp):
        args.append(t.arg)
        t = t.fn
    args.reverse()
    return t, args


def mk_bapp(head: BoxTerm, args) -> BoxTerm:
    for a in args:
        head = BApp(head, a)
    return head


def blift(t: BoxTerm, amount: int, cutoff: int = 0) -> BoxTerm:
    if amount == 0:
        return t
    match t:
        case BRel(i):
            return BRel(i + amount) if i >= cutoff else t
        case _BBox() | BConst() | BConstruct():
            return t
        case BLambda(n, body):
            return BLambda(n, blift(body, amount, cutoff + 1))
        case BLetIn(n, v, body):
            return BLetIn(n, blift(v, amount, cutoff), blift(body, amount, cutoff + 1))
        case BApp(f, a):
            return BApp(blift(f, amount, cutoff), blift(a, amount, cutoff))
        case BCase(ind, d, brs):
            return BCase(ind, blift(d, amount, cutoff),
                         tuple(BCaseBranch(b.arg_count, blift(b.body, amount, cutoff))
                               for b in brs))
        case BFix(defs, si):
            k = len(defs)
            return BFix(tuple(BFixDef(d.name, blift(d.body, amount, cutoff + k))
                              for d in defs), si)
        case BEmptyMatch(ind, d):
            return BEmptyMatch(ind, blift(d, amount, cutoff))
    raise TypeError(f"blift: {t!r}")


def bsubst(t: BoxTerm, index: int, value: BoxTerm) -> BoxTerm:
    match t:
        case BRel(i):
            if i == index:
                return blift(value, index)
            return BRel(i - 1) if i > index else t
        case _BBox() | BConst() | BConstruct():
            return t
        case BLambda(n, body):
            return BLambda(n, bsubst(body, index + 1, value))
        case BLetIn(n, v, body):
            return BLetIn(n, bsubst(v, index, value), bsubst(body, index + 1, value))
        case BApp(f, a):
            return BApp(bsubst(f, index, value), bsubst(a, index, value))
        case BCase(ind, d, brs):
            return BCase(ind, bsubst(d, index, value),
                         tuple(BCaseBranch(b.arg_count, bsubst(b.body, index, value))
                               for b in brs))
        case BFix(defs, si):
            k = len(defs)
            return BFix(tuple(BFixDef(d.name, bsubst(d.body, index + k, value))
                              for d in defs), si)
        case BEmptyMatch(ind, d):
            return BEmptyMatch(ind, bsubst(d, index, value))
    raise TypeError(f"bsubst: {t!r}")


def brel_occurs(t: BoxTerm, index: int) -> bool:
    match t:
        case BRel(i):
            return i == index
        case _BBox() | BConst() | BConstruct():
            return False
        case BLambda(_, body):
            return brel_occurs(body, index + 1)
        case BLetIn(_, v, body):
            return brel_occurs(v, index) or brel_occurs(body, index + 1)
        case BApp(f, a):
            return brel_occurs(f, index) or brel_occurs(a, index)
        case BCase(_, d, brs):
            return brel_occurs(d, index) or any(brel_occurs(b.body, index) for b in brs)
        case BFix(defs, _):
            k = len(defs)
            return any(brel_occurs(d.body, index + k) for d in defs)
        case BEmptyMatch(_, d):
            return brel_occurs(d, index)
    raise TypeError(f"brel_occurs: {t!r}")


def blower(t: BoxTerm, cutoff: int = 0) -> BoxTerm:
    """Remove the binder slot at `cutoff`; Rel(cutoff) must not occur."""
    match t:
        case BRel(i):
            if i == cutoff:
                raise ValueError("dangling BRel while lowering")
            return BRel(i - 1) if i > cutoff else t
        case _BBox() | BConst() | BConstruct():
            return t
        case BLambda(n, body):
            return BLambda(n, blower(body, cutoff + 1))
        case BLetIn(n, v, body):
            return BLetIn(n, blower(v, cutoff), blower(body, cutoff + 1))
        case BApp(f, a):
            return BApp(blower(f, cutoff), blower(a, cutoff))
        case BCase(ind, d, brs):
            return BCase(ind, blower(d, cutoff),
                         tuple(BCaseBranch(b.arg_count, blower(b.body, cutoff))
                               for b in brs))
        case BFix(defs, si):
            k = len(defs)
            return BFix(tuple(BFixDef(d.name, blower(d.body, cutoff + k))
                              for d in defs), si)
        case BEmptyMatch(ind, d):
            return BEmptyMatch(ind, blower(d, cutoff))
    raise TypeError(f"blower: {t!r}")


# ---------------------------------------------------------------------------
# Annotations (mirror trees, shape-identical to BoxTerms)


@dataclass(frozen=True)
class Ann:
    ty: Optional[BoxType]
    children: tuple["Ann", ...] = ()


def ann_children_count(t: BoxTerm) -> int:
    match t:
        case _BBox() | BRel() | BConst() | BConstruct():
            return 0
        case BLambda() | BEmptyMatch():
            return 1
        case BLetIn() | BApp():
            return 2
        case BCase(_, _, brs):
            return 1 + len(brs)
        case BFix(defs, _):
            return len(defs)
    raise TypeError(f"ann_children_count: {t!r}")


class ShapeMismatch(BoxtractError):
    pass


def check_ann_shape(t: BoxTerm, ann: Ann) -> None:
    if len(ann.children) != ann_children_count(t):
        raise ShapeMismatch(f"annotation shape mismatch at {t!r}")
    subs: list[BoxTerm]
    match t:
        case BLambda(_, body):
            subs = [body]
        case BEmptyMatch(_, d):
            subs = [d]
        case BLetIn(_, v, body):
            subs = [v, body]
        case BApp(f, a):
            subs = [f, a]
        case BCase(_, d, brs):
            subs = [d] + [b.body for b in brs]
        case BFix(defs, _):
            subs = [d.body for d in defs]
        case _:
            subs = []
    for s, a in zip(subs, ann.children):
        check_ann_shape(s, a)


# ---------------------------------------------------------------------------
# Erased environments


@dataclass
class ErasedConstant:
    name: Kername
    type_vars: tuple[str, ...]
    ty: BoxType
    body: Optional[BoxTerm]


@dataclass(frozen=True)
class TypeVarInfo:
    name: str
    is_logical: bool
    is_arity: bool  # whether the parameter is itself a type (allocates a TVar)


@dataclass
class ErasedCtor:
    name: str
    args: list[tuple[str, BoxType]]


@dataclass
class ErasedInductive:
    name: Kername
    type_vars: tuple[TypeVarInfo, ...]
    ctors: list[ErasedCtor]
    is_propositional: bool = False


@dataclass
class TypeAlias:
    name: Kername
    type_vars: tuple[str, ...]
    ty: Optional[BoxType]  # None for postulated (axiom) type formers


ErasedDecl = ErasedConstant | ErasedInductive | TypeAlias


@dataclass
class ErasedEnv:
    decls: list[ErasedDecl] = field(default_factory=list)
    annotations: dict[Kername, Ann] = field(default_factory=dict)

    def lookup(self, name: Kername) -> Optional[ErasedDecl]:
        for d in self.decls:
            if d.name == name:
                return d
        return None

    def constant(self, name: Kername) -> ErasedConstant:
        d = self.lookup(name)
        if not isinstance(d, ErasedConstant):
            raise KeyError(f"no erased constant {name}")
        return d

    def inductive(self, name: Kername) -> ErasedInductive:
        d = self.lookup(name)
        if not isinstance(d, ErasedInductive):
            raise KeyError(f"no erased inductive {name}")
        return d

    def __iter__(self) -> Iterator[ErasedDecl]:
        return iter(self.decls)


# ---------------------------------------------------------------------------
# Evaluation


class OutOfFuelBox(BoxtractError):
    def __init__(self, budget: int):
        super().__init__(f"λ□ evaluation exceeded the fuel budget of {budget}")
        self.budget = budget


class AbsurdReached(BoxtractError):
    pass


class BoxStuck(BoxtractError):
    def __init__(self, term):
        super().__init__(f"λ□ evaluation is stuck at: {term!r}")
        self.term = term


@dataclass(frozen=True)
class BoxValue:
    pass


@dataclass(frozen=True)
class _BoxVal(BoxValue):
    def __repr__(self):
        return "BoxVal"


BoxVal = _BoxVal()


@dataclass(frozen=True)
class BVConstruct(BoxValue):
    ind: Kername
    ctor: int
    args: tuple[BoxValue, ...]


@dataclass(frozen=True)
class BVClosure(BoxValue):
    name: str
    body: BoxTerm
    env: tuple[BoxValue, ...]


@dataclass(frozen=True)
class BVFixClosure(BoxValue):
    defs: tuple[BFixDef, ...]
    struct_index: int
    env: tuple[BoxValue, ...]
    args: tuple[BoxValue, ...]


class BoxEvaluator:
    def __init__(self, env: ErasedEnv, fuel: int):
        self.env = env
        self.fuel = fuel
        self._steps = fuel
        self._const_cache: dict[Kername, BoxValue] = {}

    def _tick(self):
        self._steps -= 1
        if self._steps <= 0:
            raise OutOfFuelBox(self.fuel)

    def eval(self, t: BoxTerm, env: tuple[BoxValue, ...] = ()) -> BoxValue:
        self._tick()
        match t:
            case _BBox():
                return BoxVal
            case BRel(i):
                if i >= len(env):
                    raise BoxStuck(t)
                return env[i]
            case BLambda(n, body):
                return BVClosure(n, body, env)
            case BLetIn(_, v, body):
                return self.eval(body, (self.eval(v, env),) + env)
            case BApp(f, a):
                return self.apply(self.eval(f, env), self.eval(a, env), t)
            case BConst(kn):
                hit = self._const_cache.get(kn)
                if hit is not None:
                    return hit
                decl = self.env.lookup(kn)
                if not isinstance(decl, ErasedConstant) or decl.body is None:
                    raise BoxStuck(t)
                v = self.eval(decl.body, ())
                self._const_cache[kn] = v
                return v
            case BConstruct(ind, ci):
                return BVConstruct(ind, ci, ())
            case BCase(ind, disc, brs):
                dv = self.eval(disc, env)
                if not isinstance(dv, BVConstruct):
                    raise BoxStuck(t)
                if dv.ctor >= len(brs):
                    raise BoxStuck(t)
                br = brs[dv.ctor]
                v = self.eval(br.body, env)
                # ctor args may carry a (boxed) parameter prefix: the branch
                # consumes the last arg_count of them
                take = dv.args[len(dv.args) - br.arg_count:] if br.arg_count else ()
                for a in take:
                    v = self.apply(v, a, t)
                return v
            case BFix(defs, si):
                if len(defs) != 1:
                    raise BoxStuck(t)
                return BVFixClosure(defs, si, env, ())
            case BEmptyMatch(ind, _):
                raise AbsurdReached(f"match on empty inductive {ind} was reached")
        raise BoxStuck(t)

    def apply(self, f: BoxValue, a: BoxValue, site: BoxTerm) -> BoxValue:
        self._tick()
        match f:
            case _BoxVal():
                # applying erased content yields erased content
                return BoxVal
            case BVClosure(_, body, env):
                return self.eval(body, (a,) + env)
            case BVFixClosure(defs, si, env, args):
                args = args + (a,)
                if len(args) == si + 1:
                    if not isinstance(args[si], BVConstruct):
                        raise BoxStuck(site)
                    v = self.eval(defs[0].body,
                                  (BVFixClosure(defs, si, env, ()),) + env)
                    for arg in args:
                        v = self.apply(v, arg, site)
                    return v
                return BVFixClosure(defs, si, env, args)
            case BVConstruct(ind, ci, args):
                return BVConstruct(ind, ci, args + (a,))
        raise BoxStuck(site)


def eval_box(env: ErasedEnv, t: BoxTerm, fuel: int = 10 ** 6) -> BoxValue:
    return BoxEvaluator(env, fuel).eval(t)


def box_value_eq(a: BoxValue, b: BoxValue) -> bool:
    """Structural equality on constructor spines; closures by identity."""
    match (a, b):
        case (_BoxVal(), _BoxVal()):
            return True
        case (BVConstruct(i1, c1, a1), BVConstruct(i2, c2, a2)):
            return (i1 == i2 and c1 == c2 and len(a1) == len(a2)
                    and all(box_value_eq(x, y) for x, y in zip(a1, a2)))
        case _:
            return a is b


# ---------------------------------------------------------------------------
# Readable λ□ printing (goldens, --emit=ir diagnostics)


def print_box(t: BoxTerm, env: Optional[ErasedEnv] = None,
              scope: Optional[list[str]] = None) -> str:
    return _pb(t, env, scope or [], 0)


def _pb_fresh(scope: list[str], name: str) -> str:
    name = name or "_"
    if name == "_" or name not in scope:
        return name
    k = 2
    while f"{name}{k}" in scope:
        k += 1
    return f"{name}{k}"


def _ctor_name(env: Optional[ErasedEnv], ind: Kername, ci: int) -> str:
    if env is not None:
        d = env.lookup(ind)
        if isinstance(d, ErasedInductive) and ci < len(d.ctors):
            return d.ctors[ci].name
    return f"{ind.base}#{ci}"


def _pb(t: BoxTerm, env, scope: list[str], prec: int) -> str:
    match t:
        case _BBox():
            return "□"
        case BRel(i):
            return scope[len(scope) - 1 - i] if i < len(scope) else f"#{i - len(scope)}"
        case BConst(kn):
            return kn.base
        case BConstruct(ind, ci):
            return _ctor_name(env, ind, ci)
        case BApp():
            head, args = decompose_bapp(t)
            s = " ".join([_pb(head, env, scope, 2)] + [_pb(a, env, scope, 2) for a in args])
            return f"({s})" if prec >= 2 else s
        case BLambda():
            names = []
            body = t
            inner = list(scope)
            while isinstance(body, BLambda):
                n = _pb_fresh(inner, body.name)
                names.append(n)
                inner.append(n)
                body = body.body
            s = f"fun {' '.join(names)} => {_pb(body, env, inner, 0)}"
            return f"({s})" if prec >= 1 else s
        case BLetIn(n, v, body):
            nn = _pb_fresh(scope, n)
            s = f"let {nn} := {_pb(v, env, scope, 0)} in {_pb(body, env, scope + [nn], 0)}"
            return f"({s})" if prec >= 1 else s
        case BCase(ind, d, brs):
            parts = [f"match {_pb(d, env, scope, 1)} with"]
            for ci, b in enumerate(brs):
                cname = _ctor_name(env, ind, ci)
                body = b.body
                names = []
                inner = list(scope)
                k = 0
                while k < b.arg_count and isinstance(body, BLambda):
                    n = _pb_fresh(inner, body.name)
                    names.append(n)
                    inner.append(n)
                    body = body.body
                    k += 1
                if k == b.arg_count:
                    parts.append(f"| {' '.join([cname] + names)} => {_pb(body, env, inner, 0)}")
                else:
                    parts.append(f"| {cname} => {_pb(b.body, env, scope, 0)}")
            parts.append("end")
            s = " ".join(parts)
            return f"({s})" if prec >= 1 else s
        case BFix(defs, si):
            d = defs[0]
            inner = list(scope)
            fn = _pb_fresh(inner, d.name)
            inner.append(fn)
            s = f"fix {fn}/{si} := {_pb(d.body, env, inner, 0)}"
            return f"({s})" if prec >= 1 else s
        case BEmptyMatch(ind, d):
            s = f"match {_pb(d, env, scope, 1)} with end"
            return f"({s})" if prec >= 1 else s
    raise TypeError(f"print_box: {t!r}")


def print_box_type(t: BoxType, tvars: Optional[list[str]] = None) -> str:
    return _pbt(t, tvars or [], 0)


def _pbt(t: BoxType, tvars: list[str], prec: int) -> str:
    match t:
        case TVar(l):
            return tvars[l] if l < len(tvars) else str(l)
        case TInd(kn) | TConst(kn):
            return kn.base
        case _TBox():
            return "□"
        case _TAny():
            return "any"
        case TApp():
            head, args = decompose_tapp(t)
            s = " ".join([_pbt(head, tvars, 2)] + [_pbt(a, tvars, 2) for a in args])
            return f"({s})" if prec >= 2 else s
        case TArr(d, c):
            s = f"{_pbt(d, tvars, 2)} -> {_pbt(c, tvars, 1)}"
            return f"({s})" if prec >= 2 else s
    raise TypeError(f"print_box_type: {t!r}")
