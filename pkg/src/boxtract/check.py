"""Type checker, βιζ head reduction, convertibility, and CBV evaluation.

All reduction is fuel-bounded (default 10^6 steps per entry call). The
conversion test normalizes both sides (full βδιζ, fix guarded on
constructor-headed structural arguments) and compares up to α and η.
`reduce_biz` itself never δ-unfolds at the head; δ is used only to expose
ι/fix redexes in discriminees and structural arguments.
"""

from __future__ import annotations

import sys
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Optional

# recursive-descent evaluation of recursive programs needs headroom well
# beyond CPython's default
sys.setrecursionlimit(max(sys.getrecursionlimit(), 100_000))

from .core import (App, BoxtractError, Case, CaseBranch, Const, ConstantDecl,
                   Construct, Fix, FixDef, GlobalEnv, Ind, InductiveDecl,
                   Kername, Lambda, LetIn, PROP, PROP_LEVEL, Prod, Rel, Sort,
                   Term, decompose_app, decompose_prods, lift, mk_app, subst)

DEFAULT_FUEL = 10 ** 6


class OutOfFuel(BoxtractError):
    def __init__(self, budget: int):
        super().__init__(f"reduction exceeded the fuel budget of {budget}")
        self.budget = budget


class TypeCheckError(BoxtractError):
    pass


class UnboundRel(TypeCheckError):
    pass


class ArityMismatch(TypeCheckError):
    pass


class StuckError(BoxtractError):
    def __init__(self, term):
        super().__init__(f"evaluation is stuck at: {term!r}")
        self.term = term


@dataclass(frozen=True)
class CtxEntry:
    name: str
    ty: Term
    body: Optional[Term] = None


Ctx = tuple[CtxEntry, ...]  # innermost first

EMPTY_CTX: Ctx = ()


def ctx_push(ctx: Ctx, name: str, ty: Term, body: Optional[Term] = None) -> Ctx:
    return (CtxEntry(name, ty, body),) + ctx


@dataclass(frozen=True)
class TypeFlag:
    is_logical: bool
    conv_to_arity: bool
    is_sort: bool


# ---------------------------------------------------------------------------
# Values


@dataclass(frozen=True)
class CoreValue:
    pass


@dataclass(frozen=True)
class VSort(CoreValue):
    level: int


@dataclass(frozen=True)
class VInd(CoreValue):
    ind: Kername
    args: tuple[CoreValue, ...]


@dataclass(frozen=True)
class VConstruct(CoreValue):
    ind: Kername
    ctor: int
    args: tuple[CoreValue, ...]


@dataclass(frozen=True)
class VClosure(CoreValue):
    name: str
    body: Term
    env: tuple[CoreValue, ...]


@dataclass(frozen=True)
class VFixClosure(CoreValue):
    defs: tuple[FixDef, ...]
    struct_index: int
    env: tuple[CoreValue, ...]
    args: tuple[CoreValue, ...]


@dataclass(frozen=True)
class VProd(CoreValue):
    term: Term
    env: tuple[CoreValue, ...]


class Checker:
    """Typing and reduction engine for one global environment."""

    def __init__(self, env: GlobalEnv, fuel: int = DEFAULT_FUEL):
        self.env = env
        self.fuel = fuel
        self._steps = fuel
        self._depth = 0
        self._infer_cache: dict[tuple[Ctx, Term], Term] = {}
        self._const_values: dict[Kername, CoreValue] = {}

    # -- fuel ---------------------------------------------------------------

    @contextmanager
    def _entry(self):
        if self._depth == 0:
            self._steps = self.fuel
        self._depth += 1
        try:
            yield
        except RecursionError:
            # deep non-tail recursion exhausts the Python stack before the
            # step budget; report it as the same resource failure
            raise OutOfFuel(self.fuel) from None
        finally:
            self._depth -= 1

    def _tick(self):
        self._steps -= 1
        if self._steps <= 0:
            raise OutOfFuel(self.fuel)

    # -- reduction ------------------------------------------------------

    def whnf(self, ctx: Ctx, t: Term, delta: bool) -> Term:
        """Weak head normal form; unfolds constants only when delta is set."""
        with self._entry():
            return self._whnf(ctx, t, delta)

    def _whnf(self, ctx: Ctx, t: Term, delta: bool) -> Term:
        while True:
            self._tick()
            head, args = decompose_app(t)
            match head:
                case Lambda() if args:
                    t = mk_app(subst(head.body, 0, args[0]), args[1:])
                case LetIn(_, v, _, body):
                    t = mk_app(subst(body, 0, v), args)
                case Rel(i):
                    if i < len(ctx) and ctx[i].body is not None:
                        t = mk_app(lift(ctx[i].body, i + 1), args)
                    else:
                        return mk_app(head, args)
                case Const(kn) if delta:
                    decl = self.env.lookup(kn)
                    if isinstance(decl, ConstantDecl) and decl.body is not None:
                        t = mk_app(decl.body, args)
                    else:
                        return mk_app(head, args)
                case Case(ind, disc, ret, brs):
                    disc_w = self._whnf(ctx, disc, delta=True)
                    dh, dargs = decompose_app(disc_w)
                    if isinstance(dh, Construct):
                        decl = self.env.inductive(ind)
                        br = brs[dh.ctor]
                        t = mk_app(mk_app(br.body, dargs[decl.param_count:]), args)
                    else:
                        return mk_app(Case(ind, disc_w, ret, brs), args)
                case Fix(defs, si):
                    if len(args) > si:
                        sarg = self._whnf(ctx, args[si], delta=True)
                        sh, _ = decompose_app(sarg)
                        if isinstance(sh, Construct):
                            unfolded = subst(defs[0].body, 0, head)
                            new_args = args[:si] + [sarg] + args[si + 1:]
                            t = mk_app(unfolded, new_args)
                        else:
                            return mk_app(head, args[:si] + [sarg] + args[si + 1:])
                    else:
                        return mk_app(head, args)
                case _:
                    return mk_app(head, args)

    def reduce_biz(self, ctx: Ctx, t: Term) -> Term:
        """Head βιζ reduction; stops when the head is no longer a redex."""
        with self._entry():
            return self._whnf(ctx, t, delta=False)

    def nf(self, ctx: Ctx, t: Term) -> Term:
        """Full βδιζ normal form (fix unfolds only on ctor-headed struct args)."""
        with self._entry():
            return self._nf(ctx, t)

    def _nf(self, ctx: Ctx, t: Term) -> Term:
        t = self._whnf(ctx, t, delta=True)
        match t:
            case Sort() | Rel() | Const() | Ind() | Construct():
                return t
            case Lambda(n, ty, body):
                return Lambda(n, self._nf(ctx, ty),
                              self._nf(ctx_push(ctx, n, ty), body))
            case Prod(n, ty, body):
                return Prod(n, self._nf(ctx, ty),
                            self._nf(ctx_push(ctx, n, ty), body))
            case App(f, a):
                return App(self._nf(ctx, f), self._nf(ctx, a))
            case Case(ind, disc, ret, brs):
                return Case(ind, self._nf(ctx, disc), self._nf(ctx, ret),
                            tuple(CaseBranch(b.arg_count, self._nf(ctx, b.body))
                                  for b in brs))
            case Fix(defs, si):
                # bodies live under the (single) fix binder
                new_defs = []
                for d in defs:
                    inner = ctx_push(ctx, d.name, d.ty)
                    new_defs.append(FixDef(d.name, self._nf(ctx, d.ty),
                                           self._nf(inner, d.body)))
                return Fix(tuple(new_defs), si)
            case LetIn():  # unreachable: whnf ζ-reduces lets
                raise AssertionError("let survived whnf")
        raise TypeError(f"nf: {t!r}")

    # -- conversion -----------------------------------------------------

    def check_convertible(self, ctx: Ctx, a: Term, b: Term) -> bool:
        with self._entry():
            return _alpha_eta_eq(self._nf(ctx, a), self._nf(ctx, b), leq=False)

    def conv_leq(self, ctx: Ctx, a: Term, b: Term) -> bool:
        """Cumulative convertibility: a ≤ b (Prop ≤ Type_i ≤ Type_j)."""
        with self._entry():
            return _alpha_eta_eq(self._nf(ctx, a), self._nf(ctx, b), leq=True)

    # -- typing ---------------------------------------------------------

    def infer(self, ctx: Ctx, t: Term) -> Term:
        with self._entry():
            return self._infer(ctx, t)

    def check(self, ctx: Ctx, t: Term, expected: Term) -> None:
        with self._entry():
            got = self._infer(ctx, t)
            if not _alpha_eta_eq(self._nf(ctx, got), self._nf(ctx, expected), leq=True):
                raise TypeCheckError(
                    f"type mismatch: inferred {got!r}, expected {expected!r}")

    def _infer(self, ctx: Ctx, t: Term) -> Term:
        key = (ctx, t)
        hit = self._infer_cache.get(key)
        if hit is not None:
            return hit
        ty = self._infer_raw(ctx, t)
        self._infer_cache[key] = ty
        return ty

    def _infer_raw(self, ctx: Ctx, t: Term) -> Term:
        self._tick()
        match t:
            case Sort(level):
                return Sort(level + 1) if level >= 0 else Sort(0)
            case Rel(i):
                if i >= len(ctx):
                    raise UnboundRel(f"unbound de Bruijn index {i}")
                return lift(ctx[i].ty, i + 1)
            case Const(kn):
                decl = self.env.lookup(kn)
                if not isinstance(decl, ConstantDecl):
                    raise TypeCheckError(f"unknown constant {kn}")
                if decl.ty is None:
                    raise TypeCheckError(f"constant {kn} has no type yet")
                return decl.ty
            case Ind(kn):
                decl = self.env.lookup(kn)
                if not isinstance(decl, InductiveDecl):
                    raise TypeCheckError(f"unknown inductive {kn}")
                return ind_type(decl)
            case Construct(ind, ci):
                decl = self.env.lookup(ind)
                if not isinstance(decl, InductiveDecl):
                    raise TypeCheckError(f"unknown inductive {ind}")
                if ci >= len(decl.ctors):
                    raise TypeCheckError(f"{ind} has no constructor #{ci}")
                return ctor_type(decl, ci)
            case Lambda(n, ty, body):
                self._sort_of(ctx, ty)
                bty = self._infer(ctx_push(ctx, n, ty), body)
                return Prod(n, ty, bty)
            case Prod(n, ty, body):
                s1 = self._sort_of(ctx, ty)
                s2 = self._sort_of(ctx_push(ctx, n, ty), body)
                if s2.is_prop:
                    return PROP
                return Sort(max(0, s1.level, s2.level))
            case LetIn(n, v, ty, body):
                self._sort_of(ctx, ty)
                self._check_against(ctx, v, ty)
                bty = self._infer(ctx_push(ctx, n, ty, v), body)
                return subst(bty, 0, v)
            case App(f, a):
                fty = self._whnf(ctx, self._infer(ctx, f), delta=True)
                if not isinstance(fty, Prod):
                    raise TypeCheckError(f"application of a non-function: {f!r} : {fty!r}")
                self._check_against(ctx, a, fty.ty)
                return subst(fty.body, 0, a)
            case Case(ind, disc, ret_ty, brs):
                decl = self.env.lookup(ind)
                if not isinstance(decl, InductiveDecl):
                    raise TypeCheckError(f"unknown inductive {ind}")
                dty = self._whnf(ctx, self._infer(ctx, disc), delta=True)
                dh, dargs = decompose_app(dty)
                if dh != Ind(ind) or len(dargs) != decl.param_count:
                    raise TypeCheckError(
                        f"discriminee has type {dty!r}, expected {ind} applied to "
                        f"{decl.param_count} parameter(s)")
                if len(brs) != len(decl.ctors):
                    raise ArityMismatch(
                        f"match on {ind} needs {len(decl.ctors)} branches, got {len(brs)}")
                self._sort_of(ctx, ret_ty)
                for ci, br in enumerate(brs):
                    arg_tys = ctor_arg_types_at(decl, ci, dargs)
                    if br.arg_count != len(arg_tys):
                        raise ArityMismatch(
                            f"branch {ci} of match on {ind}: argCount {br.arg_count}"
                            f" != constructor arity {len(arg_tys)}")
                    expected = lift(ret_ty, len(arg_tys))
                    for a in reversed(arg_tys):
                        expected = Prod("_", a, expected)
                    self._check_against(ctx, br.body, expected)
                return ret_ty
            case Fix(defs, si):
                if len(defs) != 1:
                    raise TypeCheckError("mutual fixpoints are not supported")
                d = defs[0]
                self._sort_of(ctx, d.ty)
                prods, _ = decompose_prods(d.ty)
                if si >= len(prods):
                    raise ArityMismatch(
                        f"fix {d.name}: structural index {si} exceeds its arity")
                self._check_against(ctx_push(ctx, d.name, d.ty), d.body, lift(d.ty, 1))
                return d.ty
        raise TypeCheckError(f"cannot infer a type for {t!r}")

    def _check_against(self, ctx: Ctx, t: Term, expected: Term) -> None:
        got = self._infer(ctx, t)
        if not _alpha_eta_eq(self._nf(ctx, got), self._nf(ctx, expected), leq=True):
            raise TypeCheckError(
                f"type mismatch for {t!r}: inferred {got!r}, expected {expected!r}")

    def _sort_of(self, ctx: Ctx, t: Term) -> Sort:
        s = self._whnf(ctx, self._infer(ctx, t), delta=True)
        if not isinstance(s, Sort):
            raise TypeCheckError(f"{t!r} is not a type (its type is {s!r})")
        return s

    def sort_of(self, ctx: Ctx, t: Term) -> Sort:
        with self._entry():
            return self._sort_of(ctx, t)

    # -- type flags -------------------------------------------------------

    def flag_of_type(self, ctx: Ctx, ty: Term) -> TypeFlag:
        with self._entry():
            is_sort = isinstance(self._whnf(ctx, ty, delta=True), Sort)
            concl = self._arity_conclusion(ctx, ty)
            conv_to_arity = concl is not None
            if conv_to_arity and concl.is_prop:
                logical = True
            else:
                logical = self._sort_of(ctx, ty).is_prop
            return TypeFlag(logical, conv_to_arity, is_sort)

    def _arity_conclusion(self, ctx: Ctx, ty: Term) -> Optional[Sort]:
        """The final sort when ty is convertible to ∀ā:Ā.s, else None."""
        t = self._whnf(ctx, ty, delta=True)
        while isinstance(t, Prod):
            ctx = ctx_push(ctx, t.name, t.ty)
            t = self._whnf(ctx, t.body, delta=True)
        return t if isinstance(t, Sort) else None

    # -- evaluation -------------------------------------------------------

    def eval(self, t: Term) -> CoreValue:
        with self._entry():
            return self._eval(t, ())

    def _eval(self, t: Term, env: tuple[CoreValue, ...]) -> CoreValue:
        self._tick()
        match t:
            case Sort(level):
                return VSort(level)
            case Rel(i):
                if i >= len(env):
                    raise StuckError(t)
                return env[i]
            case Prod():
                return VProd(t, env)
            case Lambda(n, _, body):
                return VClosure(n, body, env)
            case LetIn(_, v, _, body):
                return self._eval(body, (self._eval(v, env),) + env)
            case App(f, a):
                return self._apply(self._eval(f, env), self._eval(a, env), t)
            case Const(kn):
                cached = self._const_values.get(kn)
                if cached is not None:
                    return cached
                decl = self.env.lookup(kn)
                if not isinstance(decl, ConstantDecl) or decl.body is None:
                    raise StuckError(t)
                v = self._eval(decl.body, ())
                self._const_values[kn] = v
                return v
            case Ind(kn):
                return VInd(kn, ())
            case Construct(ind, ci):
                return VConstruct(ind, ci, ())
            case Case(ind, disc, _, brs):
                dv = self._eval(disc, env)
                if not isinstance(dv, VConstruct):
                    raise StuckError(t)
                decl = self.env.inductive(ind)
                if dv.ctor >= len(brs):
                    raise StuckError(t)
                br = brs[dv.ctor]
                v = self._eval(br.body, env)
                for arg in dv.args[decl.param_count:]:
                    v = self._apply(v, arg, t)
                return v
            case Fix(defs, si):
                if len(defs) != 1:
                    raise StuckError(t)
                return VFixClosure(defs, si, env, ())
        raise StuckError(t)

    def _apply(self, f: CoreValue, a: CoreValue, site: Term) -> CoreValue:
        self._tick()
        match f:
            case VClosure(_, body, env):
                return self._eval(body, (a,) + env)
            case VFixClosure(defs, si, env, args):
                args = args + (a,)
                if len(args) == si + 1:
                    if not isinstance(args[si], VConstruct):
                        raise StuckError(site)
                    v = self._eval(defs[0].body,
                                   (VFixClosure(defs, si, env, ()),) + env)
                    for arg in args:
                        v = self._apply(v, arg, site)
                    return v
                return VFixClosure(defs, si, env, args)
            case VConstruct(ind, ci, args):
                decl = self.env.inductive(ind)
                arity = decl.param_count + len(decl.ctors[ci].arg_types)
                if len(args) >= arity:
                    raise StuckError(site)
                return VConstruct(ind, ci, args + (a,))
            case VInd(ind, args):
                return VInd(ind, args + (a,))
        raise StuckError(site)


# ---------------------------------------------------------------------------
# Structural comparison up to α (built in), η, and optional cumulativity


def _alpha_eta_eq(a: Term, b: Term, leq: bool) -> bool:
    if a == b:
        return True
    match (a, b):
        case (Sort(l1), Sort(l2)):
            if not leq:
                return l1 == l2
            return l1 == PROP_LEVEL or (l2 != PROP_LEVEL and l1 <= l2)
        case (Lambda(_, t1, b1), Lambda(_, t2, b2)):
            return _alpha_eta_eq(t1, t2, False) and _alpha_eta_eq(b1, b2, False)
        case (Lambda(_, _, b1), _):
            return _alpha_eta_eq(b1, App(lift(b, 1), Rel(0)), False)
        case (_, Lambda(_, _, b2)):
            return _alpha_eta_eq(App(lift(a, 1), Rel(0)), b2, False)
        case (Prod(_, t1, b1), Prod(_, t2, b2)):
            return _alpha_eta_eq(t1, t2, False) and _alpha_eta_eq(b1, b2, leq)
        case (App(f1, a1), App(f2, a2)):
            return _alpha_eta_eq(f1, f2, False) and _alpha_eta_eq(a1, a2, False)
        case (Case(i1, d1, r1, brs1), Case(i2, d2, r2, brs2)):
            return (i1 == i2 and len(brs1) == len(brs2)
                    and _alpha_eta_eq(d1, d2, False)
                    and _alpha_eta_eq(r1, r2, False)
                    and all(x.arg_count == y.arg_count
                            and _alpha_eta_eq(x.body, y.body, False)
                            for x, y in zip(brs1, brs2)))
        case (Fix(ds1, si1), Fix(ds2, si2)):
            return (si1 == si2 and len(ds1) == len(ds2)
                    and all(_alpha_eta_eq(x.ty, y.ty, False)
                            and _alpha_eta_eq(x.body, y.body, False)
                            for x, y in zip(ds1, ds2)))
    return False


# ---------------------------------------------------------------------------
# Inductive helpers


def ind_type(decl: InductiveDecl) -> Term:
    t = decl.arity
    for n, ty in reversed(decl.params):
        t = Prod(n, ty, t)
    return t


def ctor_type(decl: InductiveDecl, ci: int) -> Term:
    """forall params, arg1 -> .. -> argn -> I params."""
    c = decl.ctors[ci]
    n = len(c.arg_types)
    head = mk_app(Ind(decl.name),
                  [Rel(n + decl.param_count - 1 - i) for i in range(decl.param_count)])
    t: Term = head
    for a in reversed(c.arg_types):
        t = Prod("_", a, t)
    for pn, pty in reversed(decl.params):
        t = Prod(pn, pty, t)
    return t


def ctor_arg_types_at(decl: InductiveDecl, ci: int, params: list[Term]) -> list[Term]:
    """Constructor argument types instantiated at concrete parameters.

    Each returned type is scoped under the *earlier* argument binders.
    """
    if len(params) != decl.param_count:
        raise ArityMismatch(f"{decl.name} expects {decl.param_count} parameter(s)")
    k = decl.param_count
    out = []
    for j, a in enumerate(decl.ctors[ci].arg_types):
        # a is scoped as [params..., arg_0..arg_{j-1}]: substitute the params
        # innermost-first, keeping the j earlier argument binders intact; the
        # parameter values live in the outer context, below the remaining
        # param binders and the j argument binders
        ty = a
        for step, p in enumerate(reversed(params)):
            ty = subst(ty, j, lift(p, (k - step - 1) + j))
        out.append(ty)
    return out


# ---------------------------------------------------------------------------
# Environment checking and module-level convenience wrappers


def check_env(env: GlobalEnv, fuel: int = DEFAULT_FUEL) -> Checker:
    """Check declarations in order; infer omitted constant types in place."""
    ck = Checker(env, fuel)
    for decl in env.decls:
        if isinstance(decl, ConstantDecl):
            if decl.ty is None:
                if decl.body is None:
                    raise TypeCheckError(f"axiom {decl.name} needs a type")
                decl.ty = ck.infer(EMPTY_CTX, decl.body)
            else:
                ck.sort_of(EMPTY_CTX, decl.ty)
                if decl.body is not None:
                    ck.check(EMPTY_CTX, decl.body, decl.ty)
        else:
            ctx: Ctx = EMPTY_CTX
            for n, ty in decl.params:
                ck.sort_of(ctx, ty)
                ctx = ctx_push(ctx, n, ty)
            s = ck.whnf(ctx, decl.arity, delta=True)
            if not isinstance(s, Sort):
                raise TypeCheckError(f"inductive {decl.name}: arity must end in a sort")
            for c in decl.ctors:
                cctx = ctx
                for a in c.arg_types:
                    ck.sort_of(cctx, a)
                    cctx = ctx_push(cctx, "_", a)
    return ck


def infer(env: GlobalEnv, ctx: Ctx, t: Term, fuel: int = DEFAULT_FUEL) -> Term:
    return Checker(env, fuel).infer(ctx, t)


def reduce_biz(env: GlobalEnv, ctx: Ctx, t: Term, fuel: int = DEFAULT_FUEL) -> Term:
    return Checker(env, fuel).reduce_biz(ctx, t)


def flag_of_type(env: GlobalEnv, ctx: Ctx, ty: Term, fuel: int = DEFAULT_FUEL) -> TypeFlag:
    return Checker(env, fuel).flag_of_type(ctx, ty)


def check_convertible(env: GlobalEnv, ctx: Ctx, a: Term, b: Term,
                      fuel: int = DEFAULT_FUEL) -> bool:
    return Checker(env, fuel).check_convertible(ctx, a, b)


def eval_core(env: GlobalEnv, t: Term, fuel: int = DEFAULT_FUEL) -> CoreValue:
    return Checker(env, fuel).eval(t)
