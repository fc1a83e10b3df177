"""Erasure from the source calculus to λ□ terms, erased types and ErasedEnv.

Types erase along the prenex grammar (box types); type schemes (definitions
whose type is an arity) become type aliases, η-expanding as needed. Term
erasure replaces every subterm whose type is logical or an arity with □,
keeping the binder skeleton intact. The whole-environment erasure pulls in
only the dependencies that survive in the erased output and can record a
per-node type-annotation mirror for the backends.
"""

from __future__ import annotations

from dataclasses import dataclass
from string import ascii_lowercase
from typing import Optional

from .boxir import (Ann, BBox, BCase, BCaseBranch, BConst, BConstruct,
                    BEmptyMatch, BFix, BFixDef, BLambda, BLetIn, BApp, BRel,
                    BoxTerm, BoxType, ErasedConstant, ErasedCtor, ErasedEnv,
                    ErasedInductive, TAny, TApp, TArr, TBox, TConst, TInd,
                    TVar, TypeAlias, TypeVarInfo, can_have_args, check_ann_shape,
                    decompose_tapp, mk_bapp)
from .check import Checker, Ctx, CtxEntry, EMPTY_CTX, ctx_push
from .core import (App, BoxtractError, Case, Const, ConstantDecl, Construct,
                   Fix, GlobalEnv, Ind, InductiveDecl, Kername, Lambda, LetIn,
                   Prod, Rel, Sort, Term, decompose_app)


class ErasureError(BoxtractError):
    pass


class UnknownRoot(BoxtractError):
    pass


# ECtx entries, positionally aligned with the typing context


@dataclass(frozen=True)
class RelTypeVar:
    level: int


@dataclass(frozen=True)
class RelInductive:
    name: Kername


@dataclass(frozen=True)
class RelOther:
    pass


ECtxEntry = RelTypeVar | RelInductive | RelOther
ECtx = tuple[ECtxEntry, ...]  # innermost first

REL_OTHER = RelOther()


def erase_var(ectx: ECtx, i: int) -> BoxType:
    if i < len(ectx):
        match ectx[i]:
            case RelTypeVar(v):
                return TVar(v)
            case RelInductive(kn):
                return TInd(kn)
    return TAny


def _tvar_name(binder: str, position: int) -> str:
    if binder and binder != "_":
        return binder
    letters = ascii_lowercase
    if position < len(letters):
        return letters[position]
    return f"t{position}"


class Eraser:
    def __init__(self, checker: Checker, record_annotations: bool = False):
        self.checker = checker
        self.env = checker.env
        self.record = record_annotations

    # -- erasure for types ----------------------------------------------

    def erase_type(self, ctx: Ctx, ectx: ECtx, ty: Term,
                   next_var: Optional[int]) -> tuple[list[str], BoxType]:
        ck = self.checker
        t = ck.reduce_biz(ctx, ty)
        flag = ck.flag_of_type(ctx, t)
        if flag.is_logical:
            return [], TBox
        match t:
            case Rel(i):
                return [], erase_var(ectx, i)
            case Sort():
                return [], TBox
            case Prod(n, dom, cod):
                dflag = ck.flag_of_type(ctx, dom)
                inner_ctx = ctx_push(ctx, n, dom)
                if dflag.is_logical:
                    vs, tau = self.erase_type(inner_ctx, (REL_OTHER,) + ectx, cod, next_var)
                    return vs, TArr(TBox, tau)
                if not dflag.conv_to_arity:
                    _, sigma = self.erase_type(ctx, ectx, dom, next_var)
                    vs, tau = self.erase_type(inner_ctx, (REL_OTHER,) + ectx, cod, next_var)
                    return vs, TArr(sigma, tau)
                # arity domain: this binder is a type variable
                if next_var is not None:
                    entry: ECtxEntry = RelTypeVar(next_var)
                    vs, tau = self.erase_type(inner_ctx, (entry,) + ectx, cod, next_var + 1)
                    return [_tvar_name(n, next_var)] + vs, TArr(TBox, tau)
                vs, tau = self.erase_type(inner_ctx, (REL_OTHER,) + ectx, cod, None)
                return vs, TArr(TBox, tau)
            case App():
                head, args = decompose_app(t)
                sigma = self.erase_type_head(ectx, head)
                if can_have_args(sigma):
                    return [], self.erase_type_app(ctx, ectx, args, sigma)
                return [], sigma
            case Const(kn):
                return [], TConst(kn)
            case Ind(kn):
                return [], TInd(kn)
            case _:
                return [], TAny

    def erase_type_head(self, ectx: ECtx, head: Term) -> BoxType:
        match head:
            case Rel(i):
                if i < len(ectx):
                    match ectx[i]:
                        case RelInductive(kn):
                            return TInd(kn)
                        case RelTypeVar(v):
                            return TVar(v)
                return TAny
            case Const(kn):
                return TConst(kn)
            case Ind(kn):
                return TInd(kn)
            case _:
                return TAny

    def erase_type_app(self, ctx: Ctx, ectx: ECtx, args: list[Term],
                       head: BoxType) -> BoxType:
        ck = self.checker
        for a in args:
            a_ty = ck.infer(ctx, a)
            flag = ck.flag_of_type(ctx, a_ty)
            if flag.is_logical:
                tau: BoxType = TBox
            elif flag.is_sort:
                tau = self.erase_type(ctx, ectx, a, None)[1]
            else:
                tau = TAny
            head = TApp(head, tau)
        return head

    # -- erasure for type schemes -----------------------------------------

    def erase_type_scheme(self, ctx: Ctx, ectx: ECtx,
                          actx: list[tuple[str, Term]], t: Term,
                          next_var: int) -> tuple[list[str], BoxType]:
        ck = self.checker
        if not actx:
            return [], self.erase_type(ctx, ectx, t, None)[1]
        t2 = ck.reduce_biz(ctx, t)
        if isinstance(t2, Lambda):
            flag = ck.flag_of_type(ctx, t2.ty)
            if flag.conv_to_arity:
                entry: ECtxEntry = RelTypeVar(next_var)
                nv = next_var + 1
            else:
                entry = REL_OTHER
                nv = next_var
            vs, tau = self.erase_type_scheme(
                ctx_push(ctx, t2.name, t2.ty), (entry,) + ectx, actx[1:], t2.body, nv)
            return [_tvar_name(t2.name, next_var)] + vs, tau
        return self.erase_type_scheme_eta(ctx, ectx, actx, t2, next_var)

    def erase_type_scheme_eta(self, ctx: Ctx, ectx: ECtx,
                              actx: list[tuple[str, Term]], t: Term,
                              next_var: int) -> tuple[list[str], BoxType]:
        ck = self.checker
        if not actx:
            return [], self.erase_type(ctx, ectx, t, None)[1]
        na, a_ty = actx[0]
        flag = ck.flag_of_type(ctx, a_ty)
        if flag.conv_to_arity:
            entry: ECtxEntry = RelTypeVar(next_var)
            nv = next_var + 1
        else:
            entry = REL_OTHER
            nv = next_var
        from .core import lift
        tapp = App(lift(t, 1), Rel(0))
        vs, tau = self.erase_type_scheme(
            ctx_push(ctx, na, a_ty), (entry,) + ectx, actx[1:], tapp, nv)
        return [_tvar_name(na, next_var)] + vs, tau

    def arity_binders(self, ctx: Ctx, ty: Term) -> list[tuple[str, Term]]:
        """The binder spine of an arity ∀ā:Ā.s (the ACtx)."""
        ck = self.checker
        out: list[tuple[str, Term]] = []
        t = ck.whnf(ctx, ty, delta=True)
        while isinstance(t, Prod):
            out.append((t.name, t.ty))
            ctx = ctx_push(ctx, t.name, t.ty)
            t = ck.whnf(ctx, t.body, delta=True)
        if not isinstance(t, Sort):
            raise ErasureError(f"not an arity: {ty!r}")
        return out

    # -- erasure for terms -------------------------------------------------

    def _is_erasable(self, ctx: Ctx, t: Term) -> bool:
        ck = self.checker
        ty = ck.infer(ctx, t)
        flag = ck.flag_of_type(ctx, ty)
        return flag.is_logical or flag.conv_to_arity

    def _annot(self, ctx: Ctx, ectx: ECtx, t: Term) -> Optional[BoxType]:
        if not self.record:
            return None
        ty = self.checker.infer(ctx, t)
        return self.erase_type(ctx, ectx, ty, None)[1]

    def erase_term(self, ctx: Ctx, ectx: ECtx, t: Term) -> tuple[BoxTerm, Ann]:
        if self._is_erasable(ctx, t):
            return BBox, Ann(TBox if self.record else None)
        ck = self.checker
        match t:
            case Rel(i):
                return BRel(i), Ann(self._annot(ctx, ectx, t))
            case Const(kn):
                return BConst(kn), Ann(self._annot(ctx, ectx, t))
            case Construct(ind, ci):
                return BConstruct(ind, ci), Ann(self._annot(ctx, ectx, t))
            case Lambda(n, dom, body):
                dflag = ck.flag_of_type(ctx, dom)
                entry: ECtxEntry = REL_OTHER  # inner type binders print as Any
                eb, ab = self.erase_term(ctx_push(ctx, n, dom), (entry,) + ectx, body)
                return BLambda(n, eb), Ann(self._annot(ctx, ectx, t), (ab,))
            case LetIn(n, v, vty, body):
                ev, av = self.erase_term(ctx, ectx, v)
                eb, ab = self.erase_term(ctx_push(ctx, n, vty, v), (REL_OTHER,) + ectx, body)
                return BLetIn(n, ev, eb), Ann(self._annot(ctx, ectx, t), (av, ab))
            case App(f, a):
                ef, af = self.erase_term(ctx, ectx, f)
                ea, aa = self.erase_term(ctx, ectx, a)
                return BApp(ef, ea), Ann(None, (af, aa))
            case Case(ind, disc, _, brs):
                decl = self.env.inductive(ind)
                ed, ad = self.erase_term(ctx, ectx, disc)
                if not decl.ctors:
                    return (BEmptyMatch(ind, ed),
                            Ann(self._annot(ctx, ectx, t), (ad,)))
                if ed == BBox:
                    return self._erase_singleton(ctx, ectx, t, decl)
                ebrs = []
                anns = [ad]
                for br in brs:
                    eb, ab = self.erase_term(ctx, ectx, br.body)
                    ebrs.append(BCaseBranch(br.arg_count, eb))
                    anns.append(ab)
                return (BCase(ind, ed, tuple(ebrs)),
                        Ann(self._annot(ctx, ectx, t), tuple(anns)))
            case Fix(defs, si):
                d = defs[0]
                eb, ab = self.erase_term(ctx_push(ctx, d.name, d.ty),
                                         (REL_OTHER,) + ectx, d.body)
                return (BFix((BFixDef(d.name, eb),), si),
                        Ann(self._annot(ctx, ectx, t), (ab,)))
        raise ErasureError(f"cannot erase term {t!r}")

    def _erase_singleton(self, ctx: Ctx, ectx: ECtx, t: Case,
                         decl: InductiveDecl) -> tuple[BoxTerm, Ann]:
        """Match on an erased propositional discriminee (singleton elimination)."""
        ck = self.checker
        sort = ck.whnf(EMPTY_CTX, decl.arity, delta=True)
        singleton = (isinstance(sort, Sort) and sort.is_prop
                     and len(decl.ctors) == 1
                     and self._ctor_args_all_logical(decl))
        if not singleton:
            raise ErasureError(
                f"match on an erased proof of {decl.name}: singleton elimination "
                f"requires a propositional inductive with one constructor and "
                f"all-logical argument types")
        br = t.branches[0]
        eb, ab = self.erase_term(ctx, ectx, br.body)
        out = mk_bapp(eb, [BBox] * br.arg_count)
        ann = ab
        for _ in range(br.arg_count):
            ann = Ann(None, (ann, Ann(TBox if self.record else None)))
        return out, ann

    def _ctor_args_all_logical(self, decl: InductiveDecl) -> bool:
        ck = self.checker
        ctx: Ctx = EMPTY_CTX
        for n, ty in decl.params:
            ctx = ctx_push(ctx, n, ty)
        for c in decl.ctors:
            actx = ctx
            for a in c.arg_types:
                if not ck.flag_of_type(actx, a).is_logical:
                    return False
                actx = ctx_push(actx, "_", a)
        return True

    # -- declarations ------------------------------------------------------

    def erase_constant(self, decl: ConstantDecl) -> tuple[ErasedConstant | TypeAlias, Optional[Ann]]:
        ck = self.checker
        assert decl.ty is not None
        flag = ck.flag_of_type(EMPTY_CTX, decl.ty)
        if flag.conv_to_arity:
            # a type scheme: becomes a type alias
            if decl.body is None:
                return TypeAlias(decl.name, (), None), None
            actx = self.arity_binders(EMPTY_CTX, decl.ty)
            names, bt = self.erase_type_scheme(EMPTY_CTX, (), actx, decl.body, 0)
            return TypeAlias(decl.name, tuple(names), bt), None
        names, bt = self.erase_type(EMPTY_CTX, (), decl.ty, 0)
        if decl.body is None:
            return ErasedConstant(decl.name, tuple(names), bt, None), None
        body, ann = self._erase_constant_body(decl)
        return ErasedConstant(decl.name, tuple(names), bt, body), ann

    def _erase_constant_body(self, decl: ConstantDecl) -> tuple[BoxTerm, Ann]:
        """Erase a body, numbering its leading type binders like the signature."""
        ck = self.checker
        flag = ck.flag_of_type(EMPTY_CTX, decl.ty)
        if flag.is_logical:
            return BBox, Ann(TBox if self.record else None)
        t = decl.body
        ctx: Ctx = EMPTY_CTX
        ectx: ECtx = ()
        binders: list[str] = []
        next_var = 0
        while isinstance(t, Lambda):
            dflag = ck.flag_of_type(ctx, t.ty)
            if dflag.conv_to_arity:
                entry: ECtxEntry = RelTypeVar(next_var)
                next_var += 1
            else:
                entry = REL_OTHER
            ctx = ctx_push(ctx, t.name, t.ty)
            ectx = (entry,) + ectx
            binders.append(t.name)
            t = t.body
        body, ann = self.erase_term(ctx, ectx, t)
        for n in reversed(binders):
            body = BLambda(n, body)
            ann = Ann(None, (ann,))
        return body, ann

    def erase_inductive(self, decl: InductiveDecl) -> ErasedInductive:
        ck = self.checker
        ctx: Ctx = EMPTY_CTX
        ectx: ECtx = ()
        tvars: list[TypeVarInfo] = []
        for j, (n, ty) in enumerate(decl.params):
            pf = ck.flag_of_type(ctx, ty)
            tvars.append(TypeVarInfo(_tvar_name(n, j), pf.is_logical, pf.conv_to_arity))
            entry: ECtxEntry = RelTypeVar(j) if pf.conv_to_arity else REL_OTHER
            ctx = ctx_push(ctx, n, ty)
            ectx = (entry,) + ectx
        ctors: list[ErasedCtor] = []
        for c in decl.ctors:
            args: list[tuple[str, BoxType]] = []
            actx, aectx = ctx, ectx
            for name, a in zip(c.arg_names, c.arg_types):
                bt = self.erase_type(actx, aectx, a, None)[1]
                args.append((name, bt))
                actx = ctx_push(actx, name, a)
                aectx = (REL_OTHER,) + aectx
            ctors.append(ErasedCtor(c.name, args))
        sort = ck.whnf(EMPTY_CTX, decl.arity, delta=True)
        is_prop = isinstance(sort, Sort) and sort.is_prop
        return ErasedInductive(decl.name, tuple(tvars), ctors, is_prop)


# ---------------------------------------------------------------------------
# Whole-environment erasure


def _term_deps(t: BoxTerm) -> set[Kername]:
    out: set[Kername] = set()

    def go(x: BoxTerm):
        match x:
            case BConst(kn):
                out.add(kn)
            case BConstruct(ind, _):
                out.add(ind)
            case BLambda(_, b):
                go(b)
            case BLetIn(_, v, b):
                go(v)
                go(b)
            case BApp(f, a):
                go(f)
                go(a)
            case BCase(ind, d, brs):
                out.add(ind)
                go(d)
                for br in brs:
                    go(br.body)
            case BFix(defs, _):
                for d in defs:
                    go(d.body)
            case BEmptyMatch(ind, d):
                out.add(ind)
                go(d)
            case _:
                pass

    go(t)
    return out


def _type_deps(t: BoxType) -> set[Kername]:
    match t:
        case TInd(kn) | TConst(kn):
            return {kn}
        case TApp(h, a):
            return _type_deps(h) | _type_deps(a)
        case TArr(d, c):
            return _type_deps(d) | _type_deps(c)
        case _:
            return set()


def _decl_deps(d) -> set[Kername]:
    out: set[Kername] = set()
    if isinstance(d, ErasedConstant):
        out |= _type_deps(d.ty)
        if d.body is not None:
            out |= _term_deps(d.body)
    elif isinstance(d, TypeAlias):
        if d.ty is not None:
            out |= _type_deps(d.ty)
    else:
        for c in d.ctors:
            for _, bt in c.args:
                out |= _type_deps(bt)
    return out


def erase_env(env: GlobalEnv, roots: list[Kername], checker: Optional[Checker] = None,
              record_annotations: bool = False) -> ErasedEnv:
    """Erase the roots and, transitively, whatever the erased output mentions."""
    ck = checker or Checker(env)
    eraser = Eraser(ck, record_annotations)
    erased: dict[Kername, object] = {}
    anns: dict[Kername, Ann] = {}

    def process(kn: Kername):
        if kn in erased:
            return
        decl = env.lookup(kn)
        if decl is None:
            raise UnknownRoot(str(kn))
        if isinstance(decl, ConstantDecl):
            out, ann = eraser.erase_constant(decl)
            erased[kn] = out
            if ann is not None:
                anns[kn] = ann
        else:
            erased[kn] = eraser.erase_inductive(decl)
        for dep in sorted(_decl_deps(erased[kn]), key=str):
            process(dep)

    for r in roots:
        process(r)
    out_env = ErasedEnv([], anns)
    for decl in env.decls:  # keep the original dependency order
        if decl.name in erased:
            out_env.decls.append(erased[decl.name])
    return out_env


def annotate(env: ErasedEnv) -> ErasedEnv:
    """Validate that the recorded annotation mirror matches every body."""
    for d in env.decls:
        if isinstance(d, ErasedConstant) and d.body is not None:
            ann = env.annotations.get(d.name)
            if ann is not None:
                check_ann_shape(d.body, ann)
    return env
