"""Textual surface syntax: lexer, parser into GlobalEnv, and core printer.

The grammar is Coq-flavored and fully annotated (no inference): `def`,
`axiom`, `inductive`, `fun`, `forall`, `let .. : T := .. in`, `match ..
return T with | C (x : T) .. => e end`, `fix f (x : T).. {struct x} : T :=
e`. `--` starts a line comment. See docs/surface-syntax.md.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .core import (App, BoxtractError, Case, CaseBranch, Const, ConstantDecl,
                   Construct, CtorDecl, Fix, FixDef, GlobalEnv, Ind,
                   InductiveDecl, Kername, Lambda, LetIn, PROP, Prod, Rel,
                   Sort, Term, TYPE0, TYPE1, decompose_app, decompose_prods,
                   lift, rel_occurs)


class SurfaceSyntaxError(BoxtractError):
    def __init__(self, line: int, col: int, message: str):
        super().__init__(f"{line}:{col}: {message}")
        self.line = line
        self.col = col
        self.message = message


class UnboundName(BoxtractError):
    pass


class AmbiguousName(BoxtractError):
    pass


@dataclass
class SourceFile:
    path: str
    text: str

    @staticmethod
    def load(path: str | Path) -> "SourceFile":
        p = Path(path)
        return SourceFile(str(p), p.read_text(encoding="utf-8"))


KEYWORDS = {
    "module", "def", "axiom", "inductive", "fun", "forall", "let", "in",
    "match", "with", "end", "return", "fix", "struct", "Prop", "Type", "Type1",
}

SYMBOLS = ["=>", "->", ":=", "(", ")", ":", ",", "|", "{", "}"]


@dataclass
class Token:
    kind: str  # 'ident', 'keyword', 'symbol', 'eof'
    text: str
    line: int
    col: int


def lex(src: SourceFile) -> list[Token]:
    toks: list[Token] = []
    line, col, i = 1, 1, 0
    text = src.text
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            i += 1
            line += 1
            col = 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if text.startswith("--", i):
            while i < n and text[i] != "\n":
                i += 1
            continue
        sym = next((s for s in SYMBOLS if text.startswith(s, i)), None)
        if sym is not None:
            toks.append(Token("symbol", sym, line, col))
            i += len(sym)
            col += len(sym)
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            # dotted qualification: Mod.sub.leaf
            while j < n and text[j] == "." and j + 1 < n and (text[j + 1].isalpha() or text[j + 1] == "_"):
                j += 1
                while j < n and (text[j].isalnum() or text[j] in "_'"):
                    j += 1
            word = text[i:j]
            kind = "keyword" if word in KEYWORDS else "ident"
            toks.append(Token(kind, word, line, col))
            col += j - i
            i = j
            continue
        raise SurfaceSyntaxError(line, col, f"unexpected character {c!r}")
    toks.append(Token("eof", "", line, col))
    return toks


class Parser:
    def __init__(self, src: SourceFile):
        self.src = src
        self.toks = lex(src)
        self.pos = 0
        self.module = "Top"
        self.env = GlobalEnv([])
        self.by_base: dict[str, list[Kername]] = {}
        self.ctors: dict[str, list[tuple[Kername, int]]] = {}

    # -- token plumbing -----------------------------------------------------

    def peek(self) -> Token:
        return self.toks[self.pos]

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def error(self, msg: str, tok: Optional[Token] = None):
        t = tok or self.peek()
        raise SurfaceSyntaxError(t.line, t.col, msg)

    def expect(self, kind: str, text: Optional[str] = None) -> Token:
        t = self.peek()
        if t.kind != kind or (text is not None and t.text != text):
            self.error(f"expected {text or kind!r}, found {t.text or 'end of input'!r}")
        return self.next()

    def at(self, kind: str, text: Optional[str] = None) -> bool:
        t = self.peek()
        return t.kind == kind and (text is None or t.text == text)

    # -- declarations -------------------------------------------------------

    def parse_program(self) -> GlobalEnv:
        if self.at("keyword", "module"):
            self.next()
            self.module = self.expect("ident").text
        while not self.at("eof"):
            if self.at("keyword", "def"):
                self.parse_def()
            elif self.at("keyword", "axiom"):
                self.parse_axiom()
            elif self.at("keyword", "inductive"):
                self.parse_inductive()
            else:
                self.error("expected a declaration (def/axiom/inductive)")
        return self.env

    def qualify(self, name: str) -> Kername:
        return Kername(tuple(self.module.split(".")) + (name,))

    def register(self, kn: Kername):
        self.by_base.setdefault(kn.base, []).append(kn)

    def parse_def(self):
        self.next()
        name = self.expect("ident").text
        ty = None
        if self.at("symbol", ":"):
            self.next()
            ty = self.parse_term([])
        self.expect("symbol", ":=")
        body = self.parse_term([])
        self.env.add(ConstantDecl(self.qualify(name), ty, body))
        self.register(self.qualify(name))

    def parse_axiom(self):
        self.next()
        name = self.expect("ident").text
        self.expect("symbol", ":")
        ty = self.parse_term([])
        self.env.add(ConstantDecl(self.qualify(name), ty, None))
        self.register(self.qualify(name))

    def parse_inductive(self):
        self.next()
        name_tok = self.expect("ident")
        kn = self.qualify(name_tok.text)
        params: list[tuple[str, Term]] = []
        scope: list[str] = []
        while self.at("symbol", "("):
            for pname, pty in self.parse_binder_group(scope):
                params.append((pname, pty))
                scope.append(pname)
        self.expect("symbol", ":")
        arity = self.parse_term(scope)
        self.expect("symbol", ":=")
        # register before parsing ctors: their arg types may recurse
        decl = InductiveDecl(kn, tuple(params), arity, ())
        self.env.add(decl)
        self.register(kn)
        ctors: list[CtorDecl] = []
        if self.at("symbol", "|"):
            self.next()
        while self.at("ident"):
            ctok = self.next()
            self.expect("symbol", ":")
            cty = self.parse_term(scope)
            ctors.append(self.ctor_from_type(kn, len(params), ctok, cty))
            if self.at("symbol", "|"):
                self.next()
            else:
                break
        decl.ctors = tuple(ctors)
        for i, c in enumerate(ctors):
            self.ctors.setdefault(c.name, []).append((kn, i))

    def ctor_from_type(self, ind: Kername, nparams: int, ctok: Token, cty: Term) -> CtorDecl:
        """Split `A1 -> .. -> An -> I p1 .. pk` into arg types; check the head."""
        args: list[Term] = []
        names: list[str] = []
        t = cty
        while isinstance(t, Prod):
            args.append(t.ty)
            names.append(t.name if t.name != "_" else f"arg{len(names)}")
            t = t.body
        head, head_args = decompose_app(t)
        if head != Ind(ind):
            self.error(f"constructor {ctok.text} must construct {ind}", ctok)
        if len(head_args) != nparams:
            self.error(f"constructor {ctok.text} must apply {ind} to its {nparams} parameter(s)", ctok)
        for i, a in enumerate(head_args):
            if a != Rel(len(args) + nparams - 1 - i):
                self.error(f"constructor {ctok.text}: parameter {i} must be passed through unchanged", ctok)
        return CtorDecl(ctok.text, tuple(args), tuple(names))

    # -- terms --------------------------------------------------------------

    def parse_binder_group(self, scope: list[str]) -> list[tuple[str, Term]]:
        self.expect("symbol", "(")
        names = []
        while self.at("ident"):
            names.append(self.next().text)
        if not names:
            self.error("expected binder name")
        self.expect("symbol", ":")
        ty = self.parse_term(scope)
        self.expect("symbol", ")")
        # later binders of one group see the earlier ones: lift the shared type
        return [(n, lift(ty, k)) for k, n in enumerate(names)]

    def parse_binders(self, scope: list[str]) -> tuple[list[tuple[str, Term]], list[str]]:
        binders: list[tuple[str, Term]] = []
        inner = list(scope)
        while self.at("symbol", "("):
            for n, ty in self.parse_binder_group(inner):
                binders.append((n, ty))
                inner.append(n)
        return binders, inner

    def parse_term(self, scope: list[str]) -> Term:
        t = self.peek()
        if t.kind == "keyword":
            if t.text == "fun":
                return self.parse_fun(scope)
            if t.text == "forall":
                return self.parse_forall(scope)
            if t.text == "let":
                return self.parse_let(scope)
            if t.text == "match":
                return self.parse_match(scope)
            if t.text == "fix":
                return self.parse_fix(scope)
        return self.parse_arrow(scope)

    def parse_fun(self, scope: list[str]) -> Term:
        self.next()
        binders, inner = self.parse_binders(scope)
        if not binders:
            self.error("fun requires at least one binder")
        self.expect("symbol", "=>")
        body = self.parse_term(inner)
        for n, ty in reversed(binders):
            body = Lambda(n, ty, body)
        return body

    def parse_forall(self, scope: list[str]) -> Term:
        self.next()
        binders, inner = self.parse_binders(scope)
        if not binders:
            self.error("forall requires at least one binder")
        self.expect("symbol", ",")
        body = self.parse_term(inner)
        for n, ty in reversed(binders):
            body = Prod(n, ty, body)
        return body

    def parse_let(self, scope: list[str]) -> Term:
        self.next()
        name = self.expect("ident").text
        self.expect("symbol", ":")
        ty = self.parse_term(scope)
        self.expect("symbol", ":=")
        value = self.parse_term(scope)
        self.expect("keyword", "in")
        body = self.parse_term(scope + [name])
        return LetIn(name, value, ty, body)

    def parse_match(self, scope: list[str]) -> Term:
        tok = self.next()
        disc = self.parse_term(scope)
        ind_name: Optional[Kername] = None
        if self.at("keyword", "in"):
            self.next()
            itok = self.expect("ident")
            kn = self.resolve_type_name(itok)
            ind_name = kn
        self.expect("keyword", "return")
        ret = self.parse_term(scope)
        self.expect("keyword", "with")
        seen: list[tuple[int, CaseBranch]] = []
        if self.at("symbol", "|"):
            self.next()
        while self.at("ident"):
            ctok = self.next()
            cands = self.ctors.get(ctok.text, [])
            if not cands:
                raise UnboundName(ctok.text)
            if len(cands) > 1:
                raise AmbiguousName(ctok.text)
            ind, idx = cands[0]
            if ind_name is None:
                ind_name = ind
            elif ind_name != ind:
                self.error(f"constructor {ctok.text} is not from {ind_name}", ctok)
            pat, inner = self.parse_binders(scope)
            self.expect("symbol", "=>")
            body = self.parse_term(inner if pat else scope)
            arity = len(self.env.inductive(ind).ctors[idx].arg_types)
            if pat:
                if len(pat) != arity:
                    self.error(f"constructor {ctok.text} takes {arity} argument(s),"
                               f" pattern has {len(pat)}", ctok)
                for n, ty in reversed(pat):
                    body = Lambda(n, ty, body)
            seen.append((idx, CaseBranch(arity, body)))
            if self.at("symbol", "|"):
                self.next()
            else:
                break
        self.expect("keyword", "end")
        if ind_name is None:
            self.error("cannot determine the inductive of an empty match;"
                       " write `match t in I return T with end`", tok)
        decl = self.env.inductive(ind_name)
        if len(seen) != len(decl.ctors):
            self.error(f"match on {ind_name} needs {len(decl.ctors)} branch(es), got {len(seen)}", tok)
        for want, (have, _) in enumerate(seen):
            if have != want:
                self.error(f"branches must follow the declaration order of {ind_name}", tok)
        return Case(ind_name, disc, ret, tuple(b for _, b in seen))

    def parse_fix(self, scope: list[str]) -> Term:
        tok = self.next()
        fname = self.expect("ident").text
        binders, inner = self.parse_binders(scope + [fname])
        if not binders:
            self.error("fix requires at least one binder", tok)
        struct_index = 0
        if self.at("symbol", "{"):
            self.next()
            self.expect("keyword", "struct")
            sname = self.expect("ident").text
            names = [n for n, _ in binders]
            if sname not in names:
                self.error(f"struct argument {sname} is not a fix binder", tok)
            struct_index = names.index(sname)
            self.expect("symbol", "}")
        self.expect("symbol", ":")
        ret = self.parse_term(inner)
        self.expect("symbol", ":=")
        body = self.parse_term(inner)
        for n, ty in reversed(binders):
            body = Lambda(n, ty, body)
        # The stored fix type lives in the outer scope; binder types and the
        # return type were parsed with the fix name in scope (where it must
        # not occur), so lower the indices across that slot.
        fty = ret
        for n, ty in reversed(binders):
            fty = Prod(n, ty, fty)
        try:
            fty = _lower(fty, 0)
        except ValueError:
            self.error("fix binder/return types may not mention the fix name", tok)
        return Fix((FixDef(fname, fty, body),), struct_index)

    def parse_arrow(self, scope: list[str]) -> Term:
        lhs = self.parse_app(scope)
        if self.at("symbol", "->"):
            self.next()
            rhs = self.parse_term(scope)
            return Prod("_", lhs, lift(rhs, 1))
        return lhs

    def parse_app(self, scope: list[str]) -> Term:
        head = self.parse_atom(scope)
        while self.at("symbol", "(") or self.at("ident") or \
                (self.peek().kind == "keyword" and self.peek().text in ("Prop", "Type", "Type1")):
            head = App(head, self.parse_atom(scope))
        return head

    def parse_atom(self, scope: list[str]) -> Term:
        t = self.peek()
        if t.kind == "symbol" and t.text == "(":
            self.next()
            inner = self.parse_term(scope)
            self.expect("symbol", ")")
            return inner
        if t.kind == "keyword" and t.text in ("Prop", "Type", "Type1"):
            self.next()
            return {"Prop": PROP, "Type": TYPE0, "Type1": TYPE1}[t.text]
        if t.kind == "ident":
            self.next()
            return self.resolve(t, scope)
        self.error(f"expected a term, found {t.text or 'end of input'!r}")

    # -- name resolution ----------------------------------------------------

    def resolve(self, tok: Token, scope: list[str]) -> Term:
        name = tok.text
        if "." not in name:
            for i, n in enumerate(reversed(scope)):
                if n == name != "_":
                    return Rel(i)
            global_cands = self.by_base.get(name, [])
            ctor_cands = self.ctors.get(name, [])
            if len(global_cands) + len(ctor_cands) > 1:
                raise AmbiguousName(name)
            if global_cands:
                return self.global_ref(global_cands[0])
            if ctor_cands:
                ind, idx = ctor_cands[0]
                return Construct(ind, idx)
            raise UnboundName(name)
        kn = Kername.parse(name)
        if self.env.lookup(kn) is None:
            raise UnboundName(name)
        return self.global_ref(kn)

    def global_ref(self, kn: Kername) -> Term:
        decl = self.env.lookup(kn)
        return Ind(kn) if isinstance(decl, InductiveDecl) else Const(kn)

    def resolve_type_name(self, tok: Token) -> Kername:
        name = tok.text
        kn = Kername.parse(name) if "." in name else None
        if kn is None:
            cands = self.by_base.get(name, [])
            if not cands:
                raise UnboundName(name)
            if len(cands) > 1:
                raise AmbiguousName(name)
            kn = cands[0]
        if not isinstance(self.env.lookup(kn), InductiveDecl):
            self.error(f"{name} is not an inductive", tok)
        return kn


def _lower(t: Term, cutoff: int) -> Term:
    """Decrement free Rels > cutoff; Rel(cutoff) must not occur."""
    match t:
        case Rel(i):
            if i == cutoff:
                raise ValueError("dangling Rel while lowering")
            return Rel(i - 1) if i > cutoff else t
        case Sort() | Const() | Ind() | Construct():
            return t
        case Lambda(n, ty, body):
            return Lambda(n, _lower(ty, cutoff), _lower(body, cutoff + 1))
        case Prod(n, ty, body):
            return Prod(n, _lower(ty, cutoff), _lower(body, cutoff + 1))
        case LetIn(n, v, ty, body):
            return LetIn(n, _lower(v, cutoff), _lower(ty, cutoff), _lower(body, cutoff + 1))
        case App(f, a):
            return App(_lower(f, cutoff), _lower(a, cutoff))
        case Case(ind, disc, ret, brs):
            return Case(ind, _lower(disc, cutoff), _lower(ret, cutoff),
                        tuple(CaseBranch(b.arg_count, _lower(b.body, cutoff)) for b in brs))
        case Fix(defs, si):
            k = len(defs)
            return Fix(tuple(FixDef(d.name, _lower(d.ty, cutoff), _lower(d.body, cutoff + k))
                             for d in defs), si)
    raise TypeError(f"_lower: {t!r}")


def parse_program(src: SourceFile) -> GlobalEnv:
    return Parser(src).parse_program()


def parse_text(text: str, path: str = "<string>") -> GlobalEnv:
    return parse_program(SourceFile(path, text))


# ---------------------------------------------------------------------------
# Printing


def print_core(t: Term, env: Optional[GlobalEnv] = None,
               scope: Optional[list[str]] = None) -> str:
    return _print(t, env, scope or [], 0)


def _fresh(scope: list[str], name: str) -> str:
    if not name:
        name = "_"
    if name == "_" or name not in scope:
        return name
    k = 2
    while f"{name}{k}" in scope:
        k += 1
    return f"{name}{k}"


def _print(t: Term, env, scope: list[str], prec: int) -> str:
    # prec 0: top; 1: arrow operand; 2: application operand
    match t:
        case Sort():
            return str(t)
        case Rel(i):
            if i < len(scope):
                return scope[len(scope) - 1 - i]
            return f"#{i - len(scope)}"
        case Const(kn) | Ind(kn):
            return kn.base
        case Construct(ind, idx):
            decl = env.lookup(ind) if env is not None else None
            return decl.ctors[idx].name if decl is not None else f"{ind}#{idx}"
        case App():
            head, args = decompose_app(t)
            s = " ".join([_print(head, env, scope, 2)] + [_print(a, env, scope, 2) for a in args])
            return f"({s})" if prec >= 2 else s
        case Lambda():
            binders = []
            body = t
            inner = list(scope)
            while isinstance(body, Lambda):
                n = _fresh(inner, body.name)
                binders.append(f"({n} : {_print(body.ty, env, inner, 0)})")
                inner.append(n)
                body = body.body
            s = f"fun {' '.join(binders)} => {_print(body, env, inner, 0)}"
            return f"({s})" if prec >= 1 else s
        case Prod(n, ty, body):
            if not rel_occurs(body, 0):
                lhs = _print(ty, env, scope, 1)
                rhs = _print(body, env, scope + ["_"], 0)
                s = f"{lhs} -> {rhs}"
                return f"({s})" if prec >= 1 else s
            binders = []
            inner = list(scope)
            cur: Term = t
            while isinstance(cur, Prod) and rel_occurs(cur.body, 0):
                nn = _fresh(inner, cur.name if cur.name != "_" else "x")
                binders.append(f"({nn} : {_print(cur.ty, env, inner, 0)})")
                inner.append(nn)
                cur = cur.body
            s = f"forall {' '.join(binders)}, {_print(cur, env, inner, 0)}"
            return f"({s})" if prec >= 1 else s
        case LetIn(n, v, ty, body):
            nn = _fresh(scope, n)
            s = (f"let {nn} : {_print(ty, env, scope, 0)} := {_print(v, env, scope, 0)} "
                 f"in {_print(body, env, scope + [nn], 0)}")
            return f"({s})" if prec >= 1 else s
        case Case(ind, disc, ret, brs):
            parts = [f"match {_print(disc, env, scope, 1)}"]
            if not brs:
                parts.append(f"in {ind.base}")
            parts.append(f"return {_print(ret, env, scope, 1)} with")
            decl = env.lookup(ind) if env is not None else None
            for i, b in enumerate(brs):
                cname = decl.ctors[i].name if decl is not None else f"{ind}#{i}"
                body = b.body
                pats = []
                inner = list(scope)
                k = 0
                while k < b.arg_count and isinstance(body, Lambda):
                    n = _fresh(inner, body.name)
                    pats.append(f"({n} : {_print(body.ty, env, inner, 0)})")
                    inner.append(n)
                    body = body.body
                    k += 1
                if k == b.arg_count:
                    parts.append(f"| {' '.join([cname] + pats)} => {_print(body, env, inner, 0)}")
                else:
                    parts.append(f"| {cname} => {_print(b.body, env, scope, 0)}")
            parts.append("end")
            s = " ".join(parts)
            return f"({s})" if prec >= 1 else s
        case Fix(defs, si):
            d = defs[0]
            inner = list(scope)
            fname = _fresh(inner, d.name)
            inner.append(fname)
            binders = []
            body = d.body
            while isinstance(body, Lambda):
                n = _fresh(inner, body.name)
                binders.append((n, _print(body.ty, env, inner, 0)))
                inner.append(n)
                body = body.body
            btxt = " ".join(f"({n} : {ts})" for n, ts in binders)
            struct = f" {{struct {binders[si][0]}}}" if binders else ""
            prods, ret = decompose_prods(d.ty)
            if len(prods) == len(binders):
                # d.ty is outer-scoped; the printing scope additionally holds
                # the fix name, so shift the return type across that slot
                ret_txt = _print(lift(ret, 1, len(prods)), env, inner, 0)
            else:
                ret_txt = "_"
            s = f"fix {fname} {btxt}{struct} : {ret_txt} := {_print(body, env, inner, 0)}"
            return f"({s})" if prec >= 1 else s
    raise TypeError(f"print: {t!r}")


def print_env(env: GlobalEnv) -> str:
    """Render a whole environment back to surface syntax (single module)."""
    out = []
    mod = ".".join(env.decls[0].name.segments[:-1]) if env.decls else "Top"
    out.append(f"module {mod}")
    out.append("")
    for d in env.decls:
        if isinstance(d, ConstantDecl):
            if d.body is None:
                out.append(f"axiom {d.name.base} : {print_core(d.ty, env)}")
            elif d.ty is not None:
                out.append(f"def {d.name.base} : {print_core(d.ty, env)} := {print_core(d.body, env)}")
            else:
                out.append(f"def {d.name.base} := {print_core(d.body, env)}")
        else:
            pscope: list[str] = []
            ptxt = []
            for n, ty in d.params:
                ptxt.append(f"({n} : {_print(ty, env, pscope, 0)})")
                pscope.append(n)
            params = (" " + " ".join(ptxt)) if ptxt else ""
            head = f"inductive {d.name.base}{params} : {_print(d.arity, env, pscope, 0)} :="
            ctor_txts = []
            for c in d.ctors:
                cty = _ctor_type(d, c)
                ctor_txts.append(f"{c.name} : {_print(cty, env, pscope, 0)}")
            out.append(head + ((" " + " | ".join(ctor_txts)) if ctor_txts else ""))
        out.append("")
    return "\n".join(out).rstrip() + "\n"


def _ctor_type(d: InductiveDecl, c: CtorDecl) -> Term:
    """Rebuild `forall (x1 : A1) .., I p1 .. pk` from stored arg types."""
    from .core import mk_app
    n = len(c.arg_types)
    head = mk_app(Ind(d.name),
                  [Rel(n + len(d.params) - 1 - i) for i in range(len(d.params))])
    t: Term = head
    for name, a in zip(reversed(c.arg_names), reversed(c.arg_types)):
        t = Prod(name, a, t)
    return t
