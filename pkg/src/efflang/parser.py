"""Recursive-descent parser for ``.eff`` programs.

The parser produces core AST nodes plus the surface (sugar) nodes defined
here; ``efflang.desugar`` eliminates the sugar.  Errors carry a source span
and the set of token kinds that would have been accepted.

Grammar sketch (values / computations are separate sorts):

    decl  ::= base x = { a, b }            -- finite base type
            | arity base x = { a, b }      -- usable in operation arities
            | type x = A                   -- alias; registers sum labels
            | fun f : s -> s { V -> W, … } -- function symbol (+ opt. table)
            | op o : s ~> s                -- operation (param ~> arity)
            | theory t { eq [G | Z] T == T (when V)?  … }
            | handler h (x : A, …)? : C = { clauses }
            | def d (: C)? = M  |  main = M
            | use t                        -- splice a builtin theory bundle
            | interpret nat = n            -- carrier size for nat

    M ::= do x (: A)? <- M in M | fun x : A -> M | rec x : U C. M
        | let x (: A)? = V in M | if V then M else M
        | handle M with H (to x (: A)? . M)?
        | match V with { (x, y) -> M }  |  match V with { l(x) -> M | … }
        | M ; M | C-atom V*                (application)
    C-atom ::= return V | force V | gen o | o!(V)(x (: s)?. M) | o!(V)(M, …)
             | #k(V) | prj l C-atom | < l = M, … > | ( M (: C)? ) | d

    V ::= infix over + - < <= == != and or not
        | x | 5 | f(V, …) | 'l(V) | () | (V, V, …) | thunk C-atom
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .ast import (
    App, ArrowT, Ascribe, Base, CompTerm, CompTuple, ContCall, FreeT, FunApp,
    Inj, Lam, MatchPair, MatchSum, NatLit, OpApp, Pair, ProdCT, ProdT, Proj,
    Return, Span, SumT, ThunkT, ThunkV, UnitT, UnitV, ValueTerm, ValueType,
    Var, CompType, SignatureType, numeric_sum, Fix, Force, Do,
)
from .lexer import LexError, Token, line_col, tokenize


def _span_field():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Surface-only nodes, eliminated by desugaring
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SName:
    """Bare identifier in value position: variable, enum element, or label."""

    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SNameApp:
    """``name(V, …)``: function application or labelled injection."""

    name: str
    args: tuple[ValueTerm, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class STupleV:
    items: tuple[ValueTerm, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SLet:
    var: str
    annot: Optional[ValueType]
    value: ValueTerm
    body: CompTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SIf:
    cond: ValueTerm
    then: CompTerm
    els: CompTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SSeq:
    first: CompTerm
    second: CompTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SFinOp:
    """``op!(V)(M1, …, Mn)``: finitary application, incl. the nullary case."""

    op: str
    param: ValueTerm
    conts: tuple[CompTerm, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SGen:
    """``gen op``: the generic effect  fun x -> op!(x)(y. return y)."""

    op: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SNamed:
    """Reference to a top-level ``def``; inlined during desugaring."""

    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SurfaceClause:
    op: str
    params: tuple[tuple[str, Optional[SignatureType]], ...]
    konts: tuple[tuple[str, Optional[tuple[SignatureType, CompType]]], ...]
    body: CompTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SurfaceHandler:
    clauses: tuple[SurfaceClause, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SHandlerRef:
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class SHandle:
    """``handle M with H (to x. N)?`` before handler resolution/completion."""

    body: CompTerm
    handler: Union[SurfaceHandler, SHandlerRef]
    var: Optional[str]
    annot: Optional[ValueType]
    cont: Optional[CompTerm]
    span: Optional[Span] = _span_field()


# ---------------------------------------------------------------------------
# Raw declarations
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class DBase:
    name: str
    elements: tuple[str, ...]
    arity: bool
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DAlias:
    name: str
    ty: ValueType
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DFun:
    name: str
    arg: SignatureType
    res: SignatureType
    table: Optional[tuple[tuple[ValueTerm, ValueTerm], ...]]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DOp:
    name: str
    param: SignatureType
    arity: SignatureType
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DEquation:
    vctx: tuple[tuple[str, ValueType], ...]
    zctx: tuple[tuple[str, ValueType], ...]
    lhs: CompTerm
    rhs: CompTerm
    side: Optional[ValueTerm]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DTheory:
    name: str
    equations: tuple[DEquation, ...]
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DHandler:
    name: str
    params: tuple[tuple[str, ValueType], ...]
    at_type: CompType
    handler: SurfaceHandler
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DDef:
    name: str
    at_type: Optional[CompType]
    comp: CompTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DMain:
    comp: CompTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DUse:
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class DInterpret:
    nat_size: int
    span: Optional[Span] = _span_field()


Decl = Union[DBase, DAlias, DFun, DOp, DTheory, DHandler, DDef, DMain, DUse, DInterpret]


@dataclass
class RawProgram:
    filename: str
    source: str
    decls: list[Decl]


class ParseError(Exception):
    def __init__(self, message: str, span: Span, expected: frozenset[str] = frozenset()):
        super().__init__(message)
        self.message = message
        self.span = span
        self.expected = expected

    def render(self, source: str) -> str:
        line, col = line_col(source, self.span.start)
        msg = f"{self.span.file}:{line}:{col}: {self.message}"
        if self.expected:
            msg += " (expected " + ", ".join(sorted(self.expected)) + ")"
        return msg


# ---------------------------------------------------------------------------
# Parser proper
# ---------------------------------------------------------------------------


class _Parser:
    def __init__(self, toks: list[Token], source: str):
        self.toks = toks
        self.pos = 0
        self.source = source

    # -- token plumbing ----------------------------------------------------

    def peek(self, ahead: int = 0) -> Token:
        return self.toks[min(self.pos + ahead, len(self.toks) - 1)]

    def at(self, *kinds: str) -> bool:
        return self.peek().kind in kinds

    def advance(self) -> Token:
        tok = self.toks[self.pos]
        if tok.kind != "eof":
            self.pos += 1
        return tok

    def expect(self, kind: str) -> Token:
        tok = self.peek()
        if tok.kind != kind:
            raise ParseError(f"unexpected {tok.kind or 'end of input'} {tok.text!r}",
                             tok.span, frozenset({kind}))
        return self.advance()

    def mark(self) -> int:
        return self.pos

    def reset(self, mark: int):
        self.pos = mark

    def span_from(self, start: int) -> Span:
        first = self.toks[start].span
        last = self.toks[max(start, self.pos - 1)].span
        return Span(first.file, first.start, last.end)

    def ident(self) -> str:
        return self.expect("ident").text

    # -- types -------------------------------------------------------------

    def vtype(self) -> ValueType:
        t = self.vtype_atom()
        while self.at("*"):
            self.advance()
            t = ProdT(t, self.vtype_atom())
        return t

    def vtype_atom(self) -> ValueType:
        tok = self.peek()
        if tok.kind == "ident":
            self.advance()
            return Base(tok.text)
        if tok.kind == "int":
            self.advance()
            n = int(tok.text)
            if n == 1:
                return UnitT()
            return numeric_sum(n)
        if tok.kind == "[":
            self.advance()
            cases = []
            while not self.at("]"):
                label = self.label_token()
                if self.at(":"):
                    self.advance()
                    cases.append((label, self.vtype()))
                else:
                    cases.append((label, UnitT()))
                if not self.at("]"):
                    self.expect(",")
            self.expect("]")
            return SumT(tuple(cases))
        if tok.kind == "U":
            self.advance()
            return ThunkT(self.ctype_atom())
        if tok.kind == "(":
            self.advance()
            t = self.vtype()
            self.expect(")")
            return t
        raise ParseError(f"expected a value type, found {tok.text!r}", tok.span,
                         frozenset({"ident", "int", "[", "U", "("}))

    def label_token(self) -> str:
        tok = self.peek()
        if tok.kind in ("ident", "int"):
            self.advance()
            return tok.text
        raise ParseError(f"expected a label, found {tok.text!r}", tok.span,
                         frozenset({"ident", "int"}))

    def ctype(self) -> CompType:
        if self.at("F", "<"):
            return self.ctype_atom()
        if self.at("("):
            mark = self.mark()
            try:
                arg = self.vtype()
                self.expect("->")
            except ParseError:
                self.reset(mark)
                self.advance()
                t = self.ctype()
                self.expect(")")
                return t
            return ArrowT(arg, self.ctype())
        arg = self.vtype()
        self.expect("->")
        return ArrowT(arg, self.ctype())

    def ctype_atom(self) -> CompType:
        tok = self.peek()
        if tok.kind == "F":
            self.advance()
            return FreeT(self.vtype_atom())
        if tok.kind == "<":
            self.advance()
            cases = []
            while not self.at(">"):
                label = self.label_token()
                self.expect(":")
                cases.append((label, self.ctype()))
                if not self.at(">"):
                    self.expect(",")
            self.expect(">")
            return ProdCT(tuple(cases))
        if tok.kind == "(":
            self.advance()
            t = self.ctype()
            self.expect(")")
            return t
        raise ParseError(f"expected a computation type, found {tok.text!r}", tok.span,
                         frozenset({"F", "<", "("}))

    # -- values ------------------------------------------------------------

    def value(self) -> ValueTerm:
        start = self.mark()
        t = self.value_and()
        while self.at("or"):
            self.advance()
            t = FunApp_("or", t, self.value_and(), self.span_from(start))
        return t

    def value_and(self) -> ValueTerm:
        start = self.mark()
        t = self.value_cmp()
        while self.at("and"):
            self.advance()
            t = FunApp_("and", t, self.value_cmp(), self.span_from(start))
        return t

    def value_cmp(self) -> ValueTerm:
        start = self.mark()
        t = self.value_add()
        if self.at("==", "!=", "<", "<="):
            op = self.advance().kind
            t = FunApp_(op, t, self.value_add(), self.span_from(start))
        return t

    def value_add(self) -> ValueTerm:
        start = self.mark()
        t = self.value_atom()
        while self.at("+", "-"):
            op = self.advance().kind
            t = FunApp_(op, t, self.value_atom(), self.span_from(start))
        return t

    def value_atom(self) -> ValueTerm:
        tok = self.peek()
        start = self.mark()
        if tok.kind == "not":
            self.advance()
            return FunApp("not", self.value_atom(), span=self.span_from(start))
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                self.advance()
                args = []
                while not self.at(")"):
                    args.append(self.value())
                    if not self.at(")"):
                        self.expect(",")
                self.expect(")")
                return SNameApp(tok.text, tuple(args), span=self.span_from(start))
            return SName(tok.text, span=tok.span)
        if tok.kind == "int":
            self.advance()
            return NatLit(int(tok.text), span=tok.span)
        if tok.kind == "'":
            self.advance()
            label = self.label_token()
            payload: ValueTerm = UnitV()
            if self.at("("):
                self.advance()
                if not self.at(")"):
                    payload = self.value()
                self.expect(")")
            return Inj(label, payload, span=self.span_from(start))
        if tok.kind == "(":
            self.advance()
            if self.at(")"):
                self.advance()
                return UnitV(span=self.span_from(start))
            items = [self.value()]
            while self.at(","):
                self.advance()
                items.append(self.value())
            self.expect(")")
            if len(items) == 1:
                return items[0]
            return STupleV(tuple(items), span=self.span_from(start))
        if tok.kind == "thunk":
            self.advance()
            return ThunkV(self.comp_atom(), span=self.span_from(start))
        raise ParseError(f"expected a value, found {tok.text!r}", tok.span,
                         frozenset({"ident", "int", "'", "(", "thunk", "not"}))

    # -- computations --------------------------------------------------------

    def comp(self) -> CompTerm:
        tok = self.peek()
        start = self.mark()
        if tok.kind == "do":
            self.advance()
            var = self.ident()
            annot = None
            if self.at(":"):
                self.advance()
                annot = self.vtype()
            self.expect("<-")
            bound = self.comp()
            self.expect("in")
            body = self.comp()
            return Do(var, annot, bound, body, span=self.span_from(start))
        if tok.kind == "fun":
            self.advance()
            var = self.ident()
            self.expect(":")
            annot = self.vtype()
            self.expect("->")
            return Lam(var, annot, self.comp(), span=self.span_from(start))
        if tok.kind == "rec":
            self.advance()
            var = self.ident()
            self.expect(":")
            annot = self.vtype()
            if not isinstance(annot, ThunkT):
                raise ParseError("rec binder must have a thunk type U C", tok.span)
            self.expect(".")
            return Fix(var, annot, self.comp(), span=self.span_from(start))
        if tok.kind == "let":
            self.advance()
            var = self.ident()
            annot = None
            if self.at(":"):
                self.advance()
                annot = self.vtype()
            self.expect("=")
            value = self.value()
            self.expect("in")
            return SLet(var, annot, value, self.comp(), span=self.span_from(start))
        if tok.kind == "if":
            self.advance()
            cond = self.value()
            self.expect("then")
            then = self.comp()
            self.expect("else")
            els = self.comp()
            return SIf(cond, then, els, span=self.span_from(start))
        if tok.kind == "handle":
            self.advance()
            body = self.comp()
            self.expect("with")
            handler = self.handler_expr()
            var = annot = cont = None
            if self.at("to"):
                self.advance()
                var = self.ident()
                if self.at(":"):
                    self.advance()
                    annot = self.vtype()
                self.expect(".")
                cont = self.comp()
            return SHandle(body, handler, var, annot, cont, span=self.span_from(start))
        if tok.kind == "match":
            return self.match_comp()
        first = self.comp_app()
        if self.at(";"):
            self.advance()
            return SSeq(first, self.comp(), span=self.span_from(start))
        return first

    def match_comp(self) -> CompTerm:
        start = self.mark()
        self.expect("match")
        scrut = self.value()
        self.expect("with")
        self.expect("{")
        if self.at("("):  # pair elimination
            self.advance()
            x = self.ident()
            self.expect(",")
            y = self.ident()
            if x == y:
                raise ParseError(f"duplicate variable {x!r} in pair pattern",
                                 self.peek().span)
            self.expect(")")
            self.expect("->")
            body = self.comp()
            self.expect("}")
            node: CompTerm = MatchPair(scrut, x, y, body, span=self.span_from(start))
        else:
            clauses = []
            while not self.at("}"):
                label = self.label_token()
                var = None
                if self.at("("):
                    self.advance()
                    if not self.at(")"):
                        var = self.ident()
                    self.expect(")")
                self.expect("->")
                body = self.comp()
                clauses.append((label, var if var is not None else "_unused", body))
                if not self.at("}"):
                    self.expect("|")
            self.expect("}")
            node = MatchSum(scrut, tuple(clauses), span=self.span_from(start))
        if self.at(":"):
            self.advance()
            node = Ascribe(node, self.ctype(), span=self.span_from(start))
        return node

    def comp_app(self) -> CompTerm:
        start = self.mark()
        if self.at("return"):
            self.advance()
            return Return(self.value(), span=self.span_from(start))
        head = self.comp_atom()
        while self.at("ident", "int", "'", "(", "thunk"):
            # an application argument must be a value atom
            if self.at("ident") and self.peek(1).kind in ("!",):
                break
            head = App_(head, self.value_atom(), self.span_from(start))
        return head

    def comp_atom(self) -> CompTerm:
        tok = self.peek()
        start = self.mark()
        if tok.kind == "force":
            self.advance()
            return Force(self.value_atom(), span=self.span_from(start))
        if tok.kind == "gen":
            self.advance()
            return SGen(self.ident(), span=self.span_from(start))
        if tok.kind == "prj":
            self.advance()
            label = self.label_token()
            return Proj(self.comp_atom(), label, span=self.span_from(start))
        if tok.kind == "#":
            self.advance()
            k = self.ident()
            self.expect("(")
            arg: ValueTerm = UnitV()
            if not self.at(")"):
                arg = self.value()
            self.expect(")")
            return ContCall(k, arg, span=self.span_from(start))
        if tok.kind == "<":
            self.advance()
            cases = []
            while not self.at(">"):
                label = self.label_token()
                self.expect("=")
                cases.append((label, self.comp()))
                if not self.at(">"):
                    self.expect(",")
            self.expect(">")
            return CompTuple(tuple(cases), span=self.span_from(start))
        if tok.kind == "(":
            self.advance()
            m = self.comp()
            if self.at(":"):
                self.advance()
                m = Ascribe(m, self.ctype(), span=self.span_from(start))
                self.expect(")")
                return m
            self.expect(")")
            return m
        if tok.kind == "ident":
            if self.peek(1).kind == "!":
                return self.op_app()
            self.advance()
            return SNamed(tok.text, span=tok.span)
        raise ParseError(f"expected a computation, found {tok.text!r}", tok.span,
                         frozenset({"return", "force", "gen", "prj", "#", "<",
                                    "(", "ident", "do", "fun", "rec", "let",
                                    "if", "handle", "match"}))

    def op_app(self) -> CompTerm:
        start = self.mark()
        op = self.ident()
        self.expect("!")
        self.expect("(")
        param: ValueTerm = UnitV()
        if not self.at(")"):
            param = self.value()
        self.expect(")")
        self.expect("(")
        # binder form: IDENT followed by '.' or ':'
        if self.at("ident") and self.peek(1).kind in (".", ":"):
            var = self.ident()
            annot = None
            if self.at(":"):
                self.advance()
                annot = self.vtype()
            self.expect(".")
            body = self.comp()
            self.expect(")")
            return OpApp(op, param, var, annot, body, span=self.span_from(start))
        conts = []
        while not self.at(")"):
            conts.append(self.comp())
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        return SFinOp(op, param, tuple(conts), span=self.span_from(start))

    # -- handlers ------------------------------------------------------------

    def handler_expr(self) -> Union[SurfaceHandler, SHandlerRef]:
        if self.at("ident"):
            tok = self.advance()
            return SHandlerRef(tok.text, span=tok.span)
        return self.handler_literal()

    def handler_literal(self) -> SurfaceHandler:
        start = self.mark()
        self.expect("{")
        clauses = []
        while not self.at("}"):
            clauses.append(self.handler_clause())
            if not self.at("}"):
                self.expect("|")
        self.expect("}")
        return SurfaceHandler(tuple(clauses), span=self.span_from(start))

    def handler_clause(self) -> SurfaceClause:
        start = self.mark()
        op = self.ident()
        self.expect("!")
        self.expect("(")
        params = []
        while not self.at(")"):
            name = self.ident()
            annot = None
            if self.at(":"):
                self.advance()
                annot = self.vtype()
            params.append((name, annot))
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        self.expect("(")
        konts = []
        while not self.at(")"):
            name = self.ident()
            annot = None
            if self.at(":"):
                self.advance()
                arg = self.vtype()
                self.expect("=>")
                annot = (arg, self.ctype())
            konts.append((name, annot))
            if not self.at(")"):
                self.expect(",")
        self.expect(")")
        self.expect("->")
        body = self.comp()
        return SurfaceClause(op, tuple(params), tuple(konts), body,
                             span=self.span_from(start))

    # -- declarations ----------------------------------------------------

    def program(self) -> list[Decl]:
        decls = []
        while not self.at("eof"):
            decls.append(self.decl())
        return decls

    def decl(self) -> Decl:
        tok = self.peek()
        start = self.mark()
        if tok.kind in ("base", "arity"):
            arity = tok.kind == "arity"
            self.advance()
            if arity:
                self.expect("base")
            name = self.ident()
            self.expect("=")
            self.expect("{")
            elems = [self.ident()]
            while self.at(","):
                self.advance()
                elems.append(self.ident())
            self.expect("}")
            return DBase(name, tuple(elems), arity, span=self.span_from(start))
        if tok.kind == "type":
            self.advance()
            name = self.ident()
            self.expect("=")
            return DAlias(name, self.vtype(), span=self.span_from(start))
        if tok.kind == "fun":
            self.advance()
            name = self.ident()
            self.expect(":")
            arg = self.vtype()
            self.expect("->")
            res = self.vtype()
            table = None
            if self.at("{"):
                self.advance()
                entries = []
                while not self.at("}"):
                    key = self.value()
                    self.expect("->")
                    entries.append((key, self.value()))
                    if not self.at("}"):
                        self.expect(",")
                self.expect("}")
                table = tuple(entries)
            return DFun(name, arg, res, table, span=self.span_from(start))
        if tok.kind == "op":
            self.advance()
            name = self.ident()
            self.expect(":")
            param: SignatureType = UnitT()
            if not self.at("~>"):
                param = self.vtype()
            self.expect("~>")
            arity = self.vtype()
            return DOp(name, param, arity, span=self.span_from(start))
        if tok.kind == "theory":
            self.advance()
            name = self.ident()
            self.expect("{")
            eqs = []
            while not self.at("}"):
                eqs.append(self.equation())
            self.expect("}")
            return DTheory(name, tuple(eqs), span=self.span_from(start))
        if tok.kind == "handler":
            self.advance()
            name = self.ident()
            params = []
            if self.at("("):
                self.advance()
                while not self.at(")"):
                    pname = self.ident()
                    self.expect(":")
                    params.append((pname, self.vtype()))
                    if not self.at(")"):
                        self.expect(",")
                self.expect(")")
            self.expect(":")
            at_type = self.ctype()
            self.expect("=")
            handler = self.handler_literal()
            return DHandler(name, tuple(params), at_type, handler,
                            span=self.span_from(start))
        if tok.kind == "def":
            self.advance()
            name = self.ident()
            at_type = None
            if self.at(":"):
                self.advance()
                at_type = self.ctype()
            self.expect("=")
            return DDef(name, at_type, self.comp(), span=self.span_from(start))
        if tok.kind == "main":
            self.advance()
            self.expect("=")
            return DMain(self.comp(), span=self.span_from(start))
        if tok.kind == "use":
            self.advance()
            return DUse(self.ident(), span=self.span_from(start))
        if tok.kind == "interpret":
            self.advance()
            nat = self.ident()
            if nat != "nat":
                raise ParseError("only 'interpret nat = N' is supported", tok.span)
            self.expect("=")
            size = int(self.expect("int").text)
            return DInterpret(size, span=self.span_from(start))
        raise ParseError(f"expected a declaration, found {tok.text!r}", tok.span,
                         frozenset({"base", "arity", "type", "fun", "op", "theory",
                                    "handler", "def", "main", "use", "interpret"}))

    def equation(self) -> DEquation:
        start = self.mark()
        self.expect("eq")
        vctx: list[tuple[str, ValueType]] = []
        zctx: list[tuple[str, ValueType]] = []
        if self.at("["):
            self.advance()
            while not self.at("|"):
                name = self.ident()
                self.expect(":")
                vctx.append((name, self.vtype()))
                if not self.at("|"):
                    self.expect(",")
            self.expect("|")
            while not self.at("]"):
                name = self.ident()
                self.expect(":")
                zctx.append((name, self.vtype()))
                if not self.at("]"):
                    self.expect(",")
            self.expect("]")
        lhs = self.comp()
        self.expect("==")
        rhs = self.comp()
        side = None
        if self.at("when"):
            self.advance()
            side = self.value()
        return DEquation(tuple(vctx), tuple(zctx), lhs, rhs, side,
                         span=self.span_from(start))


def FunApp_(name: str, a: ValueTerm, b: ValueTerm, span: Span) -> ValueTerm:
    return FunApp(name, Pair(a, b), span=span)


def App_(head: CompTerm, arg: ValueTerm, span: Span) -> CompTerm:
    return App(head, arg, span=span)


# ---------------------------------------------------------------------------
# Entry points
# ---------------------------------------------------------------------------


def parse_program(src: str, filename: str = "<input>") -> RawProgram:
    try:
        toks = tokenize(src, filename)
    except LexError as e:
        raise ParseError(e.message, e.span) from None
    p = _Parser(toks, src)
    decls = p.program()
    return RawProgram(filename, src, decls)


def parse_computation(src: str, filename: str = "<input>") -> CompTerm:
    toks = tokenize(src, filename)
    p = _Parser(toks, src)
    m = p.comp()
    p.expect("eof")
    return m


def parse_value(src: str, filename: str = "<input>") -> ValueTerm:
    toks = tokenize(src, filename)
    p = _Parser(toks, src)
    v = p.value()
    p.expect("eof")
    return v
