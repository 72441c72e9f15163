"""Name resolution and sugar elimination.

Turns a parsed program into a ``ProgramEnv``: a signature, effect theories,
named handlers (completed), named computations, and the optional main
computation, with every term in core form.  ``desugar_comp`` is idempotent on
core terms.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from .ast import (
    App, Ascribe, Base, BaseInfo, BOOL, BUILTIN_FUNS, CompTerm, CompTuple,
    ContCall, Do, EnumConst, Fix, Force, FreeT, FunApp, Handle, Handler,
    HandlerClause, Inj, Lam, MatchPair, MatchSum, NatLit, OpApp, Pair, ProdCT,
    ProdT, Proj, Return, Signature, SumT, ThunkT, ThunkV, UnitT, UnitV,
    ValueTerm, ValueType, CompType, SignatureType, Var, numeric_sum,
)
from .errors import StaticError
from .parser import (
    DAlias, DBase, DDef, DEquation, DFun, DHandler, DInterpret, DMain, DOp,
    DTheory, DUse, RawProgram, SFinOp, SGen, SHandle, SHandlerRef, SIf, SLet,
    SName, SNameApp, SNamed, SSeq, STupleV, SurfaceClause, SurfaceHandler,
    parse_program,
)
from .subst import fresh, free_vars, subst_continuation, subst_value
from . import theories as theories_mod


@dataclass
class HandlerDef:
    """A named handler: declared parameters, the computation type it targets,
    and the completed core handler term."""

    name: str
    params: tuple[tuple[str, ValueType], ...]
    at_type: CompType
    handler: Handler


@dataclass
class ProgramEnv:
    """Everything a checker, interpreter, or verifier needs about a program."""

    signature: Signature = field(default_factory=Signature)
    aliases: dict[str, ValueType] = field(default_factory=dict)
    labels: dict[str, SumT] = field(default_factory=dict)
    enum_elems: dict[str, str] = field(default_factory=dict)
    fun_tables: dict[str, tuple[tuple[ValueTerm, ValueTerm], ...]] = field(default_factory=dict)
    theories: dict[str, "theories_mod.EffectTheory"] = field(default_factory=dict)
    handlers: dict[str, HandlerDef] = field(default_factory=dict)
    defs: dict[str, tuple[CompTerm, Optional[CompType]]] = field(default_factory=dict)
    main: Optional[CompTerm] = None
    nat_size: Optional[int] = None
    filename: str = "<input>"
    source: str = ""

    def __post_init__(self):
        self.aliases.setdefault("bool", BOOL)
        self.labels.setdefault("true", BOOL)
        self.labels.setdefault("false", BOOL)


# ---------------------------------------------------------------------------
# Type resolution (alias expansion)
# ---------------------------------------------------------------------------


def resolve_vtype(env: ProgramEnv, t: ValueType, span=None) -> ValueType:
    match t:
        case Base(name):
            if name in env.aliases:
                return env.aliases[name]
            if name in env.signature.bases:
                return t
            raise StaticError(f"unknown type name {name!r}", span)
        case UnitT():
            return t
        case ProdT(a, b):
            return ProdT(resolve_vtype(env, a, span), resolve_vtype(env, b, span))
        case SumT(cases):
            return SumT(tuple((l, resolve_vtype(env, x, span)) for l, x in cases))
        case ThunkT(c):
            return ThunkT(resolve_ctype(env, c, span))
    raise StaticError(f"bad type {t!r}", span)


def resolve_ctype(env: ProgramEnv, t: CompType, span=None) -> CompType:
    match t:
        case FreeT(a):
            return FreeT(resolve_vtype(env, a, span))
        case ProdCT(cases):
            return ProdCT(tuple((l, resolve_ctype(env, c, span)) for l, c in cases))
        case _:
            from .ast import ArrowT
            if isinstance(t, ArrowT):
                return ArrowT(resolve_vtype(env, t.arg, span), resolve_ctype(env, t.res, span))
    raise StaticError(f"bad computation type {t!r}", span)


def resolve_stype(env: ProgramEnv, t: ValueType, span=None) -> SignatureType:
    from .ast import is_signature_type
    rt = resolve_vtype(env, t, span)
    if not is_signature_type(rt):
        raise StaticError("expected a signature type (no thunks)", span)
    return rt


# ---------------------------------------------------------------------------
# Term desugaring
# ---------------------------------------------------------------------------


def desugar_value(env: ProgramEnv, v: ValueTerm, scope: frozenset[str]) -> ValueTerm:
    match v:
        case SName(name, span=sp):
            if name in scope:
                return Var(name, span=sp)
            if name in env.enum_elems:
                return EnumConst(env.enum_elems[name], name, span=sp)
            if name in env.labels:
                return Inj(name, UnitV(), span=sp)
            raise StaticError(f"unbound name {name!r}", sp)
        case SNameApp(name, args, span=sp):
            rargs = tuple(desugar_value(env, a, scope) for a in args)
            if name in env.signature.funs or name in BUILTIN_FUNS:
                if not rargs:
                    arg: ValueTerm = UnitV(span=sp)
                else:
                    arg = rargs[0]
                    for a in rargs[1:]:
                        arg = Pair(arg, a)
                return FunApp(name, arg, span=sp)
            if name in env.labels:
                if len(rargs) > 1:
                    raise StaticError(f"label {name!r} takes at most one payload", sp)
                payload = rargs[0] if rargs else UnitV(span=sp)
                return Inj(name, payload, span=sp)
            raise StaticError(f"unknown function or label {name!r}", sp)
        case STupleV(items, span=sp):
            ritems = [desugar_value(env, a, scope) for a in items]
            out = ritems[0]
            for a in ritems[1:]:
                out = Pair(out, a, span=sp)
            return out
        case Var(name, span=sp):
            if name not in scope:
                # core input (idempotence): leave known-free names to typing
                return v
            return v
        case NatLit() | EnumConst() | UnitV():
            return v
        case FunApp(f, arg, span=sp):
            return FunApp(f, desugar_value(env, arg, scope), span=sp)
        case Pair(a, b, span=sp):
            return Pair(desugar_value(env, a, scope), desugar_value(env, b, scope), span=sp)
        case Inj(l, p, span=sp):
            return Inj(l, desugar_value(env, p, scope), span=sp)
        case ThunkV(m, span=sp):
            return ThunkV(desugar_comp(env, m, scope), span=sp)
    raise StaticError(f"cannot desugar value {v!r}", getattr(v, "span", None))


def desugar_comp(env: ProgramEnv, m: CompTerm, scope: frozenset[str] = frozenset()) -> CompTerm:
    match m:
        case SLet(x, annot, value, body, span=sp):
            rv = desugar_value(env, value, scope)
            rbody = desugar_comp(env, body, scope | {x})
            if annot is not None:
                return App(Lam(x, resolve_vtype(env, annot, sp), rbody, span=sp), rv, span=sp)
            return subst_value(rbody, x, rv)
        case SIf(c, t, e, span=sp):
            rc = desugar_value(env, c, scope)
            return MatchSum(rc, (("true", fresh("w"), desugar_comp(env, t, scope)),
                                 ("false", fresh("w"), desugar_comp(env, e, scope))),
                            span=sp)
        case SSeq(a, b, span=sp):
            return Do(fresh("u"), None, desugar_comp(env, a, scope),
                      desugar_comp(env, b, scope), span=sp)
        case SFinOp(op, param, conts, span=sp):
            if op not in env.signature.ops:
                raise StaticError(f"unknown operation {op!r}", sp)
            _, arity = env.signature.ops[op]
            rp = desugar_value(env, param, scope)
            n = len(conts)
            if n == 0:
                if arity != SumT(()):
                    raise StaticError(
                        f"{op} has arity {arity}, not 0: supply a continuation", sp)
                x = fresh("e")
                return OpApp(op, rp, x, arity, MatchSum(Var(x), ()), span=sp)
            if n == 1 and arity == UnitT():
                return OpApp(op, rp, fresh("u"), arity,
                             desugar_comp(env, conts[0], scope), span=sp)
            if arity != numeric_sum(n):
                raise StaticError(
                    f"{op} expects arity {arity}; got {n} branch(es)", sp)
            x = fresh("c")
            clauses = tuple((str(i + 1), fresh("w"), desugar_comp(env, c, scope))
                            for i, c in enumerate(conts))
            return OpApp(op, rp, x, arity, MatchSum(Var(x), clauses), span=sp)
        case SGen(op, span=sp):
            if op not in env.signature.ops:
                raise StaticError(f"unknown operation {op!r}", sp)
            param_t, arity_t = env.signature.ops[op]
            x, y = fresh("x"), fresh("y")
            return Lam(x, param_t,
                       OpApp(op, Var(x), y, arity_t, Return(Var(y)), span=sp), span=sp)
        case SNamed(name, span=sp):
            if name not in env.defs:
                raise StaticError(
                    f"unknown computation {name!r} (did you mean 'force {name}'?)", sp)
            body, at = env.defs[name]
            return Ascribe(body, at, span=sp) if at is not None else body
        case SHandle(body, hexpr, var, annot, cont, span=sp):
            rbody = desugar_comp(env, body, scope)
            rh = resolve_handler_expr(env, hexpr, scope)
            if var is None:
                var = fresh("x")
                rcont: CompTerm = Return(Var(var), span=sp)
            else:
                rcont = desugar_comp(env, cont, scope | {var})
            rann = resolve_vtype(env, annot, sp) if annot is not None else None
            return Handle(rbody, rh, var, rann, rcont, span=sp)
        case MatchPair(s, x, y, body, span=sp):
            return MatchPair(desugar_value(env, s, scope), x, y,
                             desugar_comp(env, body, scope | {x, y}), span=sp)
        case MatchSum(s, clauses, span=sp):
            rs = desugar_value(env, s, scope)
            rcl = tuple((l, x, desugar_comp(env, b, scope | {x})) for l, x, b in clauses)
            return MatchSum(rs, rcl, span=sp)
        case Force(v, span=sp):
            return Force(desugar_value(env, v, scope), span=sp)
        case Return(v, span=sp):
            return Return(desugar_value(env, v, scope), span=sp)
        case Do(x, annot, bound, body, span=sp):
            rann = resolve_vtype(env, annot, sp) if annot is not None else None
            return Do(x, rann, desugar_comp(env, bound, scope),
                      desugar_comp(env, body, scope | {x}), span=sp)
        case CompTuple(cases, span=sp):
            return CompTuple(tuple((l, desugar_comp(env, c, scope)) for l, c in cases), span=sp)
        case Proj(sub, l, span=sp):
            return Proj(desugar_comp(env, sub, scope), l, span=sp)
        case Lam(x, annot, body, span=sp):
            return Lam(x, resolve_vtype(env, annot, sp),
                       desugar_comp(env, body, scope | {x}), span=sp)
        case App(f, a, span=sp):
            return App(desugar_comp(env, f, scope), desugar_value(env, a, scope), span=sp)
        case OpApp(op, p, x, annot, body, span=sp):
            if op not in env.signature.ops:
                raise StaticError(f"unknown operation {op!r}", sp)
            arity = env.signature.ops[op][1]
            if annot is not None:
                declared = resolve_stype(env, annot, sp)
                if declared != arity:
                    raise StaticError(
                        f"{op} binder annotated {declared}, but its arity is {arity}", sp)
            return OpApp(op, desugar_value(env, p, scope), x, arity,
                         desugar_comp(env, body, scope | {x}), span=sp)
        case ContCall(k, a, span=sp):
            return ContCall(k, desugar_value(env, a, scope), span=sp)
        case Handle(body, h, x, annot, cont, span=sp):
            rann = resolve_vtype(env, annot, sp) if annot is not None else None
            return Handle(desugar_comp(env, body, scope),
                          desugar_handler(env, h, scope), x, rann,
                          desugar_comp(env, cont, scope | {x}), span=sp)
        case Fix(x, annot, body, span=sp):
            rt = resolve_vtype(env, annot, sp)
            if not isinstance(rt, ThunkT):
                raise StaticError("rec binder must have a thunk type U C", sp)
            return Fix(x, rt, desugar_comp(env, body, scope | {x}), span=sp)
        case Ascribe(sub, ct, span=sp):
            return Ascribe(desugar_comp(env, sub, scope), resolve_ctype(env, ct, sp), span=sp)
    raise StaticError(f"cannot desugar computation {m!r}", getattr(m, "span", None))


def resolve_handler_expr(env: ProgramEnv, h, scope: frozenset[str]) -> Handler:
    if isinstance(h, SHandlerRef):
        if h.name not in env.handlers:
            raise StaticError(f"unknown handler {h.name!r}", h.span)
        return env.handlers[h.name].handler
    if isinstance(h, SurfaceHandler):
        return complete_handler(desugar_surface_handler(env, h, scope), env.signature)
    if isinstance(h, Handler):
        return complete_handler(desugar_handler(env, h, scope), env.signature)
    raise StaticError(f"bad handler expression {h!r}", None)


def desugar_handler(env: ProgramEnv, h: Handler, scope: frozenset[str]) -> Handler:
    out = []
    for op, cl in h.clauses:
        if op not in env.signature.ops:
            raise StaticError(f"handler clause for unknown operation {op!r}", cl.span)
        body = desugar_comp(env, cl.body, scope | {cl.param_var})
        out.append((op, HandlerClause(cl.param_var, cl.param_annot, cl.k_var,
                                      cl.k_annot, body, span=cl.span)))
    return Handler(tuple(out), span=h.span)


def desugar_surface_handler(env: ProgramEnv, h: SurfaceHandler,
                            scope: frozenset[str]) -> Handler:
    clauses = []
    for cl in h.clauses:
        clauses.append((cl.op, _desugar_clause(env, cl, scope)))
    return Handler(tuple(clauses), span=h.span)


def _desugar_clause(env: ProgramEnv, cl: SurfaceClause, scope: frozenset[str]) -> HandlerClause:
    if cl.op not in env.signature.ops:
        raise StaticError(f"handler clause for unknown operation {cl.op!r}", cl.span)
    param_t, arity_t = env.signature.ops[cl.op]
    body = cl.body

    # parameter side: zero, one, or a tuple pattern of parameters
    if len(cl.params) == 0:
        param_var = fresh("p")
        param_annot = None
        bound = set()
    elif len(cl.params) == 1:
        param_var = cl.params[0][0]
        param_annot = (resolve_stype(env, cl.params[0][1], cl.span)
                       if cl.params[0][1] is not None else None)
        bound = {param_var}
    else:
        names = [p for p, _ in cl.params]
        if len(set(names)) != len(names):
            raise StaticError("duplicate parameter names in handler clause", cl.span)
        param_var = fresh("p")
        param_annot = None
        # unfold the tuple pattern left-nested, innermost last
        wrapped = body
        cursor: ValueTerm = Var(param_var)
        prefix = []
        v = param_var
        for i in range(len(names) - 1, 0, -1):
            left = fresh("p") if i > 1 else names[0]
            prefix.append((v, left, names[i]))
            v = left
        for (src, l, r) in reversed(prefix):
            wrapped = MatchPair(Var(src), l, r, wrapped)
        body = wrapped
        bound = set(names)

    # continuation side
    fin_konts: list[str] = []
    if len(cl.konts) == 0:
        k_var = fresh("k")
        k_annot = None
    elif len(cl.konts) == 1:
        k_var = cl.konts[0][0]
        ann = cl.konts[0][1]
        k_annot = None
        if ann is not None:
            k_annot = (resolve_stype(env, ann[0], cl.span), resolve_ctype(env, ann[1], cl.span))
    else:
        # finitary sugar: op!(x)(k1, …, kn) with ki of unit argument
        n = len(cl.konts)
        if arity_t != numeric_sum(n):
            raise StaticError(
                f"{cl.op} expects arity {arity_t}; clause lists {n} continuations", cl.span)
        k_var = fresh("k")
        k_annot = None
        for ki, ann in cl.konts:
            if ann is not None:
                raise StaticError("finitary continuations take no annotations", cl.span)
            fin_konts.append(ki)

    rbody = desugar_comp(env, body, scope | bound | {param_var})
    # resolve the sugared calls #ki(()) once the body is in core form
    for i, ki in enumerate(fin_konts):
        rbody = subst_continuation(rbody, ki, fresh("w"),
                                   ContCall(k_var, Inj(str(i + 1), UnitV())))
    return HandlerClause(param_var, param_annot, k_var, k_annot, rbody, span=cl.span)


def complete_handler(h: Handler, sig: Signature) -> Handler:
    """Add the identity clause ``op!(x)(k) -> op!(x)(y. #k(y))`` for every
    operation the handler does not mention.  Idempotent."""
    present = set(h.op_names)
    clauses = list(h.clauses)
    for op, (param_t, arity_t) in sig.ops.items():
        if op in present:
            continue
        x, k, y = fresh("x"), fresh("k"), fresh("y")
        body = OpApp(op, Var(x), y, arity_t, ContCall(k, Var(y)))
        clauses.append((op, HandlerClause(x, param_t, k, None, body)))
    return Handler(tuple(clauses), span=h.span)


# ---------------------------------------------------------------------------
# Program assembly
# ---------------------------------------------------------------------------


_RESERVED = set(BUILTIN_FUNS) | {"nat", "bool", "div", "true", "false"}


def load_program(src: str, filename: str = "<input>") -> ProgramEnv:
    return build_env(parse_program(src, filename))


def build_env(raw: RawProgram, env: Optional[ProgramEnv] = None) -> ProgramEnv:
    if env is None:
        env = ProgramEnv(filename=raw.filename, source=raw.source)
    for decl in raw.decls:
        _add_decl(env, decl)
    return env


def _check_fresh_name(env: ProgramEnv, name: str, span):
    if name in _RESERVED:
        raise StaticError(f"{name!r} is reserved", span)
    taken = (name in env.signature.bases or name in env.aliases
             or name in env.signature.funs or name in env.signature.ops
             or name in env.enum_elems or name in env.labels
             or name in env.handlers or name in env.defs
             or name in env.theories)
    if taken:
        raise StaticError(f"{name!r} is already declared", span)


def _add_decl(env: ProgramEnv, decl):
    match decl:
        case DBase(name, elements, arity, span=sp):
            _check_fresh_name(env, name, sp)
            for e in elements:
                if e in env.enum_elems or e in env.labels or e in _RESERVED:
                    raise StaticError(f"element name {e!r} is already in use", sp)
            env.signature.bases[name] = BaseInfo(tuple(elements), arity=arity)
            for e in elements:
                env.enum_elems[e] = name
        case DAlias(name, ty, span=sp):
            _check_fresh_name(env, name, sp)
            rt = resolve_vtype(env, ty, sp)
            env.aliases[name] = rt
            if isinstance(rt, SumT):
                for l, _ in rt.cases:
                    if l.isdigit():
                        continue
                    if l in env.labels or l in env.enum_elems:
                        raise StaticError(f"label {l!r} is already in use", sp)
                    env.labels[l] = rt
        case DFun(name, arg, res, table, span=sp):
            _check_fresh_name(env, name, sp)
            rarg = resolve_stype(env, arg, sp)
            rres = resolve_stype(env, res, sp)
            env.signature.funs[name] = (rarg, rres)
            if table is not None:
                rtable = tuple((desugar_value(env, k, frozenset()),
                                desugar_value(env, v, frozenset()))
                               for k, v in table)
                env.fun_tables[name] = rtable
        case DOp(name, param, arity, span=sp):
            _check_fresh_name(env, name, sp)
            rp = resolve_stype(env, param, sp)
            ra = resolve_stype(env, arity, sp)
            try:
                env.signature.declare_op(name, rp, ra)
            except ValueError as e:
                raise StaticError(str(e), sp) from None
        case DTheory(name, equations, span=sp):
            _check_fresh_name(env, name, sp)
            env.theories[name] = theories_mod.make_theory(env, name, equations)
        case DHandler(name, params, at_type, surface, span=sp):
            _check_fresh_name(env, name, sp)
            rparams = tuple((p, resolve_vtype(env, t, sp)) for p, t in params)
            scope = frozenset(p for p, _ in rparams)
            h = complete_handler(desugar_surface_handler(env, surface, scope),
                                 env.signature)
            env.handlers[name] = HandlerDef(name, rparams,
                                            resolve_ctype(env, at_type, sp), h)
        case DDef(name, at_type, comp, span=sp):
            _check_fresh_name(env, name, sp)
            rt = resolve_ctype(env, at_type, sp) if at_type is not None else None
            env.defs[name] = (desugar_comp(env, comp, frozenset()), rt)
        case DMain(comp, span=sp):
            if env.main is not None:
                raise StaticError("duplicate main declaration", sp)
            env.main = desugar_comp(env, comp, frozenset())
        case DUse(name, span=sp):
            try:
                bundle = theories_mod.builtin_source(name)
            except KeyError:
                raise StaticError(f"unknown builtin theory {name!r}", sp) from None
            for base in theories_mod.builtin_needs(name):
                if base not in env.signature.bases:
                    raise StaticError(
                        f"theory {name!r} needs a base type {base!r}: "
                        f"declare it before the use", sp)
            build_env(parse_program(bundle, f"<builtin:{name}>"), env)
        case DInterpret(size, span=sp):
            if size < 1:
                raise StaticError("interpret nat = N needs N >= 1", sp)
            env.nat_size = size
        case _:
            raise StaticError(f"unknown declaration {decl!r}", None)


def make_equation(env: ProgramEnv, eq: DEquation):
    """Resolve one theory equation: contexts, both templates (as core
    computations), and the side-condition sugar

        T1 == T2 when V   ~~>   T1 == if V then T2 else T1
    """
    vctx = tuple((x, resolve_stype(env, t, eq.span)) for x, t in eq.vctx)
    zctx = tuple((z, resolve_stype(env, t, eq.span)) for z, t in eq.zctx)
    scope = frozenset(x for x, _ in vctx)
    lhs = desugar_comp(env, eq.lhs, scope)
    rhs = desugar_comp(env, eq.rhs, scope)
    if eq.side is not None:
        cond = desugar_value(env, eq.side, scope)
        rhs = MatchSum(cond, (("true", fresh("w"), rhs), ("false", fresh("w"), lhs)))
    return vctx, zctx, lhs, rhs
