"""Bidirectional type checking for core terms.

Judgements are relative to a value context, a continuation context (for
handler-clause bodies), and the program's signature.  Types are compared
structurally; aliases were expanded during desugaring.
"""

from __future__ import annotations

from typing import Optional

from .ast import (
    App, ArrowT, Ascribe, Base, BOOL, CompTerm, CompTuple, CompType, ContCall,
    Do, EnumConst, Fix, Force, FreeT, FunApp, Handle, Handler, Inj, Lam,
    MatchPair, MatchSum, NatLit, OpApp, Pair, ProdCT, ProdT, Proj, Return,
    SignatureType, SumT, ThunkT, ThunkV, UnitT, UnitV, ValueTerm, ValueType,
    Var, is_signature_type,
)
from .errors import StaticError
from .printer import print_ctype, print_vtype

Ctx = dict[str, ValueType]
KCtx = dict[str, tuple[SignatureType, CompType]]


def _sp(t):
    return getattr(t, "span", None)


def _mismatch(expected, got, span):
    return StaticError(
        f"expected {print_vtype(expected)}, found {print_vtype(got)}", span)


def infer_value(env, ctx: Ctx, kctx: KCtx, v: ValueTerm) -> ValueType:
    match v:
        case Var(x):
            if x not in ctx:
                raise StaticError(f"unbound variable {x!r}", v.span)
            return ctx[x]
        case NatLit(_):
            return Base("nat")
        case EnumConst(base, name):
            info = env.signature.bases.get(base)
            if info is None or info.elements is None or name not in info.elements:
                raise StaticError(f"{name!r} is not an element of {base!r}", v.span)
            return Base(base)
        case UnitV():
            return UnitT()
        case Pair(a, b):
            return ProdT(infer_value(env, ctx, kctx, a),
                         infer_value(env, ctx, kctx, b))
        case Inj(l, _):
            raise StaticError(
                f"cannot infer the sum type of '{l}; add an annotation", v.span)
        case ThunkV(m):
            return ThunkT(infer_comp(env, ctx, kctx, m))
        case FunApp(f, arg):
            return _infer_funapp(env, ctx, kctx, f, arg, v.span)
    raise StaticError(f"cannot type value {type(v).__name__}", _sp(v))


def _infer_funapp(env, ctx, kctx, f, arg, span) -> ValueType:
    nat = Base("nat")
    if f in ("+", "-"):
        check_value(env, ctx, kctx, arg, ProdT(nat, nat))
        return nat
    if f in ("<", "<="):
        check_value(env, ctx, kctx, arg, ProdT(nat, nat))
        return BOOL
    if f in ("==", "!="):
        t = infer_value(env, ctx, kctx, arg)
        if not isinstance(t, ProdT) or t.fst != t.snd:
            raise StaticError(f"{f} compares two values of one type", span)
        if not is_signature_type(t.fst):
            raise StaticError(f"{f} compares signature-typed values only", span)
        return BOOL
    if f in ("and", "or"):
        check_value(env, ctx, kctx, arg, ProdT(BOOL, BOOL))
        return BOOL
    if f == "not":
        check_value(env, ctx, kctx, arg, BOOL)
        return BOOL
    if f in env.signature.funs:
        argt, rest = env.signature.funs[f]
        check_value(env, ctx, kctx, arg, argt)
        return rest
    raise StaticError(f"unknown function symbol {f!r}", span)


def check_value(env, ctx: Ctx, kctx: KCtx, v: ValueTerm, expected: ValueType):
    match v:
        case Inj(l, p):
            if not isinstance(expected, SumT):
                raise StaticError(
                    f"injection '{l} where {print_vtype(expected)} expected", v.span)
            if l not in expected.labels:
                raise StaticError(
                    f"label '{l} is not a case of {print_vtype(expected)}", v.span)
            check_value(env, ctx, kctx, p, expected.case(l))
        case Pair(a, b) if isinstance(expected, ProdT):
            check_value(env, ctx, kctx, a, expected.fst)
            check_value(env, ctx, kctx, b, expected.snd)
        case ThunkV(m) if isinstance(expected, ThunkT):
            check_comp(env, ctx, kctx, m, expected.comp)
        case _:
            got = infer_value(env, ctx, kctx, v)
            if got != expected:
                raise _mismatch(expected, got, _sp(v))


def infer_comp(env, ctx: Ctx, kctx: KCtx, m: CompTerm) -> CompType:
    match m:
        case Return(v):
            return FreeT(infer_value(env, ctx, kctx, v))
        case Do(x, annot, bound, body):
            a = _returner_type(env, ctx, kctx, bound, annot)
            return infer_comp(env, {**ctx, x: a}, kctx, body)
        case Force(v):
            t = infer_value(env, ctx, kctx, v)
            if not isinstance(t, ThunkT):
                raise StaticError(
                    f"force needs a thunk, found {print_vtype(t)}", _sp(m))
            return t.comp
        case Lam(x, annot, body):
            return ArrowT(annot, infer_comp(env, {**ctx, x: annot}, kctx, body))
        case App(f, arg):
            tf = infer_comp(env, ctx, kctx, f)
            if not isinstance(tf, ArrowT):
                raise StaticError(
                    f"application head has type {print_ctype(tf)}, not an arrow",
                    _sp(m))
            check_value(env, ctx, kctx, arg, tf.arg)
            return tf.res
        case CompTuple(cases):
            return ProdCT(tuple((l, infer_comp(env, ctx, kctx, c))
                                for l, c in cases))
        case Proj(sub, l):
            t = infer_comp(env, ctx, kctx, sub)
            if not isinstance(t, ProdCT):
                raise StaticError(
                    f"projection from {print_ctype(t)}, not a tuple type", _sp(m))
            for cl, ct in t.cases:
                if cl == l:
                    return ct
            raise StaticError(f"no component {l!r} in {print_ctype(t)}", _sp(m))
        case MatchPair(s, x, y, body):
            t = infer_value(env, ctx, kctx, s)
            if not isinstance(t, ProdT):
                raise StaticError(
                    f"pair match on {print_vtype(t)}, not a product", _sp(m))
            return infer_comp(env, {**ctx, x: t.fst, y: t.snd}, kctx, body)
        case MatchSum(s, clauses):
            t = infer_value(env, ctx, kctx, s)
            _check_match_labels(t, clauses, _sp(m))
            if not clauses:
                raise StaticError(
                    "cannot infer the type of an empty match; ascribe it", _sp(m))
            result: Optional[CompType] = None
            for l, x, b in clauses:
                bt = infer_comp(env, {**ctx, x: t.case(l)}, kctx, b)
                if result is None:
                    result = bt
                elif result != bt:
                    raise StaticError(
                        f"match branches disagree: {print_ctype(result)} vs "
                        f"{print_ctype(bt)}", _sp(b))
            return result
        case OpApp(op, p, x, _annot, body):
            pt, at = _op_sig(env, op, _sp(m))
            check_value(env, ctx, kctx, p, pt)
            return infer_comp(env, {**ctx, x: at}, kctx, body)
        case ContCall(k, arg):
            if k not in kctx:
                raise StaticError(f"unbound continuation variable {k!r}", _sp(m))
            bt, c = kctx[k]
            check_value(env, ctx, kctx, arg, bt)
            return c
        case Handle(body, h, x, annot, cont):
            a = _returner_type(env, ctx, kctx, body, annot)
            c = infer_comp(env, {**ctx, x: a}, kctx, cont)
            check_handler(env, ctx, kctx, h, c)
            return c
        case Fix(x, annot, body):
            if not isinstance(annot, ThunkT):
                raise StaticError("rec binder needs a thunk type", _sp(m))
            check_comp(env, {**ctx, x: annot}, kctx, body, annot.comp)
            return annot.comp
        case Ascribe(sub, ct):
            check_comp(env, ctx, kctx, sub, ct)
            return ct
    raise StaticError(f"cannot type computation {type(m).__name__}", _sp(m))


def _returner_type(env, ctx, kctx, bound: CompTerm, annot) -> ValueType:
    """Type a computation expected to produce a value: its type must be F A;
    an annotation fixes A and lets checking descend."""
    if annot is not None:
        check_comp(env, ctx, kctx, bound, FreeT(annot))
        return annot
    t = infer_comp(env, ctx, kctx, bound)
    if not isinstance(t, FreeT):
        raise StaticError(
            f"expected a returner F A, found {print_ctype(t)}", _sp(bound))
    return t.val


def _op_sig(env, op: str, span) -> tuple[SignatureType, SignatureType]:
    if op not in env.signature.ops:
        raise StaticError(f"unknown operation {op!r}", span)
    return env.signature.ops[op]


def _check_match_labels(t: ValueType, clauses, span):
    if not isinstance(t, SumT):
        raise StaticError(
            f"sum match on {print_vtype(t)}, not a sum", span)
    want = set(t.labels)
    got = [l for l, _, _ in clauses]
    if len(got) != len(set(got)):
        raise StaticError("duplicate match labels", span)
    if want != set(got):
        raise StaticError(
            f"match covers {sorted(got)}, scrutinee has {sorted(want)}", span)


def check_comp(env, ctx: Ctx, kctx: KCtx, m: CompTerm, expected: CompType):
    match m:
        case Return(v) if isinstance(expected, FreeT):
            check_value(env, ctx, kctx, v, expected.val)
        case Do(x, annot, bound, body):
            a = _returner_type(env, ctx, kctx, bound, annot)
            check_comp(env, {**ctx, x: a}, kctx, body, expected)
        case Lam(x, annot, body):
            if not isinstance(expected, ArrowT):
                raise StaticError(
                    f"function where {print_ctype(expected)} expected", _sp(m))
            if annot != expected.arg:
                raise StaticError(
                    f"argument annotated {print_vtype(annot)}, expected "
                    f"{print_vtype(expected.arg)}", _sp(m))
            check_comp(env, {**ctx, x: annot}, kctx, body, expected.res)
        case CompTuple(cases):
            if not isinstance(expected, ProdCT):
                raise StaticError(
                    f"tuple where {print_ctype(expected)} expected", _sp(m))
            if tuple(l for l, _ in cases) != tuple(l for l, _ in expected.cases):
                raise StaticError("tuple labels do not match the expected type",
                                  _sp(m))
            for (_, c), (_, ct) in zip(cases, expected.cases):
                check_comp(env, ctx, kctx, c, ct)
        case MatchPair(s, x, y, body):
            t = infer_value(env, ctx, kctx, s)
            if not isinstance(t, ProdT):
                raise StaticError(
                    f"pair match on {print_vtype(t)}, not a product", _sp(m))
            check_comp(env, {**ctx, x: t.fst, y: t.snd}, kctx, body, expected)
        case MatchSum(s, clauses):
            t = infer_value(env, ctx, kctx, s)
            _check_match_labels(t, clauses, _sp(m))
            for l, x, b in clauses:
                check_comp(env, {**ctx, x: t.case(l)}, kctx, b, expected)
        case OpApp(op, p, x, _annot, body):
            pt, at = _op_sig(env, op, _sp(m))
            check_value(env, ctx, kctx, p, pt)
            check_comp(env, {**ctx, x: at}, kctx, body, expected)
        case Handle(body, h, x, annot, cont):
            a = _returner_type(env, ctx, kctx, body, annot)
            check_comp(env, {**ctx, x: a}, kctx, cont, expected)
            check_handler(env, ctx, kctx, h, expected)
        case Fix(x, annot, body):
            if not isinstance(annot, ThunkT) or annot.comp != expected:
                raise StaticError(
                    f"rec annotated {print_vtype(annot)}, expected "
                    f"U {print_ctype(expected)}", _sp(m))
            check_comp(env, {**ctx, x: annot}, kctx, body, expected)
        case _:
            got = infer_comp(env, ctx, kctx, m)
            if got != expected:
                raise StaticError(
                    f"expected {print_ctype(expected)}, found {print_ctype(got)}",
                    _sp(m))


def check_handler(env, ctx: Ctx, kctx: KCtx, h: Handler, c: CompType):
    """A handler at C: one clause per signature operation, each clause body
    typed at C with the parameter and a continuation in scope."""
    covered = set(h.op_names)
    missing = set(env.signature.ops) - covered
    if missing:
        raise StaticError(
            f"handler lacks clauses for {sorted(missing)}", _sp(h))
    for op, cl in h.clauses:
        pt, at = _op_sig(env, op, cl.span)
        if cl.param_annot is not None and cl.param_annot != pt:
            raise StaticError(
                f"{op} parameter annotated {print_vtype(cl.param_annot)}, "
                f"its type is {print_vtype(pt)}", cl.span)
        if cl.k_annot is not None and cl.k_annot != (at, c):
            raise StaticError(
                f"{op} continuation annotation does not match "
                f"{print_vtype(at)} => {print_ctype(c)}", cl.span)
        check_comp(env, {**ctx, cl.param_var: pt},
                   {**kctx, cl.k_var: (at, c)}, cl.body, c)


def check_program(env) -> dict[str, CompType]:
    """Check every named handler, definition, and main; returns the type of
    each definition (and of ``main`` when present)."""
    out: dict[str, CompType] = {}
    for name, hd in env.handlers.items():
        check_handler(env, dict(hd.params), {}, hd.handler, hd.at_type)
    for name, (body, at) in env.defs.items():
        if at is not None:
            check_comp(env, {}, {}, body, at)
            out[name] = at
        else:
            out[name] = infer_comp(env, {}, {}, body)
    if env.main is not None:
        out["main"] = infer_comp(env, {}, {}, env.main)
    return out
