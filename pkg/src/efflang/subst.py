"""Variable supply, free variables, substitution, alpha-equality.

Binders are named; capture is avoided by renaming with a global fresh
supply.  Alpha-equality compares terms up to bound names by walking both
sides in lockstep with binder-depth maps.
"""

from __future__ import annotations

import itertools
from typing import Union

from .ast import (
    App, Ascribe, CompTerm, CompTuple, ContCall, Do, EnumConst, Fix, Force,
    FunApp, Handle, Handler, HandlerClause, Inj, Lam, MatchPair, MatchSum,
    NatLit, OpApp, Pair, Proj, Return, ThunkV, UnitV, ValueTerm, Var,
)

Term = Union[ValueTerm, CompTerm, Handler]

_counter = itertools.count(1)


def fresh(base: str = "x") -> str:
    """A name guaranteed not to collide with any name produced before."""
    root = base.split("'")[0] or "x"
    return f"{root}'{next(_counter)}"


# ---------------------------------------------------------------------------
# Free variables
# ---------------------------------------------------------------------------


def free_vars(t: Term) -> tuple[frozenset[str], frozenset[str]]:
    """Free value variables and free continuation variables of a term."""
    fv: set[str] = set()
    fk: set[str] = set()

    def val(v: ValueTerm, bound: frozenset[str]):
        match v:
            case Var(name):
                if name not in bound:
                    fv.add(name)
            case NatLit() | EnumConst() | UnitV():
                pass
            case FunApp(_, arg):
                val(arg, bound)
            case Pair(a, b):
                val(a, bound)
                val(b, bound)
            case Inj(_, p):
                val(p, bound)
            case ThunkV(m):
                comp(m, bound, frozenset())

    def comp(m: CompTerm, bound: frozenset[str], kbound: frozenset[str]):
        match m:
            case MatchPair(s, x, y, body):
                val(s, bound)
                comp(body, bound | {x, y}, kbound)
            case MatchSum(s, clauses):
                val(s, bound)
                for _, x, body in clauses:
                    comp(body, bound | {x}, kbound)
            case Force(v) | Return(v):
                val(v, bound)
            case Do(x, _, b, body):
                comp(b, bound, kbound)
                comp(body, bound | {x}, kbound)
            case CompTuple(cases):
                for _, sub in cases:
                    comp(sub, bound, kbound)
            case Proj(sub, _):
                comp(sub, bound, kbound)
            case Lam(x, _, body):
                comp(body, bound | {x}, kbound)
            case App(f, a):
                comp(f, bound, kbound)
                val(a, bound)
            case OpApp(_, p, x, _, body):
                val(p, bound)
                comp(body, bound | {x}, kbound)
            case ContCall(k, a):
                if k not in kbound:
                    fk.add(k)
                val(a, bound)
            case Handle(body, h, x, _, cont):
                comp(body, bound, kbound)
                handler(h, bound, kbound)
                comp(cont, bound | {x}, kbound)
            case Fix(x, _, body):
                comp(body, bound | {x}, kbound)
            case Ascribe(sub, _):
                comp(sub, bound, kbound)

    def handler(h: Handler, bound: frozenset[str], kbound: frozenset[str]):
        for _, cl in h.clauses:
            comp(cl.body, bound | {cl.param_var}, kbound | {cl.k_var})

    if isinstance(t, Handler):
        handler(t, frozenset(), frozenset())
    elif isinstance(t, get_comp_classes()):
        comp(t, frozenset(), frozenset())
    else:
        val(t, frozenset())
    return frozenset(fv), frozenset(fk)


def get_comp_classes():
    return (MatchPair, MatchSum, Force, Return, Do, CompTuple, Proj, Lam,
            App, OpApp, ContCall, Handle, Fix, Ascribe)


def free_value_vars(t: Term) -> frozenset[str]:
    return free_vars(t)[0]


# ---------------------------------------------------------------------------
# Substitution of values for value variables
# ---------------------------------------------------------------------------


def subst_value(t: Term, x: str, v: ValueTerm) -> Term:
    """Capture-avoiding ``t[v/x]`` over any term sort."""
    fv_v = free_value_vars(v)

    def under(names: list[str], body: CompTerm):
        """Adjust a binder group over ``body``.  Returns the new names, the
        adjusted body, and whether substitution should continue inside."""
        if x in names:
            return names, body, False
        out = []
        for n in names:
            if n in fv_v:
                n2 = fresh(n)
                body = rename_value_var(body, n, n2)
                out.append(n2)
            else:
                out.append(n)
        return out, body, True

    def val(term: ValueTerm) -> ValueTerm:
        match term:
            case Var(name):
                return v if name == x else term
            case NatLit() | EnumConst() | UnitV():
                return term
            case FunApp(f, a, span=sp):
                return FunApp(f, val(a), span=sp)
            case Pair(a, b, span=sp):
                return Pair(val(a), val(b), span=sp)
            case Inj(l, p, span=sp):
                return Inj(l, val(p), span=sp)
            case ThunkV(m, span=sp):
                return ThunkV(comp(m), span=sp)
        raise TypeError(term)

    def comp(term: CompTerm) -> CompTerm:
        match term:
            case MatchPair(s, a, b, body, span=sp):
                (a2, b2), body2, go = under([a, b], body)
                return MatchPair(val(s), a2, b2, comp(body2) if go else body2, span=sp)
            case MatchSum(s, clauses, span=sp):
                new_clauses = []
                for l, y, body in clauses:
                    (y2,), body2, go = under([y], body)
                    new_clauses.append((l, y2, comp(body2) if go else body2))
                return MatchSum(val(s), tuple(new_clauses), span=sp)
            case Force(a, span=sp):
                return Force(val(a), span=sp)
            case Return(a, span=sp):
                return Return(val(a), span=sp)
            case Do(y, ann, bound, body, span=sp):
                bound2 = comp(bound)
                (y2,), body2, go = under([y], body)
                return Do(y2, ann, bound2, comp(body2) if go else body2, span=sp)
            case CompTuple(cases, span=sp):
                return CompTuple(tuple((l, comp(m)) for l, m in cases), span=sp)
            case Proj(sub, l, span=sp):
                return Proj(comp(sub), l, span=sp)
            case Lam(y, ann, body, span=sp):
                (y2,), body2, go = under([y], body)
                return Lam(y2, ann, comp(body2) if go else body2, span=sp)
            case App(f, a, span=sp):
                return App(comp(f), val(a), span=sp)
            case OpApp(op, p, y, ann, body, span=sp):
                p2 = val(p)
                (y2,), body2, go = under([y], body)
                return OpApp(op, p2, y2, ann, comp(body2) if go else body2, span=sp)
            case ContCall(k, a, span=sp):
                return ContCall(k, val(a), span=sp)
            case Handle(body, h, y, ann, cont, span=sp):
                body2 = comp(body)
                h2 = handler(h)
                (y2,), cont2, go = under([y], cont)
                return Handle(body2, h2, y2, ann, comp(cont2) if go else cont2, span=sp)
            case Fix(y, ann, body, span=sp):
                (y2,), body2, go = under([y], body)
                return Fix(y2, ann, comp(body2) if go else body2, span=sp)
            case Ascribe(sub, ct, span=sp):
                return Ascribe(comp(sub), ct, span=sp)
        raise TypeError(term)

    def handler(h: Handler) -> Handler:
        new = []
        for op, cl in h.clauses:
            (pv,), body, go = under([cl.param_var], cl.body)
            new.append((op, HandlerClause(pv, cl.param_annot, cl.k_var, cl.k_annot,
                                          comp(body) if go else body, span=cl.span)))
        return Handler(tuple(new), span=h.span)

    if isinstance(t, Handler):
        return handler(t)
    if isinstance(t, get_comp_classes()):
        return comp(t)
    return val(t)


def rename_value_var(t: Term, old: str, new: str) -> Term:
    return subst_value(t, old, Var(new))


# ---------------------------------------------------------------------------
# Substitution of computation abstractions for continuation variables
# ---------------------------------------------------------------------------


def subst_continuation(t: Term, k: str, binder_var: str, body: CompTerm) -> Term:
    """Replace every free call ``#k(V)`` in ``t`` by ``body[V/binder_var]``.

    Variables free in ``body`` (other than ``binder_var``) keep referring to
    the definition site: intervening binders that would capture them are
    renamed.
    """
    fv_body, fk_body = free_vars(body)
    fv_body = fv_body - {binder_var}

    def vbinder(names: list[str], sub: CompTerm):
        out = []
        for n in names:
            if n in fv_body:
                n2 = fresh(n)
                sub = rename_value_var(sub, n, n2)
                out.append(n2)
            else:
                out.append(n)
        return out, sub

    def val(term: ValueTerm) -> ValueTerm:
        match term:
            case Var() | NatLit() | EnumConst() | UnitV():
                return term
            case FunApp(f, a, span=sp):
                return FunApp(f, val(a), span=sp)
            case Pair(a, b, span=sp):
                return Pair(val(a), val(b), span=sp)
            case Inj(l, p, span=sp):
                return Inj(l, val(p), span=sp)
            case ThunkV(m, span=sp):
                return ThunkV(comp(m), span=sp)
        raise TypeError(term)

    def comp(term: CompTerm) -> CompTerm:
        match term:
            case MatchPair(s, a, b, sub, span=sp):
                (a2, b2), sub = vbinder([a, b], sub)
                return MatchPair(val(s), a2, b2, comp(sub), span=sp)
            case MatchSum(s, clauses, span=sp):
                new_clauses = []
                for l, y, sub in clauses:
                    (y2,), sub2 = vbinder([y], sub)
                    new_clauses.append((l, y2, comp(sub2)))
                return MatchSum(val(s), tuple(new_clauses), span=sp)
            case Force(a, span=sp):
                return Force(val(a), span=sp)
            case Return(a, span=sp):
                return Return(val(a), span=sp)
            case Do(y, ann, bound, sub, span=sp):
                bound2 = comp(bound)
                (y2,), sub = vbinder([y], sub)
                return Do(y2, ann, bound2, comp(sub), span=sp)
            case CompTuple(cases, span=sp):
                return CompTuple(tuple((l, comp(m)) for l, m in cases), span=sp)
            case Proj(sub, l, span=sp):
                return Proj(comp(sub), l, span=sp)
            case Lam(y, ann, sub, span=sp):
                (y2,), sub = vbinder([y], sub)
                return Lam(y2, ann, comp(sub), span=sp)
            case App(f, a, span=sp):
                return App(comp(f), val(a), span=sp)
            case OpApp(op, p, y, ann, sub, span=sp):
                (y2,), sub = vbinder([y], sub)
                return OpApp(op, val(p), y2, ann, comp(sub), span=sp)
            case ContCall(name, a, span=sp):
                a2 = val(a)
                if name == k:
                    return subst_value(body, binder_var, a2)
                return ContCall(name, a2, span=sp)
            case Handle(sub, h, y, ann, cont, span=sp):
                sub2 = comp(sub)
                h2 = handler(h)
                (y2,), cont = vbinder([y], cont)
                return Handle(sub2, h2, y2, ann, comp(cont), span=sp)
            case Fix(y, ann, sub, span=sp):
                (y2,), sub = vbinder([y], sub)
                return Fix(y2, ann, comp(sub), span=sp)
            case Ascribe(sub, ct, span=sp):
                return Ascribe(comp(sub), ct, span=sp)
        raise TypeError(term)

    def handler(h: Handler) -> Handler:
        new = []
        for op, cl in h.clauses:
            if cl.k_var == k:
                # k is shadowed throughout this clause: leave the body alone.
                new.append((op, cl))
                continue
            (pv,), sub = vbinder([cl.param_var], cl.body)
            kv = cl.k_var
            if kv in fk_body:
                kv2 = fresh(kv)
                sub = rename_cont_var(sub, kv, kv2)
                kv = kv2
            new.append((op, HandlerClause(pv, cl.param_annot, kv, cl.k_annot,
                                          comp(sub), span=cl.span)))
        return Handler(tuple(new), span=h.span)

    if isinstance(t, Handler):
        return handler(t)
    if isinstance(t, get_comp_classes()):
        return comp(t)
    return val(t)


def rename_cont_var(t: Term, old: str, new: str) -> Term:
    arg = fresh("r")
    return subst_continuation(t, old, arg, ContCall(new, Var(arg)))


# ---------------------------------------------------------------------------
# Alpha-equality
# ---------------------------------------------------------------------------


def alpha_eq(t1: Term, t2: Term) -> bool:
    """Structural equality up to renaming of bound variables (spans and
    recoverable annotations ignored)."""

    def bind(m, names, depth):
        new = dict(m)
        for i, n in enumerate(names):
            new[n] = ("b", depth, i)
        return new

    def val(a: ValueTerm, b: ValueTerm, m1, m2, k1, k2, d) -> bool:
        match a, b:
            case Var(x), Var(y):
                return m1.get(x, x) == m2.get(y, y)
            case NatLit(x), NatLit(y):
                return x == y
            case EnumConst(bx, x), EnumConst(by, y):
                return bx == by and x == y
            case UnitV(), UnitV():
                return True
            case FunApp(f, x), FunApp(g, y):
                return f == g and val(x, y, m1, m2, k1, k2, d)
            case Pair(x1, x2), Pair(y1, y2):
                return (val(x1, y1, m1, m2, k1, k2, d)
                        and val(x2, y2, m1, m2, k1, k2, d))
            case Inj(l, x), Inj(l2, y):
                return l == l2 and val(x, y, m1, m2, k1, k2, d)
            case ThunkV(x), ThunkV(y):
                return comp(x, y, m1, m2, k1, k2, d)
        return False

    def comp(a: CompTerm, b: CompTerm, m1, m2, k1, k2, d) -> bool:
        match a, b:
            case MatchPair(s1, x1, y1, b1), MatchPair(s2, x2, y2, b2):
                return val(s1, s2, m1, m2, k1, k2, d) and comp(
                    b1, b2, bind(m1, [x1, y1], d), bind(m2, [x2, y2], d), k1, k2, d + 1)
            case MatchSum(s1, cl1), MatchSum(s2, cl2):
                if not val(s1, s2, m1, m2, k1, k2, d) or len(cl1) != len(cl2):
                    return False
                for (l1, x1, b1), (l2, x2, b2) in zip(cl1, cl2):
                    if l1 != l2 or not comp(b1, b2, bind(m1, [x1], d),
                                            bind(m2, [x2], d), k1, k2, d + 1):
                        return False
                return True
            case Force(v1), Force(v2):
                return val(v1, v2, m1, m2, k1, k2, d)
            case Return(v1), Return(v2):
                return val(v1, v2, m1, m2, k1, k2, d)
            case Do(x1, _, g1, b1), Do(x2, _, g2, b2):
                return comp(g1, g2, m1, m2, k1, k2, d) and comp(
                    b1, b2, bind(m1, [x1], d), bind(m2, [x2], d), k1, k2, d + 1)
            case CompTuple(c1), CompTuple(c2):
                if len(c1) != len(c2):
                    return False
                return all(l1 == l2 and comp(s1, s2, m1, m2, k1, k2, d)
                           for (l1, s1), (l2, s2) in zip(c1, c2))
            case Proj(s1, l1), Proj(s2, l2):
                return l1 == l2 and comp(s1, s2, m1, m2, k1, k2, d)
            case Lam(x1, a1, b1), Lam(x2, a2, b2):
                return a1 == a2 and comp(b1, b2, bind(m1, [x1], d),
                                         bind(m2, [x2], d), k1, k2, d + 1)
            case App(f1, v1), App(f2, v2):
                return comp(f1, f2, m1, m2, k1, k2, d) and val(v1, v2, m1, m2, k1, k2, d)
            case OpApp(o1, p1, x1, _, b1), OpApp(o2, p2, x2, _, b2):
                return o1 == o2 and val(p1, p2, m1, m2, k1, k2, d) and comp(
                    b1, b2, bind(m1, [x1], d), bind(m2, [x2], d), k1, k2, d + 1)
            case ContCall(n1, v1), ContCall(n2, v2):
                return (k1.get(n1, n1) == k2.get(n2, n2)
                        and val(v1, v2, m1, m2, k1, k2, d))
            case Handle(b1, h1, x1, _, c1), Handle(b2, h2, x2, _, c2):
                return (comp(b1, b2, m1, m2, k1, k2, d)
                        and handler(h1, h2, m1, m2, k1, k2, d)
                        and comp(c1, c2, bind(m1, [x1], d), bind(m2, [x2], d),
                                 k1, k2, d + 1))
            case Fix(x1, a1, b1), Fix(x2, a2, b2):
                return a1 == a2 and comp(b1, b2, bind(m1, [x1], d),
                                         bind(m2, [x2], d), k1, k2, d + 1)
            case Ascribe(s1, t1_), Ascribe(s2, t2_):
                return t1_ == t2_ and comp(s1, s2, m1, m2, k1, k2, d)
        return False

    def handler(h1: Handler, h2: Handler, m1, m2, k1, k2, d) -> bool:
        if h1.op_names != h2.op_names:
            return False
        for (_, c1), (_, c2) in zip(h1.clauses, h2.clauses):
            if not comp(c1.body, c2.body,
                        bind(m1, [c1.param_var], d), bind(m2, [c2.param_var], d),
                        bind(k1, [c1.k_var], d), bind(k2, [c2.k_var], d), d + 1):
                return False
        return True

    if isinstance(t1, Handler) and isinstance(t2, Handler):
        return handler(t1, t2, {}, {}, {}, {}, 0)
    comp_classes = get_comp_classes()
    if isinstance(t1, comp_classes) and isinstance(t2, comp_classes):
        return comp(t1, t2, {}, {}, {}, {}, 0)
    if not isinstance(t1, (Handler, *comp_classes)) and not isinstance(t2, (Handler, *comp_classes)):
        return val(t1, t2, {}, {}, {}, {}, 0)
    return False
