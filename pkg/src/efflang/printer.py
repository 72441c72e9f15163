"""Canonical rendering of types and terms back to surface syntax.

Printing composed with parsing and desugaring is the identity up to
alpha-equivalence; recoverable annotations are dropped.
"""

from __future__ import annotations

from .ast import (
    App, Ascribe, Base, BOOL, CompTerm, CompTuple, ContCall, Do, EnumConst,
    Fix, Force, FreeT, FunApp, Handle, Handler, Inj, Lam, MatchPair, MatchSum,
    NatLit, OpApp, Pair, ProdCT, ProdT, Proj, Return, SumT, ThunkT, ThunkV,
    UnitT, UnitV, ValueTerm, Var, ArrowT, CompType, ValueType,
)

_INFIX = {"or": 1, "and": 2, "==": 3, "!=": 3, "<": 3, "<=": 3, "+": 4, "-": 4}


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


def print_vtype(t: ValueType) -> str:
    match t:
        case Base(name):
            return name
        case UnitT():
            return "1"
        case ProdT(a, b):
            left = print_vtype(a)
            if isinstance(a, ProdT):
                pass  # products nest to the left; no parens needed
            elif _needs_parens_in_prod(a):
                left = f"({left})"
            right = print_vtype(b)
            if isinstance(b, ProdT) or _needs_parens_in_prod(b):
                right = f"({right})"
            return f"{left} * {right}"
        case SumT(cases):
            if t == BOOL:
                return "bool"
            if not cases:
                return "0"
            labels = [l for l, _ in cases]
            if all(ty == UnitT() for _, ty in cases) and labels == [
                    str(i) for i in range(1, len(cases) + 1)]:
                return str(len(cases))
            parts = []
            for l, ty in cases:
                parts.append(l if ty == UnitT() else f"{l}: {print_vtype(ty)}")
            return "[" + ", ".join(parts) + "]"
        case ThunkT(c):
            return f"U {_ctype_atom(c)}"
    raise TypeError(t)


def _needs_parens_in_prod(t: ValueType) -> bool:
    return False  # atoms and sums are self-delimiting


def print_ctype(t: CompType) -> str:
    match t:
        case FreeT(a):
            inner = print_vtype(a)
            if isinstance(a, ProdT):
                inner = f"({inner})"
            return f"F {inner}"
        case ProdCT(cases):
            parts = [f"{l}: {print_ctype(c)}" for l, c in cases]
            return "<" + ", ".join(parts) + ">"
        case ArrowT(a, c):
            arg = print_vtype(a)
            return f"{arg} -> {print_ctype(c)}"
    raise TypeError(t)


def _ctype_atom(t: CompType) -> str:
    s = print_ctype(t)
    if isinstance(t, ArrowT):
        return f"({s})"
    return s


# ---------------------------------------------------------------------------
# Terms
# ---------------------------------------------------------------------------


def print_value(v: ValueTerm, prec: int = 0) -> str:
    match v:
        case Var(name):
            return name
        case NatLit(n):
            return str(n)
        case EnumConst(_, name):
            return name
        case UnitV():
            return "()"
        case FunApp(f, arg):
            if f in _INFIX and isinstance(arg, Pair):
                p = _INFIX[f]
                s = f"{print_value(arg.fst, p)} {f} {print_value(arg.snd, p + 1)}"
                return f"({s})" if prec > p else s
            if f == "not":
                return f"not {print_value(arg, 10)}"
            if isinstance(arg, UnitV):
                return f"{f}()"
            if isinstance(arg, Pair):
                items = _flatten_pair(arg)
                return f"{f}(" + ", ".join(print_value(x) for x in items) + ")"
            return f"{f}({print_value(arg)})"
        case Pair():
            items = _flatten_pair(v)
            return "(" + ", ".join(print_value(x) for x in items) + ")"
        case Inj(label, payload):
            if isinstance(payload, UnitV):
                return f"'{label}"
            return f"'{label}({print_value(payload)})"
        case ThunkV(m):
            return f"thunk {print_comp(m, atom=True)}"
    raise TypeError(v)


def _flatten_pair(v: ValueTerm) -> list[ValueTerm]:
    # Pairs associate to the left: (a, b, c) is ((a, b), c).
    items = []
    while isinstance(v, Pair):
        items.append(v.snd)
        v = v.fst
    items.append(v)
    return list(reversed(items))


def print_comp(m: CompTerm, atom: bool = False) -> str:
    s = _comp_str(m)
    if atom and not _is_atomic(m):
        return f"({s})"
    return s


def _is_atomic(m: CompTerm) -> bool:
    match m:
        case Force() | ContCall() | Proj() | CompTuple() | Ascribe():
            return True
        case _:
            return False


def _comp_str(m: CompTerm) -> str:
    match m:
        case MatchPair(s, x, y, body):
            return f"match {print_value(s)} with {{ ({x}, {y}) -> {_comp_str(body)} }}"
        case MatchSum(s, clauses):
            cl = " | ".join(f"{l}({x}) -> {_comp_str(b)}" for l, x, b in clauses)
            return f"match {print_value(s)} with {{ {cl} }}" if clauses else \
                f"match {print_value(s)} with {{}}"
        case Force(v):
            return f"force {print_value(v, 10)}"
        case Return(v):
            return f"return {print_value(v)}"
        case Do(x, annot, bound, body):
            ann = f" : {print_vtype(annot)}" if annot is not None else ""
            return f"do {x}{ann} <- {_comp_str(bound)} in {_comp_str(body)}"
        case CompTuple(cases):
            inner = ", ".join(f"{l} = {_comp_str(c)}" for l, c in cases)
            return f"< {inner} >" if cases else "<>"
        case Proj(sub, l):
            return f"prj {l} {print_comp(sub, atom=True)}"
        case Lam(x, annot, body):
            return f"fun {x} : {print_vtype(annot)} -> {_comp_str(body)}"
        case App(f, a):
            return f"{print_comp(f, atom=True)} {print_value(a, 10)}"
        case OpApp(op, p, x, _, body):
            ps = "" if isinstance(p, UnitV) else print_value(p)
            return f"{op}!({ps})({x}. {_comp_str(body)})"
        case ContCall(k, a):
            if isinstance(a, UnitV):
                return f"#{k}()"
            return f"#{k}({print_value(a)})"
        case Handle(body, h, x, annot, cont):
            ann = f" : {print_vtype(annot)}" if annot is not None else ""
            return (f"handle {_comp_str(body)} "
                    f"with {print_handler(h)} to {x}{ann} . {_comp_str(cont)}")
        case Fix(x, annot, body):
            return f"rec {x} : {print_vtype(annot)}. {_comp_str(body)}"
        case Ascribe(sub, ct):
            return f"({_comp_str(sub)} : {print_ctype(ct)})"
    raise TypeError(m)


def print_handler(h: Handler) -> str:
    parts = []
    for op, cl in h.clauses:
        parts.append(f"{op}!({cl.param_var})({cl.k_var}) -> {_comp_str(cl.body)}")
    return "{ " + " | ".join(parts) + " }" if parts else "{}"


def print_value_annotated(v: ValueTerm) -> str:
    return print_value(v)
