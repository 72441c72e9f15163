"""Evaluation of core computations into free-model trees.

A computation of returner type F A denotes a tree: leaves carry returned
values, inner nodes carry an operation, its parameter, and one subtree per
arity element.  Computations of function or tuple type denote semantic
functions and tuples; operations distribute over both pointwise, so an
operation application makes sense at every computation type.

Branches are lazy and memoised, and all work shares one fuel supply, so
infinitely wide or deep trees can be explored up to a budget.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .ast import (
    App, Ascribe, CompTerm, CompTuple, ContCall, Do, EnumConst, Fix, Force,
    FunApp, Handle, Handler, Inj, Lam, MatchPair, MatchSum, NatLit, OpApp,
    Pair, ProdT, Proj, Return, SignatureType, SumT, ThunkV, UnitT, UnitV,
    ValueTerm, Var, Base,
)
from .errors import EvalError
from .subst import alpha_eq, free_vars
from .theories import Interpretation, enumerate_type

# ---------------------------------------------------------------------------
# Semantic values
# ---------------------------------------------------------------------------
#
# nat       -> int
# enum      -> str (the element name)
# unit      -> ()
# pair      -> (a, b)
# injection -> VInj(label, payload)
# thunk     -> Thunk(term, env, kenv)


@dataclass(frozen=True)
class VInj:
    label: str
    payload: "SemValue"


@dataclass
class Thunk:
    term: CompTerm
    env: dict
    kenv: dict


SemValue = Union[int, str, tuple, VInj, Thunk]


def sem_of_element(t: SignatureType, e) -> SemValue:
    """Decode an interpretation element (see ``theories``) at a known type."""
    match t:
        case Base(_):
            return e
        case UnitT():
            return ()
        case ProdT(a, b):
            return (sem_of_element(a, e[0]), sem_of_element(b, e[1]))
        case SumT(_):
            l, p = e
            return VInj(l, sem_of_element(t.case(l), p))
    raise EvalError(f"cannot decode at type {t}")


def element_of_sem(t: SignatureType, v: SemValue):
    match t, v:
        case Base(_), _:
            return v
        case UnitT(), _:
            return ()
        case ProdT(a, b), (x, y):
            return (element_of_sem(a, x), element_of_sem(b, y))
        case SumT(_), VInj(l, p):
            return (l, element_of_sem(t.case(l), p))
    raise EvalError(f"cannot encode {v!r} at type {t}")


def sem_value_eq(a: SemValue, b: SemValue) -> Optional[bool]:
    """Structural equality; None when thunks make the answer uncertain."""
    if isinstance(a, Thunk) or isinstance(b, Thunk):
        if not (isinstance(a, Thunk) and isinstance(b, Thunk)):
            return False
        if not alpha_eq(a.term, b.term):
            return None
        fv, fk = free_vars(a.term)
        for x in fv:
            if x not in a.env or x not in b.env:
                return None
            sub = sem_value_eq(a.env[x], b.env[x])
            if sub is not True:
                return sub
        return True if not fk else None
    if isinstance(a, VInj) and isinstance(b, VInj):
        if a.label != b.label:
            return False
        return sem_value_eq(a.payload, b.payload)
    if isinstance(a, tuple) and isinstance(b, tuple):
        if len(a) != len(b):
            return False
        for x, y in zip(a, b):
            sub = sem_value_eq(x, y)
            if sub is not True:
                return sub
        return True
    return a == b if type(a) is type(b) else False


# ---------------------------------------------------------------------------
# Fuel
# ---------------------------------------------------------------------------


class OutOfFuelSignal(Exception):
    pass


@dataclass
class Fuel:
    remaining: Optional[int] = None

    def spend(self, n: int = 1):
        if self.remaining is None:
            return
        self.remaining -= n
        if self.remaining < 0:
            raise OutOfFuelSignal()


# ---------------------------------------------------------------------------
# Semantic computations and trees
# ---------------------------------------------------------------------------


@dataclass
class TReturn:
    value: SemValue


class TOpNode:
    """An operation node; subtrees are produced lazily and memoised."""

    __slots__ = ("op", "param", "arity", "_fn", "_memo")

    def __init__(self, op: str, param: SemValue, arity: SignatureType, fn):
        self.op = op
        self.param = param
        self.arity = arity
        self._fn = fn
        self._memo: dict = {}

    def branch(self, w: SemValue) -> "CompTree":
        key = w
        if key not in self._memo:
            self._memo[key] = self._fn(w)
        return self._memo[key]


CompTree = Union[TReturn, TOpNode]


@dataclass
class CTree:
    tree: CompTree


@dataclass
class CFun:
    fn: Callable[[SemValue], "SemComp"]


class CTuple:
    __slots__ = ("_fns", "_memo")

    def __init__(self, fns: dict):
        self._fns = fns
        self._memo: dict = {}

    @property
    def labels(self):
        return tuple(self._fns)

    def component(self, l: str) -> "SemComp":
        if l not in self._memo:
            if l not in self._fns:
                raise EvalError(f"no tuple component {l!r}")
            self._memo[l] = self._fns[l]()
        return self._memo[l]


@dataclass
class COp:
    """An operation applied at a not-yet-observed computation type; it
    distributes over whatever observation comes."""

    op: str
    param: SemValue
    arity: SignatureType
    branch: Callable[[SemValue], "SemComp"]


SemComp = Union[CTree, CFun, CTuple, COp]


def as_tree(c: SemComp) -> CompTree:
    match c:
        case CTree(t):
            return t
        case COp(op, p, a, br):
            return TOpNode(op, p, a, lambda w: as_tree(br(w)))
    raise EvalError("expected a returner computation")


def call(c: SemComp, v: SemValue) -> SemComp:
    match c:
        case CFun(f):
            return f(v)
        case COp(op, p, a, br):
            return COp(op, p, a, lambda w: call(br(w), v))
    raise EvalError("expected a function computation")


def proj(c: SemComp, l: str) -> SemComp:
    match c:
        case CTuple():
            return c.component(l)
        case COp(op, p, a, br):
            return COp(op, p, a, lambda w: proj(br(w), l))
    raise EvalError("expected a tuple computation")


def _seq_tree(t: CompTree, f: Callable[[SemValue], SemComp]) -> SemComp:
    match t:
        case TReturn(v):
            return f(v)
        case TOpNode():
            return COp(t.op, t.param, t.arity,
                       lambda w: _seq_tree(t.branch(w), f))
    raise EvalError("bad tree")


# ---------------------------------------------------------------------------
# The evaluator
# ---------------------------------------------------------------------------


_TRUE = VInj("true", ())
_FALSE = VInj("false", ())


class Evaluator:
    """Evaluates core terms from one program under one fuel supply.

    ``nat_size`` (when set) makes nat arithmetic saturate, matching the
    finite interpretation used for translation and verification."""

    def __init__(self, env, fuel: Optional[Fuel] = None,
                 nat_size: Optional[int] = None):
        self.env = env
        self.fuel = fuel if fuel is not None else Fuel()
        self.nat_size = nat_size if nat_size is not None else env.nat_size
        self.interp = Interpretation(
            {n: info.elements for n, info in env.signature.bases.items()
             if info.elements is not None},
            self.nat_size)
        self._tables: dict[str, list] = {}

    # -- values ------------------------------------------------------------

    def _nat(self, n: int) -> int:
        if self.nat_size is not None:
            return min(n, self.nat_size - 1)
        return n

    def eval_value(self, v: ValueTerm, env: dict, kenv: dict) -> SemValue:
        match v:
            case Var(x):
                if x not in env:
                    raise EvalError(f"unbound variable {x!r}")
                return env[x]
            case NatLit(n):
                return self._nat(n)
            case EnumConst(_, name):
                return name
            case UnitV():
                return ()
            case Pair(a, b):
                return (self.eval_value(a, env, kenv),
                        self.eval_value(b, env, kenv))
            case Inj(l, p):
                return VInj(l, self.eval_value(p, env, kenv))
            case ThunkV(m):
                return Thunk(m, env, kenv)
            case FunApp(f, arg):
                return self.apply_fun(f, self.eval_value(arg, env, kenv))
        raise EvalError(f"cannot evaluate value {type(v).__name__}")

    def apply_fun(self, f: str, a: SemValue) -> SemValue:
        match f:
            case "+":
                return self._nat(a[0] + a[1])
            case "-":
                return self._nat(max(a[0] - a[1], 0))
            case "<":
                return _TRUE if a[0] < a[1] else _FALSE
            case "<=":
                return _TRUE if a[0] <= a[1] else _FALSE
            case "==":
                return _TRUE if sem_value_eq(a[0], a[1]) is True else _FALSE
            case "!=":
                return _TRUE if sem_value_eq(a[0], a[1]) is False else _FALSE
            case "and":
                return _TRUE if (a[0] == _TRUE and a[1] == _TRUE) else _FALSE
            case "or":
                return _TRUE if (a[0] == _TRUE or a[1] == _TRUE) else _FALSE
            case "not":
                return _TRUE if a == _FALSE else _FALSE
        if f in self.env.fun_tables:
            if f not in self._tables:
                self._tables[f] = [
                    (self.eval_value(k, {}, {}), self.eval_value(w, {}, {}))
                    for k, w in self.env.fun_tables[f]]
            for k, w in self._tables[f]:
                if sem_value_eq(k, a) is True:
                    return w
            raise EvalError(f"function {f!r} is undefined at {a!r}")
        raise EvalError(f"function {f!r} has no table to evaluate with")

    # -- computations --------------------------------------------------------

    def eval(self, m: CompTerm, env: dict, kenv: dict) -> SemComp:
        self.fuel.spend()
        match m:
            case Return(v):
                return CTree(TReturn(self.eval_value(v, env, kenv)))
            case Do(x, _annot, bound, body):
                t = as_tree(self.eval(bound, env, kenv))
                return _seq_tree(
                    t, lambda w: self.eval(body, {**env, x: w}, kenv))
            case Force(v):
                th = self.eval_value(v, env, kenv)
                if not isinstance(th, Thunk):
                    raise EvalError("force of a non-thunk")
                return self.eval(th.term, th.env, th.kenv)
            case Lam(x, _annot, body):
                return CFun(lambda a: self.eval(body, {**env, x: a}, kenv))
            case App(f, arg):
                c = self.eval(f, env, kenv)
                return call(c, self.eval_value(arg, env, kenv))
            case CompTuple(cases):
                return CTuple({l: (lambda c=c: self.eval(c, env, kenv))
                               for l, c in cases})
            case Proj(sub, l):
                return proj(self.eval(sub, env, kenv), l)
            case MatchPair(s, x, y, body):
                sv = self.eval_value(s, env, kenv)
                if not isinstance(sv, tuple) or len(sv) != 2:
                    raise EvalError("pair match on a non-pair")
                return self.eval(body, {**env, x: sv[0], y: sv[1]}, kenv)
            case MatchSum(s, clauses):
                sv = self.eval_value(s, env, kenv)
                if not isinstance(sv, VInj):
                    raise EvalError("sum match on a non-injection")
                for l, x, b in clauses:
                    if l == sv.label:
                        return self.eval(b, {**env, x: sv.payload}, kenv)
                raise EvalError(f"no match clause for label {sv.label!r}")
            case OpApp(op, p, x, arity, body):
                pv = self.eval_value(p, env, kenv)
                if arity is None:
                    arity = self.env.signature.ops[op][1]
                return COp(op, pv, arity,
                           lambda w: self.eval(body, {**env, x: w}, kenv))
            case ContCall(k, arg):
                if k not in kenv:
                    raise EvalError(f"unbound continuation {k!r}")
                return kenv[k](self.eval_value(arg, env, kenv))
            case Handle(body, h, x, _annot, cont):
                t = as_tree(self.eval(body, env, kenv))
                return self.handle_tree(t, h, x, cont, env, kenv)
            case Fix(x, _annot, body):
                return self.eval(body, {**env, x: Thunk(m, env, kenv)}, kenv)
            case Ascribe(sub, _):
                return self.eval(sub, env, kenv)
        raise EvalError(f"cannot evaluate computation {type(m).__name__}")

    def handle_tree(self, t: CompTree, h: Handler, x: str, cont: CompTerm,
                    env: dict, kenv: dict) -> SemComp:
        """The induced walk: leaves feed the continuation, nodes run the
        matching clause with the resumption handling the subtrees."""
        self.fuel.spend()
        match t:
            case TReturn(v):
                return self.eval(cont, {**env, x: v}, kenv)
            case TOpNode():
                cl = h.clause(t.op)
                if cl is None:
                    raise EvalError(f"handler has no clause for {t.op!r}")

                def resume(w: SemValue) -> SemComp:
                    return self.handle_tree(t.branch(w), h, x, cont, env, kenv)

                return self.eval(cl.body, {**env, cl.param_var: t.param},
                                 {**kenv, cl.k_var: resume})
        raise EvalError("bad tree")

    def run(self, m: CompTerm) -> SemComp:
        return self.eval(m, {}, {})


# ---------------------------------------------------------------------------
# Observing trees
# ---------------------------------------------------------------------------


@dataclass
class RLeaf:
    value: SemValue


@dataclass
class RNode:
    op: str
    param: SemValue
    children: list  # (arity element as SemValue, reified subtree)


@dataclass
class RUnexpanded:
    """A node whose arity cannot be enumerated (nat with no finite size)."""

    op: str
    param: SemValue


@dataclass
class RDepth:
    """Cut off by the depth bound."""


def reify(tree: CompTree, interp: Interpretation, depth: int = 12):
    if depth <= 0:
        return RDepth()
    match tree:
        case TReturn(v):
            return RLeaf(v)
        case TOpNode():
            dom = enumerate_type(interp, tree.arity)
            if dom is None:
                return RUnexpanded(tree.op, tree.param)
            kids = []
            for e in dom:
                w = sem_of_element(tree.arity, e)
                kids.append((w, reify(tree.branch(w), interp, depth - 1)))
            return RNode(tree.op, tree.param, kids)
    raise EvalError("bad tree")


def tree_eq(t1: CompTree, t2: CompTree, interp: Interpretation,
            depth: int = 64, nat_probe: int = 8) -> Optional[bool]:
    """Compare two trees up to a depth bound.  None means the bound (or an
    infinite arity, probed only up to ``nat_probe``) prevented a verdict."""
    if depth <= 0:
        return None
    match t1, t2:
        case TReturn(a), TReturn(b):
            return sem_value_eq(a, b)
        case TOpNode(), TOpNode():
            if t1.op != t2.op or t1.arity != t2.arity:
                return False
            if sem_value_eq(t1.param, t2.param) is not True:
                return False
            dom = enumerate_type(interp, t1.arity)
            certain = True
            if dom is None:
                dom = list(range(nat_probe))
                certain = False
            out: Optional[bool] = True if certain else None
            for e in dom:
                w = sem_of_element(t1.arity, e)
                sub = tree_eq(t1.branch(w), t2.branch(w), interp,
                              depth - 1, nat_probe)
                if sub is False:
                    return False
                if sub is None:
                    out = None
            return out
    return False


# ---------------------------------------------------------------------------
# Rendering computation trees
# ---------------------------------------------------------------------------


def value_of_sem(v) -> ValueTerm:
    """Rebuild a closed value term from a first-order semantic value.
    Thunks have no closed syntax and are rejected."""
    match v:
        case int(n):
            return NatLit(n)
        case str(s):
            return EnumConst("", s)
        case ():
            return UnitV()
        case (*_,):
            out = value_of_sem(v[0])
            for item in v[1:]:
                out = Pair(out, value_of_sem(item))
            return out
        case VInj(l, p):
            return Inj(l, value_of_sem(p))
    raise EvalError(f"no value syntax for {v!r}")


def format_tree(t, interp: Interpretation, depth: int = 16) -> str:
    """Render a computation tree in the finitary application style,
    ``op!(param)(branch0, branch1, …)``, which parses back to the same
    tree.  Branches beyond ``depth`` render as ``...``."""
    from .printer import print_value

    if depth <= 0:
        return "..."
    match t:
        case TReturn(v):
            return "return " + print_value(value_of_sem(v))
        case TOpNode():
            param = "" if t.param == () else print_value(value_of_sem(t.param))
            elems = enumerate_type(interp, t.arity)
            if elems is None:
                return f"{t.op}!({param})(...)"
            subs = [format_tree(t.branch(sem_of_element(t.arity, e)),
                                interp, depth - 1)
                    for e in elems]
            return f"{t.op}!({param})(" + ", ".join(subs) + ")"
    raise EvalError(f"not a tree: {t!r}")


def tree_json(t, interp: Interpretation, depth: int = 16):
    """Tree as nested objects: ``{op, param, branches}`` for nodes,
    ``{return, value}`` for leaves, ``{truncated}`` past the depth."""
    from .printer import print_value

    if depth <= 0:
        return {"truncated": True}
    match t:
        case TReturn(v):
            return {"return": True, "value": print_value(value_of_sem(v))}
        case TOpNode():
            param = print_value(value_of_sem(t.param))
            elems = enumerate_type(interp, t.arity)
            if elems is None:
                return {"op": t.op, "param": param, "branches": None}
            return {"op": t.op, "param": param,
                    "branches": [tree_json(t.branch(sem_of_element(t.arity, e)),
                                           interp, depth - 1)
                                 for e in elems]}
    raise EvalError(f"not a tree: {t!r}")
