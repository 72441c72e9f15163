"""Effect theories: templates, equations, interpretations, and models.

A template is the restricted computation shape allowed in theory equations:
a continuation variable applied to a value, a pair or sum match, or an
operation applied to a tuple of templates.  An effect theory is a named set
of template equations over a signature.

Interpretations assign finite carriers to base types so signature types can
be enumerated; models additionally interpret the operations, which lets us
check whether equations hold.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional, Union

from .ast import (
    Base, BOOL, BUILTIN_FUNS, CompTerm, ContCall, EnumConst, Inj,
    MatchPair, MatchSum, NatLit, OpApp, Pair, ProdT, Signature, SignatureType,
    SumT, FunApp, UnitT, UnitV, ValueTerm, Var,
)
from .errors import EvalError, StaticError

# ---------------------------------------------------------------------------
# Templates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TVar:
    """A continuation variable applied to a value: ``z(V)``."""

    z: str
    arg: ValueTerm


@dataclass(frozen=True)
class TMatchPair:
    scrut: ValueTerm
    fst_var: str
    snd_var: str
    body: "Template"


@dataclass(frozen=True)
class TMatchSum:
    scrut: ValueTerm
    clauses: tuple[tuple[str, str, "Template"], ...]


@dataclass(frozen=True)
class TOp:
    op: str
    param: ValueTerm
    var: str
    body: "Template"


Template = Union[TVar, TMatchPair, TMatchSum, TOp]


def template_of_comp(m: CompTerm) -> Template:
    """View a core computation as a template, or fail."""
    match m:
        case ContCall(k, arg):
            return TVar(k, arg)
        case MatchPair(s, x, y, body):
            return TMatchPair(s, x, y, template_of_comp(body))
        case MatchSum(s, clauses):
            return TMatchSum(s, tuple((l, x, template_of_comp(b))
                                      for l, x, b in clauses))
        case OpApp(op, p, x, _annot, body):
            return TOp(op, p, x, template_of_comp(body))
    raise StaticError(
        f"not a template: {type(m).__name__} is not allowed in theory equations",
        getattr(m, "span", None))


def comp_of_template(sig: Signature, t: Template) -> CompTerm:
    match t:
        case TVar(z, arg):
            return ContCall(z, arg)
        case TMatchPair(s, x, y, body):
            return MatchPair(s, x, y, comp_of_template(sig, body))
        case TMatchSum(s, clauses):
            return MatchSum(s, tuple((l, x, comp_of_template(sig, b))
                                     for l, x, b in clauses))
        case TOp(op, p, x, body):
            arity = sig.ops[op][1] if op in sig.ops else None
            return OpApp(op, p, x, arity, comp_of_template(sig, body))
    raise ValueError(f"bad template {t!r}")


def template_zvars(t: Template) -> frozenset[str]:
    match t:
        case TVar(z, _):
            return frozenset({z})
        case TMatchPair(_, _, _, body) | TOp(_, _, _, body):
            return template_zvars(body)
        case TMatchSum(_, clauses):
            out: frozenset[str] = frozenset()
            for _, _, b in clauses:
                out |= template_zvars(b)
            return out
    raise ValueError(f"bad template {t!r}")


def template_ops(t: Template) -> frozenset[str]:
    match t:
        case TVar(_, _):
            return frozenset()
        case TMatchPair(_, _, _, body):
            return template_ops(body)
        case TMatchSum(_, clauses):
            out: frozenset[str] = frozenset()
            for _, _, b in clauses:
                out |= template_ops(b)
            return out
        case TOp(op, _, _, body):
            return frozenset({op}) | template_ops(body)
    raise ValueError(f"bad template {t!r}")


# ---------------------------------------------------------------------------
# Typing of signature values and templates
# ---------------------------------------------------------------------------


def infer_sig_value(sig: Signature, ctx: dict[str, SignatureType],
                    v: ValueTerm) -> SignatureType:
    match v:
        case Var(x):
            if x not in ctx:
                raise StaticError(f"unbound variable {x!r}", v.span)
            return ctx[x]
        case NatLit(_):
            return Base("nat")
        case EnumConst(base, _):
            return Base(base)
        case UnitV():
            return UnitT()
        case Pair(a, b):
            return ProdT(infer_sig_value(sig, ctx, a), infer_sig_value(sig, ctx, b))
        case Inj(_, _):
            raise StaticError("cannot infer the sum type of an injection", v.span)
        case FunApp(f, arg):
            if f in ("+", "-"):
                check_sig_value(sig, ctx, arg, ProdT(Base("nat"), Base("nat")))
                return Base("nat")
            if f in ("<", "<="):
                check_sig_value(sig, ctx, arg, ProdT(Base("nat"), Base("nat")))
                return BOOL
            if f in ("==", "!="):
                t = infer_sig_value(sig, ctx, arg)
                if not isinstance(t, ProdT) or t.fst != t.snd:
                    raise StaticError(f"{f} compares two values of one type", v.span)
                return BOOL
            if f in ("and", "or"):
                check_sig_value(sig, ctx, arg, ProdT(BOOL, BOOL))
                return BOOL
            if f == "not":
                check_sig_value(sig, ctx, arg, BOOL)
                return BOOL
            if f in sig.funs:
                argt, rest = sig.funs[f]
                check_sig_value(sig, ctx, arg, argt)
                return rest
            raise StaticError(f"unknown function symbol {f!r}", v.span)
    raise StaticError(f"not a signature value: {type(v).__name__}",
                      getattr(v, "span", None))


def check_sig_value(sig: Signature, ctx: dict[str, SignatureType],
                    v: ValueTerm, expected: SignatureType):
    match v, expected:
        case Inj(l, p), SumT(cases):
            for cl, ct in cases:
                if cl == l:
                    check_sig_value(sig, ctx, p, ct)
                    return
            raise StaticError(f"label {l!r} is not a case of {expected}", v.span)
        case Inj(_, _), _:
            raise StaticError(f"injection where {expected} expected", v.span)
        case Pair(a, b), ProdT(ta, tb):
            check_sig_value(sig, ctx, a, ta)
            check_sig_value(sig, ctx, b, tb)
        case _:
            got = infer_sig_value(sig, ctx, v)
            if got != expected:
                raise StaticError(f"expected {expected}, found {got}",
                                  getattr(v, "span", None))


def check_template(sig: Signature, ctx: dict[str, SignatureType],
                   zctx: dict[str, SignatureType], t: Template):
    """Check a template under value context ``ctx`` and continuation-variable
    context ``zctx`` (each z maps to its argument type)."""
    match t:
        case TVar(z, arg):
            if z not in zctx:
                raise StaticError(f"unbound template variable {z!r}",
                                  getattr(arg, "span", None))
            check_sig_value(sig, ctx, arg, zctx[z])
        case TMatchPair(s, x, y, body):
            st = infer_sig_value(sig, ctx, s)
            if not isinstance(st, ProdT):
                raise StaticError(f"pair match on non-product {st}",
                                  getattr(s, "span", None))
            check_template(sig, {**ctx, x: st.fst, y: st.snd}, zctx, body)
        case TMatchSum(s, clauses):
            st = infer_sig_value(sig, ctx, s)
            if not isinstance(st, SumT):
                raise StaticError(f"sum match on non-sum {st}",
                                  getattr(s, "span", None))
            want = set(st.labels)
            got = {l for l, _, _ in clauses}
            if want != got:
                raise StaticError(
                    f"match covers {sorted(got)}, scrutinee has {sorted(want)}",
                    getattr(s, "span", None))
            for l, x, b in clauses:
                check_template(sig, {**ctx, x: st.case(l)}, zctx, b)
        case TOp(op, p, x, body):
            if op not in sig.ops:
                raise StaticError(f"unknown operation {op!r}", None)
            pt, at = sig.ops[op]
            check_sig_value(sig, ctx, p, pt)
            check_template(sig, {**ctx, x: at}, zctx, body)
        case _:
            raise ValueError(f"bad template {t!r}")


# ---------------------------------------------------------------------------
# Theories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TemplateEquation:
    vctx: tuple[tuple[str, SignatureType], ...]
    zctx: tuple[tuple[str, SignatureType], ...]
    lhs: Template
    rhs: Template


@dataclass(frozen=True)
class EffectTheory:
    name: str
    signature: Signature = field(compare=False)
    equations: tuple[TemplateEquation, ...] = ()

    @property
    def ops_used(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for eq in self.equations:
            out |= template_ops(eq.lhs) | template_ops(eq.rhs)
        return out


def wf_theory(th: EffectTheory):
    for eq in th.equations:
        ctx = dict(eq.vctx)
        zctx = dict(eq.zctx)
        check_template(th.signature, ctx, zctx, eq.lhs)
        check_template(th.signature, ctx, zctx, eq.rhs)
        stray = (template_zvars(eq.lhs) | template_zvars(eq.rhs)) - set(zctx)
        if stray:
            raise StaticError(f"equation uses undeclared template vars {sorted(stray)}")


def make_theory(env, name: str, raw_equations) -> EffectTheory:
    """Build a checked theory from parsed equations; ``env`` is a
    ``desugar.ProgramEnv``."""
    from . import desugar

    eqs = []
    for raw in raw_equations:
        vctx, zctx, lhs_c, rhs_c = desugar.make_equation(env, raw)
        lhs = template_of_comp(lhs_c)
        rhs = template_of_comp(rhs_c)
        eqs.append(TemplateEquation(vctx, zctx, lhs, rhs))
    th = EffectTheory(name, env.signature, tuple(eqs))
    wf_theory(th)
    return th


# ---------------------------------------------------------------------------
# Interpretations: finite carriers for signature types
# ---------------------------------------------------------------------------
#
# Elements are encoded as plain hashable data:
#   enum element  -> its name (str)
#   natural       -> int
#   unit          -> ()
#   pair          -> (a, b)
#   injection     -> (label, payload)


Element = object


@dataclass
class Interpretation:
    base_elems: dict[str, tuple[str, ...]]
    nat_size: Optional[int] = None
    fun_tables: dict[str, dict] = field(default_factory=dict)


def make_interpretation(env, nat_size: Optional[int] = None) -> Interpretation:
    """Interpret the bases and function tables of a ``desugar.ProgramEnv``."""
    bases = {name: info.elements for name, info in env.signature.bases.items()
             if info.elements is not None}
    interp = Interpretation(bases, nat_size if nat_size is not None else env.nat_size)
    for f, entries in env.fun_tables.items():
        table = {}
        for k, v in entries:
            ke = interp_sig_value(interp, k, {})
            if ke in table:
                raise StaticError(f"function {f!r} lists {ke!r} twice")
            table[ke] = interp_sig_value(interp, v, {})
        interp.fun_tables[f] = table
        argt, _ = env.signature.funs[f]
        dom = enumerate_type(interp, argt)
        if dom is not None:
            missing = [d for d in dom if d not in table]
            if missing:
                raise StaticError(
                    f"function {f!r} has no entry for {missing[0]!r}")
    return interp


def encode_nat(interp: Interpretation, n: int) -> int:
    if interp.nat_size is not None:
        return min(n, interp.nat_size - 1)
    return n


def enumerate_type(interp: Interpretation, t: SignatureType) -> Optional[list]:
    """All elements of a signature type, or None when it is infinite."""
    match t:
        case Base("nat"):
            if interp.nat_size is None:
                return None
            return list(range(interp.nat_size))
        case Base(name):
            if name not in interp.base_elems:
                raise StaticError(f"base type {name!r} has no interpretation")
            return list(interp.base_elems[name])
        case UnitT():
            return [()]
        case ProdT(a, b):
            da, db = enumerate_type(interp, a), enumerate_type(interp, b)
            if da is None or db is None:
                return None
            return [(x, y) for x in da for y in db]
        case SumT(cases):
            out = []
            for l, ct in cases:
                dc = enumerate_type(interp, ct)
                if dc is None:
                    return None
                out.extend((l, x) for x in dc)
            return out
    return None


def value_of_element(t: SignatureType, e: Element) -> ValueTerm:
    """A closed value term denoting an element: the left inverse of
    ``interp_sig_value`` used to print and to replay instances."""
    match t:
        case Base("nat"):
            return NatLit(e)
        case Base(name):
            return EnumConst(name, e)
        case UnitT():
            return UnitV()
        case ProdT(a, b):
            return Pair(value_of_element(a, e[0]), value_of_element(b, e[1]))
        case SumT():
            l, p = e
            return Inj(l, value_of_element(t.case(l), p))
    raise ValueError(f"no element syntax at type {t!r}")


_TRUE = ("true", ())
_FALSE = ("false", ())


def _encode_bool(b: bool):
    return _TRUE if b else _FALSE


def _apply_builtin(interp: Interpretation, f: str, a: Element) -> Element:
    match f:
        case "+":
            return encode_nat(interp, a[0] + a[1])
        case "-":
            return encode_nat(interp, max(a[0] - a[1], 0))
        case "<":
            return _encode_bool(a[0] < a[1])
        case "<=":
            return _encode_bool(a[0] <= a[1])
        case "==":
            return _encode_bool(a[0] == a[1])
        case "!=":
            return _encode_bool(a[0] != a[1])
        case "and":
            return _encode_bool(a[0] == _TRUE and a[1] == _TRUE)
        case "or":
            return _encode_bool(a[0] == _TRUE or a[1] == _TRUE)
        case "not":
            return _encode_bool(a == _FALSE)
    raise EvalError(f"unknown builtin {f!r}")


def interp_sig_value(interp: Interpretation, v: ValueTerm,
                     assignment: dict[str, Element]) -> Element:
    match v:
        case Var(x):
            if x not in assignment:
                raise EvalError(f"unbound variable {x!r}")
            return assignment[x]
        case NatLit(n):
            return encode_nat(interp, n)
        case EnumConst(_, name):
            return name
        case UnitV():
            return ()
        case Pair(a, b):
            return (interp_sig_value(interp, a, assignment),
                    interp_sig_value(interp, b, assignment))
        case Inj(l, p):
            return (l, interp_sig_value(interp, p, assignment))
        case FunApp(f, arg):
            a = interp_sig_value(interp, arg, assignment)
            if f in BUILTIN_FUNS:
                return _apply_builtin(interp, f, a)
            table = interp.fun_tables.get(f)
            if table is None:
                raise EvalError(f"function {f!r} has no table to evaluate with")
            if a not in table:
                raise EvalError(f"function {f!r} is undefined at {a!r}")
            return table[a]
    raise EvalError(f"not a signature value: {type(v).__name__}")


ApplyOp = Callable[[str, Element, Callable[[Element], object]], object]


def interp_template(interp: Interpretation, t: Template,
                    assignment: dict[str, Element],
                    branches: dict[str, Callable[[Element], object]],
                    apply_op: ApplyOp):
    """Evaluate a template: value variables from ``assignment``, continuation
    variables from ``branches``, operations through ``apply_op``."""
    match t:
        case TVar(z, arg):
            return branches[z](interp_sig_value(interp, arg, assignment))
        case TMatchPair(s, x, y, body):
            a, b = interp_sig_value(interp, s, assignment)
            return interp_template(interp, body, {**assignment, x: a, y: b},
                                   branches, apply_op)
        case TMatchSum(s, clauses):
            l, p = interp_sig_value(interp, s, assignment)
            for cl, x, body in clauses:
                if cl == l:
                    return interp_template(interp, body, {**assignment, x: p},
                                           branches, apply_op)
            raise EvalError(f"no match clause for label {l!r}")
        case TOp(op, param, x, body):
            p = interp_sig_value(interp, param, assignment)
            return apply_op(op, p, lambda b: interp_template(
                interp, body, {**assignment, x: b}, branches, apply_op))
    raise ValueError(f"bad template {t!r}")


# ---------------------------------------------------------------------------
# Models: carriers plus operation interpretations
# ---------------------------------------------------------------------------


@dataclass
class Model:
    """A finite model: a carrier and, for each operation, a function from a
    parameter element and a branch map (arity element -> carrier element) to
    a carrier element."""

    name: str
    carrier: tuple
    ops: dict[str, Callable]
    leaf: Optional[Callable] = None  # result element -> carrier element

    def apply_op(self, op: str, param: Element, branch: Callable):
        if op not in self.ops:
            raise EvalError(f"model {self.name!r} does not interpret {op!r}")
        return self.ops[op](param, branch)


@dataclass(frozen=True)
class EquationFailure:
    """A concrete falsification of an equation in a model."""

    equation_index: int
    assignment: tuple
    branches: tuple
    lhs_value: object
    rhs_value: object


def _branch_spaces(interp: Interpretation, carrier, zctx,
                   max_exhaustive: int, samples: int, rng: random.Random):
    """Yield dicts mapping each template variable to a branch table.  When
    the full function space is small, enumerate it; otherwise sample."""
    domains = []
    for z, t in zctx:
        d = enumerate_type(interp, t)
        if d is None:
            raise StaticError(f"template variable {z!r} has infinite arity {t}")
        domains.append((z, d))
    total = 1
    for _, d in domains:
        total *= len(carrier) ** len(d)
        if total > max_exhaustive:
            break
    if total <= max_exhaustive:
        spaces = [[dict(zip(d, vals)) for vals in
                   itertools.product(carrier, repeat=len(d))] for _, d in domains]
        for combo in itertools.product(*spaces):
            yield {z: table for (z, _), table in zip(domains, combo)}
    else:
        for _ in range(samples):
            yield {z: {x: rng.choice(carrier) for x in d} for z, d in domains}
        # constant branches catch most algebraic failures
        for c in rng.sample(carrier, min(len(carrier), 16)):
            yield {z: {x: c for x in d} for z, d in domains}


def equation_holds(interp: Interpretation, model: Model, eq: TemplateEquation,
                   index: int = 0, max_exhaustive: int = 200_000,
                   samples: int = 64, seed: int = 0) -> Optional[EquationFailure]:
    """None when the equation holds on every checked assignment; otherwise a
    falsifying witness.  Small branch spaces are checked exhaustively."""
    rng = random.Random(seed)
    vdomains = []
    for x, t in eq.vctx:
        d = enumerate_type(interp, t)
        if d is None:
            raise StaticError(f"variable {x!r} ranges over infinite type {t}")
        vdomains.append(d)
    names = [x for x, _ in eq.vctx]
    for combo in itertools.product(*vdomains):
        assignment = dict(zip(names, combo))
        for tables in _branch_spaces(interp, model.carrier, eq.zctx,
                                     max_exhaustive, samples, rng):
            branches = {z: tb.__getitem__ for z, tb in tables.items()}
            lv = interp_template(interp, eq.lhs, assignment, branches,
                                 model.apply_op)
            rv = interp_template(interp, eq.rhs, assignment, branches,
                                 model.apply_op)
            if lv != rv:
                return EquationFailure(
                    index, tuple(sorted(assignment.items())),
                    tuple(sorted((z, tuple(sorted(tb.items())))
                                 for z, tb in tables.items())),
                    lv, rv)
    return None


def theory_holds(interp: Interpretation, model: Model, th: EffectTheory,
                 **kw) -> Optional[EquationFailure]:
    for i, eq in enumerate(th.equations):
        fail = equation_holds(interp, model, eq, index=i, **kw)
        if fail is not None:
            return fail
    return None


# ---------------------------------------------------------------------------
# Intended models for the builtin theories (used by the test suite)
# ---------------------------------------------------------------------------


def state_model(interp: Interpretation, results=(0, 1)) -> Model:
    """State transformers s -> (s', r) over the interpreted locations and a
    small result set."""
    locs = list(interp.base_elems["loc"])
    if interp.nat_size is None:
        raise StaticError("state model needs a finite nat")
    vals = list(range(interp.nat_size))
    states = [tuple(zip(locs, combo))
              for combo in itertools.product(vals, repeat=len(locs))]

    def freeze(f):
        return tuple(sorted(f.items()))

    carrier = tuple(freeze(dict(zip(states, outs)))
                    for outs in itertools.product(
                        [(s, r) for s in states for r in results],
                        repeat=len(states)))

    def get(l, branch):
        out = {}
        for s in states:
            out[s] = dict(branch(dict(s)[l]))[s]
        return freeze(out)

    def set_(param, branch):
        l, v = param
        out = {}
        for s in states:
            s2 = tuple((k, v if k == l else old) for k, old in s)
            out[s] = dict(branch(()))[s2]
        return freeze(out)

    return Model("state-transformers", carrier, {"get": get, "set": set_},
                 leaf=lambda r: freeze({s: (s, r) for s in states}))


def destructive_model(interp: Interpretation, results=(0,)) -> Model:
    """State transformers that may abort: s -> ('ok', (s', r)) | ('exc', e)."""
    locs = list(interp.base_elems["loc"])
    excs = list(interp.base_elems["exc"])
    if interp.nat_size is None:
        raise StaticError("destructive model needs a finite nat")
    vals = list(range(interp.nat_size))
    states = [tuple(zip(locs, combo))
              for combo in itertools.product(vals, repeat=len(locs))]
    outcomes = ([("ok", (s, r)) for s in states for r in results]
                + [("exc", e) for e in excs])

    def freeze(f):
        return tuple(sorted(f.items()))

    carrier = tuple(freeze(dict(zip(states, outs)))
                    for outs in itertools.product(outcomes, repeat=len(states)))

    def get(l, branch):
        return freeze({s: dict(branch(dict(s)[l]))[s] for s in states})

    def set_(param, branch):
        l, v = param
        out = {}
        for s in states:
            s2 = tuple((k, v if k == l else old) for k, old in s)
            out[s] = dict(branch(()))[s2]
        return freeze(out)

    def raise_(e, _branch):
        return freeze({s: ("exc", e) for s in states})

    return Model("aborting-state-transformers", carrier,
                 {"get": get, "set": set_, "raise": raise_},
                 leaf=lambda r: freeze({s: ("ok", (s, r)) for s in states}))


def powerset_model(interp: Interpretation, base=(0, 1), with_empty=False) -> Model:
    """Finite sets of results; ``choose`` is union, ``fail`` (and ``nil``)
    the empty set.  Without the empty set this models plain nondeterminism."""
    subsets = []
    for r in range(0 if with_empty else 1, len(base) + 1):
        subsets.extend(frozenset(c) for c in itertools.combinations(base, r))
    ops = {"choose": lambda _p, br: br(("1", ())) | br(("2", ()))}
    if with_empty:
        ops["fail"] = lambda _p, _br: frozenset()
        ops["nil"] = lambda _p, _br: frozenset()
    return Model("powerset", tuple(subsets), ops,
                 leaf=lambda r: frozenset({r}))


def time_model(interp: Interpretation) -> Model:
    """The saturating additive action of nat on itself."""
    if interp.nat_size is None:
        raise StaticError("time model needs a finite nat")
    n = interp.nat_size
    carrier = tuple(range(n))
    return Model("delay-monoid", carrier,
                 {"delay": lambda t, br: min(t + br(()), n - 1)})


def exceptions_model(interp: Interpretation, results=(0, 1)) -> Model:
    carrier = tuple(("val", r) for r in results) + tuple(
        ("exc", e) for e in interp.base_elems["exc"])
    return Model("values-plus-exceptions", carrier,
                 {"raise": lambda e, _br: ("exc", e)},
                 leaf=lambda r: ("val", r))


# ---------------------------------------------------------------------------
# Builtin theory bundles
# ---------------------------------------------------------------------------
#
# Each bundle is a plain program fragment: it declares the operations and the
# theory, but leaves the finite parameter sets (exc, loc, chr, name) to the
# surrounding program.  ``use NAME`` splices the bundle in.

_STATE_EQS = """
  eq [l : loc | z : 1] get!(l)(x. #z()) == #z()
  eq [l : loc | z : 1] get!(l)(x. set!((l, x))(#z())) == #z()
  eq [l : loc, x : nat, x2 : nat | z : 1]
    set!((l, x))(set!((l, x2))(#z())) == set!((l, x2))(#z())
  eq [l : loc, x : nat | z : nat]
    set!((l, x))(get!(l)(y. #z(y))) == set!((l, x))(#z(x))
  eq [l : loc | z : nat * nat]
    get!(l)(x. get!(l)(y. #z((x, y)))) == get!(l)(x. #z((x, x)))
  eq [l : loc, l2 : loc, x : nat, y : nat | z : 1]
    set!((l, x))(set!((l2, y))(#z())) == set!((l2, y))(set!((l, x))(#z()))
    when l != l2
  eq [l : loc, l2 : loc, x : nat | z : nat]
    set!((l, x))(get!(l2)(y. #z(y))) == get!(l2)(y. set!((l, x))(#z(y)))
    when l != l2
  eq [l : loc, l2 : loc | z : nat * nat]
    get!(l)(x. get!(l2)(y. #z((x, y)))) == get!(l2)(y. get!(l)(x. #z((x, y))))
    when l != l2
"""

_NONDET_EQS = """
  eq [ | z : 1] choose!()(#z(), #z()) == #z()
  eq [ | z1 : 1, z2 : 1] choose!()(#z1(), #z2()) == choose!()(#z2(), #z1())
  eq [ | z1 : 1, z2 : 1, z3 : 1]
    choose!()(choose!()(#z1(), #z2()), #z3())
      == choose!()(#z1(), choose!()(#z2(), #z3()))
"""

_EXPLICIT_NONDET_EQS = """
  eq [ | z1 : 1, z2 : 1, z3 : 1]
    choose!()(choose!()(#z1(), #z2()), #z3())
      == choose!()(#z1(), choose!()(#z2(), #z3()))
  eq [ | z : 1] choose!()(#z(), fail!()()) == #z()
  eq [ | z : 1] choose!()(fail!()(), #z()) == #z()
"""

BUILTIN_SOURCES = {
    "exceptions": """
op raise : exc ~> 0
theory exceptions { }
""",
    "state": f"""
op get : loc ~> nat
op set : loc * nat ~> 1
theory state {{{_STATE_EQS}}}
""",
    "read_only_state": """
op get : loc ~> nat
theory read_only_state {
  eq [l : loc | z : 1] get!(l)(x. #z()) == #z()
  eq [l : loc | z : nat * nat]
    get!(l)(x. get!(l)(y. #z((x, y)))) == get!(l)(x. #z((x, x)))
  eq [l : loc, l2 : loc | z : nat * nat]
    get!(l)(x. get!(l2)(y. #z((x, y)))) == get!(l2)(y. get!(l)(x. #z((x, y))))
    when l != l2
}
""",
    "nondeterminism": f"""
op choose : ~> 2
theory nondeterminism {{{_NONDET_EQS}}}
""",
    "explicit_nondeterminism": f"""
op choose : ~> 2
op fail : ~> 0
theory explicit_nondeterminism {{{_EXPLICIT_NONDET_EQS}}}
""",
    "io": """
op read : ~> chr
op write : chr ~> 1
theory io { }
""",
    "time": """
op delay : nat ~> 1
theory time {
  eq [ | z : 1] delay!(0)(#z()) == #z()
  eq [t1 : nat, t2 : nat | z : 1]
    delay!(t1)(delay!(t2)(#z())) == delay!(t1 + t2)(#z())
}
""",
    "ccs": f"""
type lab = [snd : name, rcv : name]
type act = [tau, vis : lab]
op nil : ~> 0
op prefix : act ~> 1
op choose : ~> 2
theory ccs {{{_NONDET_EQS}
  eq [ | z : 1] choose!()(#z(), nil!()()) == #z()
  eq [ | z : 1] choose!()(nil!()(), #z()) == #z()
}}
""",
    "destructive_exceptions": f"""
op get : loc ~> nat
op set : loc * nat ~> 1
op raise : exc ~> 0
theory destructive_exceptions {{{_STATE_EQS}
  eq [l : loc, e : exc | ] get!(l)(x. raise!(e)()) == raise!(e)()
  eq [l : loc, x : nat, e : exc | ] set!((l, x))(raise!(e)()) == raise!(e)()
}}
""",
}

_BUNDLE_NEEDS = {
    "exceptions": ("exc",),
    "state": ("loc",),
    "read_only_state": ("loc",),
    "io": ("chr",),
    "ccs": ("name",),
    "destructive_exceptions": ("loc", "exc"),
}

_DEFAULT_PRELUDES = {
    "exc": "base exc = { err }\n",
    "loc": "base loc = { l1, l2 }\n",
    "chr": "arity base chr = { a, b }\n",
    "name": "base name = { a, b }\n",
}


def builtin_source(name: str) -> str:
    key = name.replace("-", "_")
    if key not in BUILTIN_SOURCES:
        raise KeyError(name)
    return BUILTIN_SOURCES[key]


def builtin_needs(name: str) -> tuple[str, ...]:
    return _BUNDLE_NEEDS.get(name.replace("-", "_"), ())


@lru_cache(maxsize=None)
def builtin_theory(name: str):
    """A standalone (env, theory) pair for a builtin bundle, with small
    default carriers for the parameter sets the bundle leaves open."""
    from . import desugar

    key = name.replace("-", "_")
    src = "".join(_DEFAULT_PRELUDES[b] for b in builtin_needs(key))
    src += builtin_source(key)
    env = desugar.load_program(src, f"<builtin:{key}>")
    return env, env.theories[key]


def _value_alpha(a: ValueTerm, b: ValueTerm, ren: dict[str, str]) -> bool:
    match a, b:
        case Var(x), Var(y):
            return ren.get(x, x) == y
        case NatLit(m), NatLit(n):
            return m == n
        case EnumConst(ab, an), EnumConst(bb, bn):
            return ab == bb and an == bn
        case UnitV(), UnitV():
            return True
        case Pair(a1, a2), Pair(b1, b2):
            return _value_alpha(a1, b1, ren) and _value_alpha(a2, b2, ren)
        case Inj(la, pa), Inj(lb, pb):
            return la == lb and _value_alpha(pa, pb, ren)
        case FunApp(fa, aa), FunApp(fb, ba):
            return fa == fb and _value_alpha(aa, ba, ren)
    return False


def _template_alpha(t1: Template, t2: Template, vren: dict, zren: dict) -> bool:
    match t1, t2:
        case TVar(z1, v1), TVar(z2, v2):
            return zren.get(z1, z1) == z2 and _value_alpha(v1, v2, vren)
        case TMatchPair(s1, x1, y1, b1), TMatchPair(s2, x2, y2, b2):
            return (_value_alpha(s1, s2, vren)
                    and _template_alpha(b1, b2, {**vren, x1: x2, y1: y2}, zren))
        case TMatchSum(s1, cs1), TMatchSum(s2, cs2):
            if not _value_alpha(s1, s2, vren) or len(cs1) != len(cs2):
                return False
            return all(l1 == l2 and _template_alpha(b1, b2, {**vren, x1: x2}, zren)
                       for (l1, x1, b1), (l2, x2, b2) in zip(cs1, cs2))
        case TOp(o1, p1, x1, b1), TOp(o2, p2, x2, b2):
            return (o1 == o2 and _value_alpha(p1, p2, vren)
                    and _template_alpha(b1, b2, {**vren, x1: x2}, zren))
    return False


def equation_alpha_eq(e1: TemplateEquation, e2: TemplateEquation) -> bool:
    """Equality of axioms up to renaming of context variables and binders.
    Context entries must agree in order and type."""
    if len(e1.vctx) != len(e2.vctx) or len(e1.zctx) != len(e2.zctx):
        return False
    if any(t1 != t2 for (_, t1), (_, t2) in zip(e1.vctx, e2.vctx)):
        return False
    if any(t1 != t2 for (_, t1), (_, t2) in zip(e1.zctx, e2.zctx)):
        return False
    vren = {x1: x2 for (x1, _), (x2, _) in zip(e1.vctx, e2.vctx)}
    zren = {z1: z2 for (z1, _), (z2, _) in zip(e1.zctx, e2.zctx)}
    return (_template_alpha(e1.lhs, e2.lhs, vren, zren)
            and _template_alpha(e1.rhs, e2.rhs, vren, zren))


def theory_alpha_eq(a: EffectTheory, b: EffectTheory) -> bool:
    return (len(a.equations) == len(b.equations)
            and all(equation_alpha_eq(x, y)
                    for x, y in zip(a.equations, b.equations)))


def intended_model(th: EffectTheory, interp: Interpretation,
                   results: tuple) -> Optional[Model]:
    """The standard model of a builtin theory, instantiated so that its
    leaf embedding covers ``results``.  None when the theory is not
    structurally one of the builtins (a user theory that merely reuses a
    builtin name gets nothing) or has no registered model."""
    builders = {
        "state": lambda: state_model(interp, results),
        "read_only_state": lambda: state_model(interp, results),
        "destructive_exceptions": lambda: destructive_model(interp, results),
        "nondeterminism": lambda: powerset_model(interp, results),
        "explicit_nondeterminism":
            lambda: powerset_model(interp, results, with_empty=True),
        "exceptions": lambda: exceptions_model(interp, results),
    }
    build = builders.get(th.name)
    if build is None:
        return None
    try:
        _, builtin = builtin_theory(th.name)
    except KeyError:
        return None
    if not theory_alpha_eq(builtin, th):
        return None
    try:
        return build()
    except (StaticError, KeyError):
        return None

