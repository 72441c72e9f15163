"""Handler verification: decision by rewriting, refutation by evaluation.

A handler respects a theory when handling both sides of every axiom yields
equal computations.  For handlers whose clauses are built from algebraic
material only (continuation calls, matches on signature values, operation
calls) that condition compiles to first-order equational logic: the theory
is flattened over the program's finite interpretation into finitary
equations, the handler becomes an interpretation of that system in itself,
and a convergent orientation decides provability by comparing normal forms.
When the flattening or the orientation is out of reach, bounded ground
instantiation and finite counter-model search still refute broken handlers
and otherwise report budget-stamped positive evidence.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .ast import (
    ArrowT,
    Ascribe,
    CompTerm,
    CompType,
    ContCall,
    Force,
    FreeT,
    Handler,
    HandlerClause,
    App,
    FunApp,
    Inj,
    Lam,
    MatchPair,
    MatchSum,
    OpApp,
    Pair,
    Return,
    Signature,
    SignatureType,
    SumT,
    ThunkT,
    UnitT,
    ValueTerm,
    ValueType,
    Var,
    is_signature_type,
)
from .desugar import HandlerDef, ProgramEnv
from .errors import EvalError, StaticError
from .interpreter import (
    CompTree,
    Evaluator,
    Fuel,
    OutOfFuelSignal,
    Thunk,
    TOpNode,
    TReturn,
    as_tree,
    element_of_sem,
    sem_of_element,
    tree_eq,
)
from .printer import print_comp, print_ctype, print_vtype
from .rewriting import (
    OrientError,
    StepBound,
    Term,
    TRS,
    certify_convergent,
    complete,
    format_term,
    ground_equal,
    is_var,
    normalize,
    orient,
    orient_partial,
    subst_term,
    term_vars,
    var,
)
from .subst import alpha_eq, fresh, subst_continuation, subst_value
from .theories import (
    EffectTheory,
    Interpretation,
    Model,
    Template,
    TemplateEquation,
    TMatchPair,
    TMatchSum,
    TOp,
    TVar,
    check_template,
    comp_of_template,
    enumerate_type,
    intended_model,
    interp_sig_value,
    make_interpretation,
    value_of_element,
)

Element = object


# ---------------------------------------------------------------------------
# Finitary names
# ---------------------------------------------------------------------------


def element_key(e: Element) -> str:
    """A printable key for a signature element, injective at each type."""
    if e == ():
        return "()"
    if isinstance(e, tuple):
        return "(" + ",".join(element_key(x) for x in e) + ")"
    return str(e)


def fin_symbol(op: str, param_type: SignatureType, a: Element) -> str:
    """The first-order symbol standing for ``op`` at parameter ``a``."""
    if param_type == UnitT():
        return op
    return f"{op}@{element_key(a)}"


def fin_var(z: str, arity_type: SignatureType, b: Element) -> str:
    if arity_type == UnitT():
        return z
    return f"{z}@{element_key(b)}"


def _enum(interp: Interpretation, t: SignatureType) -> Optional[list]:
    try:
        return enumerate_type(interp, t)
    except StaticError:
        return None


# ---------------------------------------------------------------------------
# Finitizing a theory
# ---------------------------------------------------------------------------


class InfiniteArity(Exception):
    """A type the finitary translation must enumerate is not finite."""


@dataclass(frozen=True)
class FinEquation:
    """One axiom instance: the source axiom index, the chosen context
    elements, and the two flattened sides."""

    source_index: int
    instance: tuple[tuple[str, Element], ...]
    lhs: Term
    rhs: Term


@dataclass
class FinTheory:
    """A theory flattened over a finite interpretation: one symbol per
    (operation, parameter element) with the arity cardinality as its rank,
    one equation per axiom and context instantiation, instances whose two
    sides flatten to the same term dropped."""

    name: str
    symbols: dict[str, int]
    equations: tuple[FinEquation, ...]
    op_of_symbol: dict[str, tuple[str, Element]]
    branch_elems: dict[str, tuple]


def _fin_template(interp: Interpretation, sig: Signature, t: Template,
                  assignment: dict, zname: Callable[[str, Element], str]) -> Term:
    match t:
        case TVar(z, v):
            return var(zname(z, interp_sig_value(interp, v, assignment)))
        case TMatchPair(s, x, y, b):
            p = interp_sig_value(interp, s, assignment)
            return _fin_template(interp, sig, b,
                                 {**assignment, x: p[0], y: p[1]}, zname)
        case TMatchSum(s, clauses):
            l, p = interp_sig_value(interp, s, assignment)
            for cl, x, b in clauses:
                if cl == l:
                    return _fin_template(interp, sig, b,
                                         {**assignment, x: p}, zname)
            raise EvalError(f"no branch for label {l!r}")
        case TOp(op, v, x, b):
            pt, bt = sig.ops[op]
            a = interp_sig_value(interp, v, assignment)
            dom = _enum(interp, bt)
            if dom is None:
                raise InfiniteArity(f"operation {op!r} has an infinite arity type")
            args = tuple(_fin_template(interp, sig, b,
                                       {**assignment, x: e}, zname)
                         for e in dom)
            return ("app", fin_symbol(op, pt, a), args)
    raise ValueError(f"bad template {t!r}")


def _zname_for(zctx) -> Callable[[str, Element], str]:
    types = dict(zctx)
    return lambda z, b: fin_var(z, types[z], b)


def finitize_theory(th: EffectTheory, interp: Interpretation) -> FinTheory:
    sig = th.signature
    symbols: dict[str, int] = {}
    op_of: dict[str, tuple[str, Element]] = {}
    branch: dict[str, tuple] = {}
    for op, (pt, bt) in sig.ops.items():
        params = _enum(interp, pt)
        if params is None:
            raise InfiniteArity(
                f"operation {op!r} has an infinite parameter type")
        dom = _enum(interp, bt)
        if dom is None:
            raise InfiniteArity(f"operation {op!r} has an infinite arity type")
        for a in params:
            s = fin_symbol(op, pt, a)
            symbols[s] = len(dom)
            op_of[s] = (op, a)
            branch[s] = tuple(dom)
    out: list[FinEquation] = []
    for i, eq in enumerate(th.equations):
        names = [x for x, _ in eq.vctx]
        doms = []
        for x, t in eq.vctx:
            d = _enum(interp, t)
            if d is None:
                raise InfiniteArity(
                    f"context variable {x!r} ranges over an infinite type")
            doms.append(d)
        zname = _zname_for(eq.zctx)
        for combo in itertools.product(*doms):
            assignment = dict(zip(names, combo))
            l = _fin_template(interp, sig, eq.lhs, assignment, zname)
            r = _fin_template(interp, sig, eq.rhs, assignment, zname)
            if l != r:
                out.append(FinEquation(i, tuple(zip(names, combo)), l, r))
    return FinTheory(th.name, symbols, tuple(out), op_of, branch)


def format_fin_theory(ft: FinTheory) -> str:
    lines = [f"finitary theory {ft.name}", "symbols:"]
    for s, n in ft.symbols.items():
        lines.append(f"  {s} : {n}")
    lines.append(f"equations: {len(ft.equations)}")
    for fe in ft.equations:
        inst = ", ".join(f"{x} = {element_key(e)}" for x, e in fe.instance)
        where = f"  [axiom {fe.source_index + 1}" + (f"; {inst}]" if inst else "]")
        lines.append(f"  {format_term(fe.lhs)} = {format_term(fe.rhs)}" + where)
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# Classifying handlers into template form
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NotSimple:
    """Why a handler fell outside the template fragment."""

    reason: str


@dataclass
class SimpleHandlerTable:
    """A handler as data.

    ``value_params`` are the signature-typed handler parameters;
    ``fun_slots`` are thunk parameters of type ``U (B -> C)`` back into the
    handled type, usable as opaque continuation-like template variables; each
    operation clause is a template in which the variable ``k_zvar`` stands
    for the clause continuation."""

    at_type: CompType
    value_params: tuple[tuple[str, SignatureType], ...]
    fun_slots: tuple[tuple[str, SignatureType], ...]
    k_zvar: str
    op_templates: dict[str, tuple[str, Template]]

    def zctx(self, arity: SignatureType) -> dict[str, SignatureType]:
        out = dict(self.fun_slots)
        out[self.k_zvar] = arity
        return out


def _clause_template(cl: HandlerClause, slot_names: frozenset,
                     k_zvar: str) -> Union[Template, NotSimple]:
    def walk(m: CompTerm, bound: frozenset) -> Union[Template, NotSimple]:
        match m:
            case Ascribe(sub, _):
                return walk(sub, bound)
            case ContCall(k, v):
                if k != cl.k_var:
                    return NotSimple(f"call of foreign continuation {k!r}")
                return TVar(k_zvar, v)
            case App(Force(Var(f)), v) if f in slot_names and f not in bound:
                return TVar(f, v)
            case MatchPair(s, x, y, b):
                sub = walk(b, bound | {x, y})
                if isinstance(sub, NotSimple):
                    return sub
                return TMatchPair(s, x, y, sub)
            case MatchSum(s, clauses):
                out = []
                for l, x, b in clauses:
                    sub = walk(b, bound | {x})
                    if isinstance(sub, NotSimple):
                        return sub
                    out.append((l, x, sub))
                return TMatchSum(s, tuple(out))
            case OpApp(op, v, x, _annot, b):
                sub = walk(b, bound | {x})
                if isinstance(sub, NotSimple):
                    return sub
                return TOp(op, v, x, sub)
        return NotSimple(f"{type(m).__name__} is not template material")

    return walk(cl.body, frozenset())


def classify_simple(env: ProgramEnv,
                    hd: HandlerDef) -> Union[SimpleHandlerTable, NotSimple]:
    """Present a handler as a table of templates, or say why that fails."""
    sig = env.signature
    value_params: list[tuple[str, SignatureType]] = []
    fun_slots: list[tuple[str, SignatureType]] = []
    for name, t in hd.params:
        if is_signature_type(t):
            value_params.append((name, t))
            continue
        match t:
            case ThunkT(ArrowT(arg, res)) if res == hd.at_type and is_signature_type(arg):
                fun_slots.append((name, arg))
                continue
        return NotSimple(
            f"parameter {name} : {print_vtype(t)} is neither a signature "
            f"type nor a thunk of a function into {print_ctype(hd.at_type)}")
    taken = {n for n, _ in value_params} | {n for n, _ in fun_slots}
    k_zvar = "z"
    while k_zvar in taken:
        k_zvar += "'"
    slot_names = frozenset(n for n, _ in fun_slots)
    templates: dict[str, tuple[str, Template]] = {}
    for op, cl in hd.handler.clauses:
        got = _clause_template(cl, slot_names, k_zvar)
        if isinstance(got, NotSimple):
            return NotSimple(f"clause for {op!r}: {got.reason}")
        pt, bt = sig.ops[op]
        vctx = dict(value_params)
        vctx[cl.param_var] = pt
        zctx = dict(fun_slots)
        zctx[k_zvar] = bt
        try:
            check_template(sig, vctx, zctx, got)
        except StaticError as e:
            return NotSimple(f"clause for {op!r}: {e.message}")
        templates[op] = (cl.param_var, got)
    return SimpleHandlerTable(hd.at_type, tuple(value_params),
                              tuple(fun_slots), k_zvar, templates)


def table_to_handler(sig: Signature, table: SimpleHandlerTable) -> Handler:
    """Realize a table as a handler term, the inverse of classification up
    to alpha renaming: continuation uses become calls of the clause's
    continuation, slot uses force the slot."""

    def realize(u: Template, kvar: str) -> CompTerm:
        match u:
            case TVar(z, v) if z == table.k_zvar:
                return ContCall(kvar, v)
            case TVar(z, v):
                return App(Force(Var(z)), v)
            case TMatchPair(s, x, y, b):
                return MatchPair(s, x, y, realize(b, kvar))
            case TMatchSum(s, cls):
                return MatchSum(s, tuple((l, x, realize(b, kvar))
                                         for l, x, b in cls))
            case TOp(op2, v, x, b):
                return OpApp(op2, v, x, sig.ops[op2][1], realize(b, kvar))
        raise ValueError(f"bad template {u!r}")

    clauses = []
    for op, (pvar, t) in sorted(table.op_templates.items()):
        kvar = fresh("k")
        clauses.append((op, HandlerClause(pvar, sig.ops[op][0], kvar, None,
                                          realize(t, kvar))))
    return Handler(tuple(clauses))


# ---------------------------------------------------------------------------
# Handling a template
# ---------------------------------------------------------------------------


def _rename_sig_value(v: ValueTerm, ren: dict[str, str]) -> ValueTerm:
    match v:
        case Var(x):
            return Var(ren.get(x, x))
        case FunApp(f, a):
            return FunApp(f, _rename_sig_value(a, ren))
        case Pair(a, b):
            return Pair(_rename_sig_value(a, ren), _rename_sig_value(b, ren))
        case Inj(l, p):
            return Inj(l, _rename_sig_value(p, ren))
    return v


def freshen_template(t: Template, ren: dict[str, str]) -> Template:
    """Rename the given free value variables and freshen every binder, so a
    template can be spliced next to a handler without name clashes."""
    match t:
        case TVar(z, v):
            return TVar(z, _rename_sig_value(v, ren))
        case TMatchPair(s, x, y, b):
            x2, y2 = fresh(x), fresh(y)
            return TMatchPair(_rename_sig_value(s, ren), x2, y2,
                              freshen_template(b, {**ren, x: x2, y: y2}))
        case TMatchSum(s, cls):
            s2 = _rename_sig_value(s, ren)
            out = []
            for l, x, b in cls:
                x2 = fresh(x)
                out.append((l, x2, freshen_template(b, {**ren, x: x2})))
            return TMatchSum(s2, tuple(out))
        case TOp(op, v, x, b):
            x2 = fresh(x)
            return TOp(op, _rename_sig_value(v, ren), x2,
                       freshen_template(b, {**ren, x: x2}))
    raise ValueError(f"bad template {t!r}")


def apply_handler_to_template(h: Handler, t: Template,
                              konts: dict[str, str]) -> CompTerm:
    """The handled reading of a template: continuation variables become
    calls of the names in ``konts``, matches pass through, and an operation
    call runs its clause with the handled subtree as the resumption.

    Callers should feed templates through ``freshen_template`` first; the
    handler's clause bodies may mention its parameters free."""
    match t:
        case TVar(z, v):
            return ContCall(konts[z], v)
        case TMatchPair(s, x, y, b):
            return MatchPair(s, x, y, apply_handler_to_template(h, b, konts))
        case TMatchSum(s, cls):
            return MatchSum(s, tuple(
                (l, x, apply_handler_to_template(h, b, konts))
                for l, x, b in cls))
        case TOp(op, v, x, b):
            sub = apply_handler_to_template(h, b, konts)
            cl = h.clause(op)
            if cl is None:
                raise StaticError(f"handler lacks a clause for {op!r}")
            body = subst_value(cl.body, cl.param_var, v)
            return subst_continuation(body, cl.k_var, x, sub)
    raise ValueError(f"bad template {t!r}")


# ---------------------------------------------------------------------------
# The handler-induced interpretation of the finitary theory
# ---------------------------------------------------------------------------


@dataclass
class FinInterpretation:
    """Images of the finitary symbols under one instantiation of a handler's
    value parameters.  The branch argument at element ``b`` of a symbol
    appears in its image as the placeholder variable ``?key(b)``; thunk-slot
    uses appear as the shared free variables ``!slot@key``."""

    instance: tuple[tuple[str, Element], ...]
    images: dict[str, Term]


def handler_fin_interpretation(table: SimpleHandlerTable, sig: Signature,
                               interp: Interpretation,
                               c_h: dict[str, Element]) -> FinInterpretation:
    images: dict[str, Term] = {}
    slot_types = dict(table.fun_slots)

    def zname(z: str, b: Element) -> str:
        if z == table.k_zvar:
            return "?" + element_key(b)
        return "!" + fin_var(z, slot_types[z], b)

    for op, (pt, bt) in sig.ops.items():
        pvar, t = table.op_templates[op]
        params = _enum(interp, pt)
        dom = _enum(interp, bt)
        if params is None or dom is None:
            raise InfiniteArity(f"operation {op!r} is not finitely instantiable")
        for a in params:
            assignment = dict(c_h)
            assignment[pvar] = a
            images[fin_symbol(op, pt, a)] = _fin_template(
                interp, sig, t, assignment, zname)
    return FinInterpretation(tuple(c_h.items()), images)


def apply_fin_interpretation(fi: FinInterpretation, ft: FinTheory,
                             t: Term) -> Term:
    """Replace every symbol by its image, homomorphically.  Symbols with no
    image (foreign constants such as leaves) pass through."""
    if is_var(t):
        return t
    _, f, args = t
    args2 = tuple(apply_fin_interpretation(fi, ft, a) for a in args)
    img = fi.images.get(f)
    if img is None:
        return ("app", f, args2)
    sigma = {"?" + element_key(b): args2[i]
             for i, b in enumerate(ft.branch_elems[f])}
    return subst_term(img, sigma)


# ---------------------------------------------------------------------------
# Verdicts
# ---------------------------------------------------------------------------


@dataclass
class Witness:
    """A refutation, printable and replayable.  ``replay`` carries the terms
    or computations needed to reproduce the disagreement."""

    kind: str
    detail: str = ""
    theory: Optional[str] = None
    equation_index: Optional[int] = None
    equation: str = ""
    instance: tuple[tuple[str, str], ...] = ()
    lhs: str = ""
    rhs: str = ""
    lhs_normal: str = ""
    rhs_normal: str = ""
    replay: dict = field(default_factory=dict)


@dataclass
class Verdict:
    status: str
    method: str
    evidence: tuple[str, ...] = ()
    witness: Optional[Witness] = None

    @property
    def correct(self) -> bool:
        return self.status == "correct"


def _correct(method: str, *evidence: str) -> Verdict:
    return Verdict("correct", method, tuple(evidence))


def _incorrect(method: str, witness: Witness, *evidence: str) -> Verdict:
    return Verdict("incorrect", method, tuple(evidence), witness)


def _unknown(method: str, *evidence: str) -> Verdict:
    return Verdict("unknown", method, tuple(evidence))


@dataclass
class Budgets:
    """Bounds for the incomplete methods.  Defaults are sized so the whole
    suite of builtin theories verifies in seconds."""

    depth: int = 2
    max_model_size: int = 3
    steps: int = 10_000
    instance_fuel: int = 60_000
    max_instances_per_equation: int = 96
    max_candidates: int = 10
    tree_depth: int = 24
    model_budget: int = 400_000
    assignment_cap: int = 4096


def _render_equation(sig: Signature, eq: TemplateEquation) -> str:
    l = print_comp(comp_of_template(sig, eq.lhs))
    r = print_comp(comp_of_template(sig, eq.rhs))
    return f"{l} == {r}"


# ---------------------------------------------------------------------------
# The decision procedure
# ---------------------------------------------------------------------------


def decide_correct_uniform(table: SimpleHandlerTable, th: EffectTheory,
                           interp: Interpretation, direction: str = "auto",
                           max_steps: int = 10_000) -> Verdict:
    """Decide whether a tabled handler satisfies the theory at every
    instantiation of its parameters and slots, by normal-form comparison in
    a convergent orientation of the finitized theory.  Both answers are
    definitive; Unknown means the procedure does not apply."""
    try:
        ft = finitize_theory(th, interp)
    except InfiniteArity as e:
        return _unknown("trs", f"cannot finitize: {e}")
    try:
        trs = orient([(fe.lhs, fe.rhs) for fe in ft.equations], direction)
    except OrientError as e:
        return _unknown("trs", f"not orientable: {e}")
    doms = []
    for x, t in table.value_params:
        d = _enum(interp, t)
        if d is None:
            return _unknown("trs",
                            f"handler parameter {x!r} is not enumerable")
        doms.append(d)
    names = [x for x, _ in table.value_params]
    trivial = 0
    pending: list[tuple[FinEquation, dict, Term, Term]] = []
    for combo in itertools.product(*doms):
        c_h = dict(zip(names, combo))
        fi = handler_fin_interpretation(table, th.signature, interp, c_h)
        for fe in ft.equations:
            l2 = apply_fin_interpretation(fi, ft, fe.lhs)
            r2 = apply_fin_interpretation(fi, ft, fe.rhs)
            if l2 == r2:
                trivial += 1
            else:
                pending.append((fe, c_h, l2, r2))
    if not pending:
        return _correct(
            "trs",
            f"orientation with {len(trs.rules)} rules",
            f"all {trivial} axiom instances trivially equal under the "
            f"translated handler")
    completed = False
    if not certify_convergent(trs, max_steps):
        done = complete(trs, max_steps=max_steps)
        if done is None or not certify_convergent(done, max_steps):
            return _unknown("trs",
                            "oriented rules are not convergent and "
                            "completion did not close them")
        trs = done
        completed = True
    settled = 0
    for fe, c_h, l2, r2 in pending:
        try:
            nl = normalize(trs, l2, max_steps)
            nr = normalize(trs, r2, max_steps)
        except StepBound:
            return _unknown("trs", "normalization exceeded its step budget")
        settled += 1
        if nl != nr:
            src = th.equations[fe.source_index]
            return _incorrect("trs", Witness(
                kind="normal-forms",
                detail="the two handled sides have distinct normal forms",
                theory=th.name,
                equation_index=fe.source_index,
                equation=_render_equation(th.signature, src),
                instance=tuple((x, element_key(e)) for x, e in
                               fe.instance + tuple(c_h.items())),
                lhs=format_term(l2),
                rhs=format_term(r2),
                lhs_normal=format_term(nl),
                rhs_normal=format_term(nr),
                replay={"lhs_term": l2, "rhs_term": r2, "trs": trs,
                        "fin_theory": ft, "params": dict(c_h)}),
                f"{len(trs.rules)} convergent rules refute one axiom instance")
    how = ("completion closed the orientation into"
           if completed else "convergent orientation with")
    return _correct(
        "trs",
        f"{how} {len(trs.rules)} rules",
        f"{trivial} axiom instances trivially equal, "
        f"{settled} settled by equal normal forms")


# ---------------------------------------------------------------------------
# Bounded ground refutation
# ---------------------------------------------------------------------------


def _closed_computations(sig: Signature, interp: Interpretation,
                         result_type: ValueType, depth: int,
                         cap: int) -> list[CompTerm]:
    """Small closed computations at ``F result_type``: one leaf per result
    element, then ``depth`` layers of operations with uniform branches."""
    if not is_signature_type(result_type):
        return []
    elems = _enum(interp, result_type)
    if elems is None:
        return []
    out: list[CompTerm] = [Return(value_of_element(result_type, e))
                           for e in elems]
    level = list(out)
    for _ in range(depth):
        nxt: list[CompTerm] = []
        for op, (pt, bt) in sig.ops.items():
            if op == "div":
                continue
            params = _enum(interp, pt)
            dom = _enum(interp, bt)
            if params is None or dom is None:
                continue
            for a in params:
                pv = value_of_element(pt, a)
                y = fresh("y")
                if not dom:
                    if bt == SumT(()):
                        nxt.append(OpApp(op, pv, y, bt, MatchSum(Var(y), ())))
                    continue
                for child in level:
                    nxt.append(OpApp(op, pv, y, bt, child))
                    if len(nxt) >= cap:
                        break
        level = nxt[:cap]
        out.extend(level)
    return out[:max(cap, len(elems))]


def _encode_tree(t: CompTree, interp: Interpretation, sig: Signature,
                 result_type: ValueType, depth: int) -> Optional[Term]:
    """A tree as a ground finitary term, leaves becoming ``ret@`` constants.
    None when a bound or an infinite arity blocks the encoding."""
    if depth <= 0:
        return None
    match t:
        case TReturn(v):
            try:
                e = element_of_sem(result_type, v)
            except (EvalError, ValueError):
                return None
            return ("app", "ret@" + element_key(e), ())
        case TOpNode():
            pt, bt = sig.ops[t.op]
            dom = _enum(interp, bt)
            if dom is None:
                return None
            try:
                a = element_of_sem(pt, t.param)
            except (EvalError, ValueError):
                return None
            args = []
            for b in dom:
                sub = _encode_tree(t.branch(sem_of_element(bt, b)),
                                   interp, sig, result_type, depth - 1)
                if sub is None:
                    return None
                args.append(sub)
            return ("app", fin_symbol(t.op, pt, a), tuple(args))
    return None


class _Bail(Exception):
    pass


def _etm(t: CompTree, model: Model, interp: Interpretation, sig: Signature,
         result_type: ValueType, depth: int):
    if depth <= 0:
        raise _Bail
    match t:
        case TReturn(v):
            return model.leaf(element_of_sem(result_type, v))
        case TOpNode():
            pt, bt = sig.ops[t.op]
            a = element_of_sem(pt, t.param)
            return model.apply_op(
                t.op, a,
                lambda b: _etm(t.branch(sem_of_element(bt, b)), model,
                               interp, sig, result_type, depth - 1))
    raise _Bail


def eval_tree_in_model(t: CompTree, model: Model, interp: Interpretation,
                       sig: Signature, result_type: ValueType,
                       depth: int = 24):
    """The denotation of a tree in a model with a leaf embedding, or None
    when the model lacks an operation or the depth bound is hit."""
    if model.leaf is None:
        return None
    try:
        return _etm(t, model, interp, sig, result_type, depth)
    except (_Bail, EvalError, KeyError, ValueError):
        return None


# -- finite first-order models ----------------------------------------------


def _collect_symbols(t: Term, acc: dict[str, int]):
    if is_var(t):
        return
    _, f, args = t
    acc[f] = len(args)
    for a in args:
        _collect_symbols(a, acc)


def _eval_fin(t: Term, tables: dict[str, dict], assignment: dict[str, int]):
    if is_var(t):
        return assignment[t[1]]
    _, f, args = t
    return tables[f][tuple(_eval_fin(a, tables, assignment) for a in args)]


def _pairs_hold(pairs, tables, size: int, cap: int) -> Optional[bool]:
    """Whether every equation holds under every variable assignment; None
    when some assignment space exceeds the cap."""
    for l, r in pairs:
        vs = sorted(set(term_vars(l)) | set(term_vars(r)))
        if size ** len(vs) > cap:
            return None
        for combo in itertools.product(range(size), repeat=len(vs)):
            asg = dict(zip(vs, combo))
            if _eval_fin(l, tables, asg) != _eval_fin(r, tables, asg):
                return False
    return True


@dataclass
class CounterModel:
    """A finite model of the flattened theory on which some translated
    equation fails under the recorded assignment."""

    size: int
    tables: dict[str, dict]
    assignment: dict[str, int]
    pair: tuple[Term, Term]
    label: str = ""

    def describe(self) -> str:
        lines = [f"counter-model of size {self.size}"]
        for s in sorted(self.tables):
            entries = ", ".join(
                f"{','.join(map(str, k)) or '()'} -> {v}"
                for k, v in sorted(self.tables[s].items()))
            lines.append(f"  {s}: {entries}")
        if self.assignment:
            asg = ", ".join(f"{x} = {v}"
                            for x, v in sorted(self.assignment.items()))
            lines.append(f"  under {asg}")
        lines.append(f"  violates {format_term(self.pair[0])}"
                     f" = {format_term(self.pair[1])}")
        return "\n".join(lines)


def _model_search(axioms, pairs, max_size: int,
                  budget: int, cap: int) -> tuple[Optional[CounterModel], int]:
    """Enumerate models of ``axioms`` over the symbols of both lists and
    look for one violating some pair.  Returns the counter-model (if any)
    and the number of satisfying models checked."""
    need: dict[str, int] = {}
    for l, r in itertools.chain(axioms, pairs):
        _collect_symbols(l, need)
        _collect_symbols(r, need)
    syms = sorted(need.items())
    checked = 0
    for size in range(1, max_size + 1):
        total = 1
        for _, r in syms:
            total *= size ** (size ** r)
            if total > budget:
                break
        if total > budget:
            break
        arg_tuples = {r: list(itertools.product(range(size), repeat=r))
                      for _, r in syms}
        spaces = [itertools.product(range(size), repeat=size ** r)
                  for _, r in syms]
        for combo in itertools.product(*spaces):
            tables = {s: dict(zip(arg_tuples[r], flat))
                      for (s, r), flat in zip(syms, combo)}
            if _pairs_hold(axioms, tables, size, cap) is not True:
                continue
            checked += 1
            for l, r in pairs:
                vs = sorted(set(term_vars(l)) | set(term_vars(r)))
                if size ** len(vs) > cap:
                    continue
                for asg_combo in itertools.product(range(size),
                                                   repeat=len(vs)):
                    asg = dict(zip(vs, asg_combo))
                    if _eval_fin(l, tables, asg) != _eval_fin(r, tables, asg):
                        return CounterModel(size, tables, asg, (l, r)), checked
    return None, checked


def check_finite_models(table: SimpleHandlerTable, th: EffectTheory,
                        interp: Interpretation, ft: FinTheory,
                        budgets: Budgets) -> tuple[Optional[Witness], dict]:
    """Search every small model of the flattened theory for one where some
    translated axiom fails.  A hit is a sound refutation; exhaustion is
    bounded positive evidence."""
    report: dict = {}
    axioms = [(fe.lhs, fe.rhs) for fe in ft.equations]
    doms = []
    for x, t in table.value_params:
        d = _enum(interp, t)
        if d is None:
            report["unusable"] = f"handler parameter {x!r} is not enumerable"
            return None, report
        doms.append(d)
    names = [x for x, _ in table.value_params]
    pairs = []
    tagged = []
    for combo in itertools.product(*doms):
        c_h = dict(zip(names, combo))
        fi = handler_fin_interpretation(table, th.signature, interp, c_h)
        for fe in ft.equations:
            l2 = apply_fin_interpretation(fi, ft, fe.lhs)
            r2 = apply_fin_interpretation(fi, ft, fe.rhs)
            if l2 != r2:
                pairs.append((l2, r2))
                tagged.append((fe, tuple(c_h.items())))
    if not pairs:
        report["models"] = 0
        report["note"] = "every translated axiom is syntactically trivial"
        return None, report
    cm, checked = _model_search(axioms, pairs, budgets.max_model_size,
                                budgets.model_budget, budgets.assignment_cap)
    report["models"] = checked
    if cm is None:
        return None, report
    fe, inst = next(((fe, inst) for (fe, inst), p in zip(tagged, pairs)
                     if p == cm.pair), (None, ()))
    src = th.equations[fe.source_index] if fe is not None else None
    return Witness(
        kind="counter-model",
        detail=cm.describe(),
        theory=th.name,
        equation_index=fe.source_index if fe else None,
        equation=_render_equation(th.signature, src) if src else "",
        instance=tuple((x, element_key(e)) for x, e in
                       ((fe.instance if fe else ()) + inst)),
        lhs=format_term(cm.pair[0]),
        rhs=format_term(cm.pair[1]),
        replay={"counter_model": cm, "fin_theory": ft}), report


# -- ground instances ---------------------------------------------------------


def _compare_instance(ev: Evaluator, th: EffectTheory, interp: Interpretation,
                      result_type: ValueType, lhs_c: CompTerm,
                      rhs_c: CompTerm, venv: dict, kenv: dict,
                      ft: Optional[FinTheory], trs: Optional[TRS],
                      trs_complete: bool, model: Optional[Model],
                      budgets: Budgets,
                      unoriented: tuple[tuple[Term, Term], ...] = (),
                      ) -> tuple[Optional[bool], Optional[dict]]:
    """Compare one handled instance pair.  True and False are definitive;
    None means every rung of the ladder was inconclusive."""
    sig = th.signature
    t1 = as_tree(ev.eval(lhs_c, venv, kenv))
    t2 = as_tree(ev.eval(rhs_c, venv, kenv))
    syn = tree_eq(t1, t2, interp, depth=budgets.tree_depth)
    if syn is True:
        return True, None
    if not th.equations:
        if syn is False:
            return False, {"kind": "tree",
                           "detail": "the handled trees differ and the "
                                     "theory has no equations"}
        return None, None
    e1 = _encode_tree(t1, interp, sig, result_type, budgets.tree_depth)
    e2 = _encode_tree(t2, interp, sig, result_type, budgets.tree_depth)
    if e1 is None or e2 is None:
        return None, None
    if trs is not None:
        try:
            equal = ground_equal(trs, e1, e2, budgets.steps,
                                 extra=unoriented)
        except StepBound:
            equal = None
        if equal is True:
            return True, None
        if equal is False and trs_complete:
            nl = normalize(trs, e1, budgets.steps)
            nr = normalize(trs, e2, budgets.steps)
            return False, {"kind": "normal-forms",
                           "detail": "the handled trees have distinct "
                                     "normal forms",
                           "lhs_term": e1, "rhs_term": e2,
                           "lhs_normal": format_term(nl),
                           "rhs_normal": format_term(nr)}
    if model is not None:
        v1 = eval_tree_in_model(t1, model, interp, sig, result_type,
                                budgets.tree_depth)
        v2 = eval_tree_in_model(t2, model, interp, sig, result_type,
                                budgets.tree_depth)
        if v1 is not None and v2 is not None and v1 != v2:
            return False, {"kind": "model",
                           "detail": f"the trees denote {v1!r} and {v2!r} "
                                     f"in the standard {th.name} model",
                           "lhs_term": e1, "rhs_term": e2}
    if ft is not None:
        cm, _ = _model_search([(fe.lhs, fe.rhs) for fe in ft.equations],
                              [(e1, e2)], budgets.max_model_size,
                              budgets.model_budget, budgets.assignment_cap)
        if cm is not None:
            return False, {"kind": "counter-model",
                           "detail": cm.describe(),
                           "lhs_term": e1, "rhs_term": e2,
                           "counter_model": cm}
    return None, None


def refute_by_instances(env: ProgramEnv, hd: HandlerDef, th: EffectTheory,
                        interp: Interpretation, budgets: Budgets,
                        ft: Optional[FinTheory], trs: Optional[TRS],
                        trs_complete: bool, model: Optional[Model],
                        unoriented: tuple[tuple[Term, Term], ...] = (),
                        ) -> tuple[Optional[Witness], dict]:
    """Instantiate every axiom with small closed computations, handle both
    sides, and compare the resulting trees.  A disagreement certified by an
    empty theory, by normal forms, or by a model is a sound refutation."""
    sig = th.signature
    report: dict = {"instances": 0, "settled": 0, "undecided": 0,
                    "depth": budgets.depth}
    if not isinstance(hd.at_type, FreeT):
        report["unusable"] = "the handler is not at a returner type"
        return None, report
    result_type = hd.at_type.val
    if not is_signature_type(result_type) or _enum(interp, result_type) is None:
        report["unusable"] = "the result type is not finitely enumerable"
        return None, report
    candidates = _closed_computations(sig, interp, result_type,
                                      budgets.depth, budgets.max_candidates)

    def with_echo(arg_type: SignatureType) -> list[CompTerm]:
        # "_w" is the distinguished argument variable of a candidate; the
        # echo candidate makes refutations that need the argument possible
        out = list(candidates)
        if arg_type == result_type:
            out.append(Return(Var("_w")))
        return out

    slots: list[tuple[str, list]] = []
    for name, t in hd.params:
        if is_signature_type(t):
            d = _enum(interp, t)
            if d is None:
                report["unusable"] = f"parameter {name!r} is not enumerable"
                return None, report
            slots.append((name, [("elem", t, e) for e in d]))
            continue
        match t:
            case ThunkT(ArrowT(arg, res)) if res == hd.at_type and candidates:
                slots.append((name, [("thunk", arg, n)
                                     for n in with_echo(arg)]))
            case _:
                report["unusable"] = (f"parameter {name!r} cannot be "
                                      f"instantiated with closed candidates")
                return None, report
    h = hd.handler
    ev = Evaluator(env, nat_size=interp.nat_size)
    for idx, eq in enumerate(th.equations):
        if eq.zctx and not candidates:
            report["unusable"] = "no closed candidates for continuation variables"
            return None, report
        ren = {x: fresh(x) for x, _ in eq.vctx}
        konts = {z: fresh("k") for z, _ in eq.zctx}
        lhs_c = apply_handler_to_template(h, freshen_template(eq.lhs, ren), konts)
        rhs_c = apply_handler_to_template(h, freshen_template(eq.rhs, ren), konts)
        spaces: list[tuple[str, str, list]] = []
        usable = True
        for x, t in eq.vctx:
            d = _enum(interp, t)
            if d is None:
                report["unusable"] = f"equation variable {x!r} is not enumerable"
                usable = False
                break
            spaces.append(("eqvar", x, [(t, e) for e in d]))
        if not usable:
            return None, report
        for name, opts in slots:
            spaces.append(("param", name, opts))
        for z, zt in eq.zctx:
            spaces.append(("kont", z, with_echo(zt)))
        combos = itertools.product(*[opts for _, _, opts in spaces])
        for combo in itertools.islice(combos,
                                      budgets.max_instances_per_equation):
            venv: dict = {}
            kenv: dict = {}
            printed: list[tuple[str, str]] = []
            kont_terms: dict[str, CompTerm] = {}
            for (tag, name, _), choice in zip(spaces, combo):
                if tag == "eqvar":
                    t, e = choice
                    venv[ren[name]] = sem_of_element(t, e)
                    printed.append((name, element_key(e)))
                elif tag == "param":
                    ctag, tt, payload = choice
                    if ctag == "elem":
                        venv[name] = sem_of_element(tt, payload)
                        printed.append((name, element_key(payload)))
                    else:
                        venv[name] = Thunk(Lam("_w", tt, payload), {}, {})
                        printed.append((name, "{_w. " + print_comp(payload) + "}"))
                else:
                    term = choice
                    kont_terms[konts[name]] = term
                    kenv[konts[name]] = (
                        lambda w, term=term: ev.eval(term, {"_w": w}, {}))
                    printed.append((name, print_comp(term)))
            report["instances"] += 1
            ev.fuel = Fuel(budgets.instance_fuel)
            try:
                outcome, info = _compare_instance(
                    ev, th, interp, result_type, lhs_c, rhs_c, venv, kenv,
                    ft, trs, trs_complete, model, budgets, unoriented)
            except (OutOfFuelSignal, EvalError):
                outcome, info = None, None
            if outcome is True:
                report["settled"] += 1
            elif outcome is False:
                report["refuted"] = True
                w = Witness(
                    kind=info.get("kind", "instance"),
                    detail=info.get("detail", ""),
                    theory=th.name,
                    equation_index=idx,
                    equation=_render_equation(sig, eq),
                    instance=tuple(printed),
                    lhs=print_comp(lhs_c),
                    rhs=print_comp(rhs_c),
                    lhs_normal=info.get("lhs_normal", ""),
                    rhs_normal=info.get("rhs_normal", ""),
                    replay={"lhs_comp": lhs_c, "rhs_comp": rhs_c,
                            "venv": dict(venv), "konts": kont_terms,
                            **{k: v for k, v in info.items()
                               if k in ("lhs_term", "rhs_term",
                                        "counter_model")}})
                return w, report
            else:
                report["undecided"] += 1
    return None, report


# ---------------------------------------------------------------------------
# The driver
# ---------------------------------------------------------------------------


def _div_clause_witness(sig: Signature, h: Handler) -> Optional[Witness]:
    cl = h.clause("div")
    if cl is None:
        return None
    y = fresh("y")
    expected = OpApp("div", Var(cl.param_var), y, sig.ops["div"][1],
                     ContCall(cl.k_var, Var(y)))
    if alpha_eq(cl.body, expected):
        return None
    return Witness(kind="div-clause",
                   detail="the clause for div must re-perform div; "
                          "redefining it breaks every divergent program",
                   lhs=print_comp(cl.body),
                   rhs=print_comp(expected))


def verify_handler(env: ProgramEnv, hd: HandlerDef, th: EffectTheory,
                   interp: Optional[Interpretation] = None,
                   method: str = "auto",
                   budgets: Optional[Budgets] = None,
                   direction: str = "auto") -> Verdict:
    """Judge a handler against a theory.

    ``method`` selects the machinery: "trs" runs only the decision
    procedure, "instances" only bounded ground refutation, "models" only
    finite counter-model search, and "auto" tries the decision procedure
    first and falls back to the bounded methods, merging their evidence.
    Correct from "trs" is definitive; Correct from the bounded methods is
    stamped with the budgets that produced it."""
    budgets = budgets or Budgets()
    if interp is None:
        interp = make_interpretation(env)
    w = _div_clause_witness(env.signature, hd.handler)
    if w is not None:
        return _incorrect("static", w,
                          "the divergence placeholder is not handled by itself")
    if not th.equations:
        return _correct("empty-theory",
                        "the theory has no equations; any handler defining "
                        "every operation satisfies it")
    table = classify_simple(env, hd)
    simple = not isinstance(table, NotSimple)

    if method == "trs":
        if not simple:
            return _unknown("trs", f"not a simple handler: {table.reason}")
        return decide_correct_uniform(table, th, interp, direction,
                                      budgets.steps)

    decision: Optional[Verdict] = None
    if method == "auto" and simple:
        decision = decide_correct_uniform(table, th, interp, direction,
                                          budgets.steps)
        if decision.status != "unknown":
            return decision

    try:
        ft: Optional[FinTheory] = finitize_theory(th, interp)
    except InfiniteArity:
        ft = None
    trs = None
    trs_complete = False
    unoriented: tuple[tuple[Term, Term], ...] = ()
    if ft is not None:
        trs, skipped = orient_partial([(fe.lhs, fe.rhs)
                                       for fe in ft.equations])
        unoriented = tuple(skipped)
        if not skipped:
            if certify_convergent(trs, budgets.steps):
                trs_complete = True
            else:
                done = complete(trs, max_steps=budgets.steps)
                if done is not None and certify_convergent(done, budgets.steps):
                    trs = done
                    trs_complete = True
    model = intended_model(th, interp, ())

    inst_witness: Optional[Witness] = None
    inst_report: dict = {"unusable": "not attempted"}
    if method in ("auto", "instances"):
        inst_witness, inst_report = refute_by_instances(
            env, hd, th, interp, budgets, ft, trs, trs_complete, model,
            unoriented)
        if inst_witness is not None:
            return _incorrect("instances", inst_witness,
                              _instances_note(inst_report))

    model_witness: Optional[Witness] = None
    model_report: dict = {"unusable": "not attempted"}
    if method in ("auto", "models"):
        if not simple:
            model_report = {"unusable": f"not a simple handler: {table.reason}"}
        elif ft is None:
            model_report = {"unusable": "the theory cannot be finitized"}
        else:
            model_witness, model_report = check_finite_models(
                table, th, interp, ft, budgets)
            if model_witness is not None:
                return _incorrect("models", model_witness,
                                  _models_note(model_report, budgets))

    if method == "models":
        if model_report.get("unusable"):
            return _unknown("models", model_report["unusable"])
        return _unknown("models", _models_note(model_report, budgets),
                        "counter-model search alone cannot certify correctness")

    inst_ok = (not inst_report.get("unusable")
               and inst_report.get("undecided") == 0
               and inst_report.get("instances", 0) > 0)
    models_ran = not model_report.get("unusable")

    if method == "instances":
        if inst_report.get("unusable"):
            return _unknown("instances", inst_report["unusable"])
        if inst_ok:
            return _correct("instances", _instances_note(inst_report))
        return _unknown("instances", _instances_note(inst_report))

    evidence: list[str] = []
    if decision is not None:
        evidence.extend(decision.evidence)
    evidence.append(_instances_note(inst_report))
    evidence.append(_models_note(model_report, budgets))
    if inst_ok and (models_ran or not simple or ft is None):
        method_used = "instances+models" if models_ran else "instances"
        return _correct(method_used, *evidence)
    return _unknown("auto", *evidence)


def _instances_note(report: dict) -> str:
    if report.get("unusable"):
        return f"instances: unusable ({report['unusable']})"
    n, s, u = report["instances"], report["settled"], report["undecided"]
    d = report["depth"]
    if report.get("refuted"):
        return f"instances: ground instance {n} refuted an axiom (depth {d})"
    if u == 0 and n > 0:
        return f"instances: all {n} ground instances to depth {d} hold"
    return (f"instances: {s} of {n} ground instances to depth {d} hold, "
            f"{u} undecided")


def _models_note(report: dict, budgets: Budgets) -> str:
    if report.get("unusable"):
        return f"models: unusable ({report['unusable']})"
    if report.get("note"):
        return f"models: {report['note']}"
    return (f"models: no counter-model among {report['models']} models of "
            f"carrier size <= {budgets.max_model_size}")


def verify_all(env: ProgramEnv, interp: Optional[Interpretation] = None,
               budgets: Optional[Budgets] = None) -> dict[tuple[str, str], Verdict]:
    """Verdicts for every declared handler against every declared theory
    whose operations the handler's signature covers."""
    out: dict[tuple[str, str], Verdict] = {}
    for hname, hd in env.handlers.items():
        for tname, th in env.theories.items():
            out[(hname, tname)] = verify_handler(env, hd, th, interp,
                                                 budgets=budgets)
    return out
