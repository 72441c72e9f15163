"""Abstract syntax: types, terms, handlers, signatures, typing contexts.

Terms come in three sorts (values, computations, handlers) mirroring the
call-by-push-value split of the calculus.  All nodes are frozen dataclasses;
structural equality ignores source spans.  Alpha-equality and substitution
live in ``efflang.subst``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union


@dataclass(frozen=True)
class Span:
    """Half-open byte range into a named source text."""

    file: str
    start: int
    end: int


def _span_field():
    return field(default=None, compare=False, repr=False)


# ---------------------------------------------------------------------------
# Types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Base:
    """Named base type (builtin ``nat`` or a declared enumeration)."""

    name: str


@dataclass(frozen=True)
class UnitT:
    """The one-element value type ``1``."""


@dataclass(frozen=True)
class ProdT:
    """Binary product of value types; n-ary products nest to the left."""

    fst: "ValueType"
    snd: "ValueType"


@dataclass(frozen=True)
class SumT:
    """Labelled sum; cases are kept sorted by label so equality is set-like."""

    cases: tuple[tuple[str, "ValueType"], ...]

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(sorted(self.cases)))
        labels = [l for l, _ in self.cases]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in sum type: {labels}")

    def case(self, label: str) -> "ValueType":
        for l, t in self.cases:
            if l == label:
                return t
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.cases)


@dataclass(frozen=True)
class ThunkT:
    """``U C``: values suspending a computation of type C."""

    comp: "CompType"


@dataclass(frozen=True)
class FreeT:
    """``F A``: computations returning a value of type A."""

    val: "ValueType"


@dataclass(frozen=True)
class ProdCT:
    """Labelled product of computation types."""

    cases: tuple[tuple[str, "CompType"], ...]

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(sorted(self.cases)))
        labels = [l for l, _ in self.cases]
        if len(set(labels)) != len(labels):
            raise ValueError(f"duplicate labels in product type: {labels}")

    def case(self, label: str) -> "CompType":
        for l, t in self.cases:
            if l == label:
                return t
        raise KeyError(label)

    @property
    def labels(self) -> tuple[str, ...]:
        return tuple(l for l, _ in self.cases)


@dataclass(frozen=True)
class ArrowT:
    """``A -> C``: computations consuming a value argument."""

    arg: "ValueType"
    res: "CompType"


SignatureType = Union[Base, UnitT, ProdT, SumT]
ValueType = Union[Base, UnitT, ProdT, SumT, ThunkT]
CompType = Union[FreeT, ProdCT, ArrowT]

BOOL = SumT((("true", UnitT()), ("false", UnitT())))


def numeric_sum(n: int) -> SumT:
    """The finite type with labels ``1..n``; ``0`` is the empty sum."""
    return SumT(tuple((str(i), UnitT()) for i in range(1, n + 1)))


def is_signature_type(t: ValueType) -> bool:
    """Signature types are thunk-free value types."""
    match t:
        case Base() | UnitT():
            return True
        case ProdT(a, b):
            return is_signature_type(a) and is_signature_type(b)
        case SumT(cases):
            return all(is_signature_type(x) for _, x in cases)
        case _:
            return False


# ---------------------------------------------------------------------------
# Signatures
# ---------------------------------------------------------------------------


@dataclass
class BaseInfo:
    """Metadata for a base type: its elements (None = the naturals) and
    whether it may appear in operation arities."""

    elements: Optional[tuple[str, ...]]
    arity: bool = False


# Builtin function symbols are polymorphic in a controlled way and are
# special-cased by the checker and interpreters rather than listed in
# signatures: +, -, <, <=, == and != on nat; ==/!= on any signature type;
# and/or/not on bool.
BUILTIN_FUNS = ("+", "-", "<", "<=", "==", "!=", "and", "or", "not")


@dataclass
class Signature:
    """Base types, function symbols and operation symbols of a program.

    ``nat`` and the divergence operation ``div : 1 ~> 0`` are always present;
    correct handlers may not reinterpret ``div``.
    """

    bases: dict[str, BaseInfo] = field(default_factory=dict)
    funs: dict[str, tuple[SignatureType, SignatureType]] = field(default_factory=dict)
    ops: dict[str, tuple[SignatureType, SignatureType]] = field(default_factory=dict)

    def __post_init__(self):
        self.bases.setdefault("nat", BaseInfo(None, arity=True))
        self.ops.setdefault("div", (UnitT(), SumT(())))

    def is_arity_type(self, t: SignatureType) -> bool:
        match t:
            case Base(name):
                info = self.bases.get(name)
                return info is not None and info.arity
            case UnitT():
                return True
            case ProdT(a, b):
                return self.is_arity_type(a) and self.is_arity_type(b)
            case SumT(cases):
                return all(self.is_arity_type(x) for _, x in cases)
            case _:
                return False

    def declare_op(self, name: str, param: SignatureType, arity: SignatureType):
        if name in self.ops:
            raise ValueError(f"operation {name} already declared")
        if not is_signature_type(param) or not is_signature_type(arity):
            raise ValueError(f"operation {name} needs signature types")
        if not self.is_arity_type(arity):
            raise ValueError(f"operation {name}: arity type must use arity bases only")
        self.ops[name] = (param, arity)


# ---------------------------------------------------------------------------
# Value terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Var:
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class NatLit:
    value: int
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class EnumConst:
    """Element of a declared finite base type, e.g. ``a : chr``."""

    base: str
    name: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class FunApp:
    fun: str
    arg: "ValueTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class UnitV:
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Pair:
    fst: "ValueTerm"
    snd: "ValueTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Inj:
    label: str
    payload: "ValueTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class ThunkV:
    comp: "CompTerm"
    span: Optional[Span] = _span_field()


ValueTerm = Union[Var, NatLit, EnumConst, FunApp, UnitV, Pair, Inj, ThunkV]


# ---------------------------------------------------------------------------
# Computation terms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MatchPair:
    scrut: ValueTerm
    fst_var: str
    snd_var: str
    body: "CompTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class MatchSum:
    """Sum elimination; one clause per label, sorted.  An empty clause list
    eliminates the empty type and only typechecks against an expected type."""

    scrut: ValueTerm
    clauses: tuple[tuple[str, str, "CompTerm"], ...]  # (label, var, body)
    span: Optional[Span] = _span_field()

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(sorted(self.clauses, key=lambda c: c[0])))

    def clause(self, label: str) -> tuple[str, "CompTerm"]:
        for l, v, b in self.clauses:
            if l == label:
                return v, b
        raise KeyError(label)


@dataclass(frozen=True)
class Force:
    value: ValueTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Return:
    value: ValueTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Do:
    """``do x <- bound in body``; the annotation is filled during checking."""

    var: str
    annot: Optional[ValueType]
    bound: "CompTerm"
    body: "CompTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class CompTuple:
    cases: tuple[tuple[str, "CompTerm"], ...]
    span: Optional[Span] = _span_field()

    def __post_init__(self):
        object.__setattr__(self, "cases", tuple(sorted(self.cases, key=lambda c: c[0])))

    def case(self, label: str) -> "CompTerm":
        for l, m in self.cases:
            if l == label:
                return m
        raise KeyError(label)


@dataclass(frozen=True)
class Proj:
    comp: "CompTerm"
    label: str
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Lam:
    var: str
    annot: ValueType
    body: "CompTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class App:
    comp: "CompTerm"
    arg: ValueTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class OpApp:
    """``op!(param)(var : annot. body)`` with the arity annotation optional
    in source and recovered from the signature."""

    op: str
    param: ValueTerm
    var: str
    annot: Optional[SignatureType]
    body: "CompTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class ContCall:
    """``#k(arg)``: invocation of a continuation variable (or, inside theory
    blocks, of a template variable)."""

    k: str
    arg: ValueTerm
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class HandlerClause:
    """One ``op!(x)(k) -> body`` clause."""

    param_var: str
    param_annot: Optional[SignatureType]
    k_var: str
    k_annot: Optional[tuple[SignatureType, CompType]]
    body: "CompTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Handler:
    clauses: tuple[tuple[str, HandlerClause], ...]
    span: Optional[Span] = _span_field()

    def __post_init__(self):
        object.__setattr__(self, "clauses", tuple(sorted(self.clauses, key=lambda c: c[0])))
        ops = [o for o, _ in self.clauses]
        if len(set(ops)) != len(ops):
            raise ValueError(f"duplicate handler clauses: {ops}")

    def clause(self, op: str) -> Optional[HandlerClause]:
        for o, c in self.clauses:
            if o == op:
                return c
        return None

    @property
    def op_names(self) -> tuple[str, ...]:
        return tuple(o for o, _ in self.clauses)


@dataclass(frozen=True)
class Handle:
    """``handle body with handler to var : annot . cont``."""

    body: "CompTerm"
    handler: Handler
    var: str
    annot: Optional[ValueType]
    cont: "CompTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Fix:
    """``rec var : U C. body`` unrolls one step per fuel unit."""

    var: str
    annot: ThunkT
    body: "CompTerm"
    span: Optional[Span] = _span_field()


@dataclass(frozen=True)
class Ascribe:
    """Type ascription ``(M : C)``; the only way to synthesize a type for an
    empty-sum elimination."""

    comp: "CompTerm"
    ctype: CompType
    span: Optional[Span] = _span_field()


CompTerm = Union[
    MatchPair, MatchSum, Force, Return, Do, CompTuple, Proj, Lam, App,
    OpApp, ContCall, Handle, Fix, Ascribe,
]


# ---------------------------------------------------------------------------
# Typing contexts
# ---------------------------------------------------------------------------


class Ctx:
    """Immutable mapping from value variables to value types."""

    __slots__ = ("_items",)

    def __init__(self, items: Optional[dict[str, ValueType]] = None):
        self._items: dict[str, ValueType] = dict(items or {})

    def extend(self, name: str, ty: ValueType) -> "Ctx":
        new = dict(self._items)
        new[name] = ty
        return Ctx(new)

    def lookup(self, name: str) -> Optional[ValueType]:
        return self._items.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def items(self):
        return self._items.items()

    def __repr__(self):
        inner = ", ".join(f"{k}: {v}" for k, v in self._items.items())
        return f"Ctx({inner})"


class ContCtx:
    """Immutable mapping from continuation variables to ``(arg, result)``."""

    __slots__ = ("_items",)

    def __init__(self, items: Optional[dict[str, tuple[ValueType, CompType]]] = None):
        self._items: dict[str, tuple[ValueType, CompType]] = dict(items or {})

    def extend(self, name: str, arg: ValueType, res: CompType) -> "ContCtx":
        new = dict(self._items)
        new[name] = (arg, res)
        return ContCtx(new)

    def lookup(self, name: str) -> Optional[tuple[ValueType, CompType]]:
        return self._items.get(name)

    def __contains__(self, name: str) -> bool:
        return name in self._items

    def items(self):
        return self._items.items()

    def __repr__(self):
        inner = ", ".join(f"{k}: {a} => {c}" for k, (a, c) in self._items.items())
        return f"ContCtx({inner})"
