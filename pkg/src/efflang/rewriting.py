"""First-order term rewriting over finitized theories.

Terms are nested tuples: ``("var", x)`` or ``("app", f, (args, ...))``.
Equations are oriented into rules with a Knuth-Bendix ordering (unit
weights, name-ordered precedence), so an oriented system is terminating by
construction.  A system whose critical pairs all join is then convergent,
and ground equality is decided by comparing normal forms.
"""

from __future__ import annotations

from collections import Counter, deque
from dataclasses import dataclass, field
from typing import Iterator, Optional

Term = tuple


def var(x: str) -> Term:
    return ("var", x)


def app(f: str, *args: Term) -> Term:
    return ("app", f, tuple(args))


def is_var(t: Term) -> bool:
    return t[0] == "var"


def term_size(t: Term) -> int:
    if is_var(t):
        return 1
    return 1 + sum(term_size(a) for a in t[2])


def format_term(t: Term) -> str:
    if is_var(t):
        return t[1]
    _, f, args = t
    if not args:
        return f
    return f + "(" + ", ".join(format_term(a) for a in args) + ")"


def term_vars(t: Term) -> Counter:
    if is_var(t):
        return Counter({t[1]: 1})
    out: Counter = Counter()
    for a in t[2]:
        out.update(term_vars(a))
    return out


def subst_term(t: Term, sigma: dict[str, Term]) -> Term:
    if is_var(t):
        return sigma.get(t[1], t)
    return ("app", t[1], tuple(subst_term(a, sigma) for a in t[2]))


def rename_term(t: Term, suffix: str) -> Term:
    if is_var(t):
        return ("var", t[1] + suffix)
    return ("app", t[1], tuple(rename_term(a, suffix) for a in t[2]))


def positions(t: Term) -> Iterator[tuple[tuple[int, ...], Term]]:
    """All positions, root first, with their subterms."""
    yield (), t
    if not is_var(t):
        for i, a in enumerate(t[2]):
            for p, s in positions(a):
                yield (i,) + p, s


def subterm_at(t: Term, pos: tuple[int, ...]) -> Term:
    for i in pos:
        t = t[2][i]
    return t


def replace_at(t: Term, pos: tuple[int, ...], s: Term) -> Term:
    if not pos:
        return s
    i = pos[0]
    args = t[2]
    return ("app", t[1],
            args[:i] + (replace_at(args[i], pos[1:], s),) + args[i + 1:])


# ---------------------------------------------------------------------------
# Unification and matching
# ---------------------------------------------------------------------------


def _occurs(x: str, t: Term, sigma: dict) -> bool:
    stack = [t]
    while stack:
        s = stack.pop()
        if is_var(s):
            if s[1] == x:
                return True
            if s[1] in sigma:
                stack.append(sigma[s[1]])
        else:
            stack.extend(s[2])
    return False


def unify(a: Term, b: Term) -> Optional[dict[str, Term]]:
    """Most general unifier as a fully applied substitution, or None."""
    sigma: dict[str, Term] = {}

    def walk(t: Term) -> Term:
        while is_var(t) and t[1] in sigma:
            t = sigma[t[1]]
        return t

    work = deque([(a, b)])
    while work:
        s, t = work.popleft()
        s, t = walk(s), walk(t)
        if s == t:
            continue
        if is_var(s):
            if _occurs(s[1], t, sigma):
                return None
            sigma[s[1]] = t
        elif is_var(t):
            if _occurs(t[1], s, sigma):
                return None
            sigma[t[1]] = s
        else:
            if s[1] != t[1] or len(s[2]) != len(t[2]):
                return None
            work.extend(zip(s[2], t[2]))

    def resolve(t: Term) -> Term:
        t = walk(t)
        if is_var(t):
            return t
        return ("app", t[1], tuple(resolve(x) for x in t[2]))

    return {x: resolve(("var", x)) for x in sigma}


def match(pat: Term, t: Term) -> Optional[dict[str, Term]]:
    """One-way matching: a substitution with pat[sigma] == t, or None."""
    sigma: dict[str, Term] = {}
    work = [(pat, t)]
    while work:
        p, s = work.pop()
        if is_var(p):
            if p[1] in sigma:
                if sigma[p[1]] != s:
                    return None
            else:
                sigma[p[1]] = s
        else:
            if is_var(s) or p[1] != s[1] or len(p[2]) != len(s[2]):
                return None
            work.extend(zip(p[2], s[2]))
    return sigma


# ---------------------------------------------------------------------------
# The Knuth-Bendix ordering (unit weights, precedence by symbol name)
# ---------------------------------------------------------------------------


def kbo_greater(s: Term, t: Term) -> bool:
    sv, tv = term_vars(s), term_vars(t)
    for x, n in tv.items():
        if sv.get(x, 0) < n:
            return False
    ws, wt = term_size(s), term_size(t)
    if ws > wt:
        return True
    if ws < wt:
        return False
    if is_var(s) or is_var(t):
        return False
    if s[1] != t[1]:
        return s[1] > t[1]
    for a, b in zip(s[2], t[2]):
        if a == b:
            continue
        return kbo_greater(a, b)
    return False


# ---------------------------------------------------------------------------
# Rules and orientation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Rule:
    lhs: Term
    rhs: Term

    def renamed(self, suffix: str) -> "Rule":
        return Rule(rename_term(self.lhs, suffix), rename_term(self.rhs, suffix))


class OrientError(Exception):
    """The equations cannot be oriented into a terminating system."""


def orient_equation(l: Term, r: Term) -> Optional[Rule]:
    """Orient one ground-context equation by the ordering; None for a
    trivial equation, OrientError when neither direction decreases."""
    if l == r:
        return None
    if kbo_greater(l, r):
        return Rule(l, r)
    if kbo_greater(r, l):
        return Rule(r, l)
    raise OrientError(
        f"equation cannot be oriented either way: "
        f"{format_term(l)} = {format_term(r)}")


@dataclass
class TRS:
    rules: tuple[Rule, ...]
    terminating: bool  # by the ordering (auto) or merely asserted (lr)
    left_linear: bool = field(init=False)
    critical: tuple = field(init=False)
    overlap_free: bool = field(init=False)
    convergent: Optional[bool] = field(init=False, default=None)

    def __post_init__(self):
        self.left_linear = all(
            max(term_vars(r.lhs).values(), default=0) <= 1 for r in self.rules)
        self.critical = tuple(critical_pairs(self.rules))
        self.overlap_free = not self.critical


def orient(equations, direction: str = "auto") -> TRS:
    """Orient (lhs, rhs) pairs into a rewrite system.

    ``auto`` picks the decreasing direction per equation; ``lr`` keeps the
    given direction (termination is then only asserted by the caller)."""
    rules = []
    for l, r in equations:
        if direction == "auto":
            rule = orient_equation(l, r)
            if rule is None:
                continue
        elif direction == "lr":
            if l == r:
                continue
            missing = set(term_vars(r)) - set(term_vars(l))
            if missing:
                raise OrientError(
                    f"right side introduces variables {sorted(missing)}")
            rule = Rule(l, r)
        else:
            raise ValueError(f"unknown direction {direction!r}")
        if rule not in rules:
            rules.append(rule)
    return TRS(tuple(rules), terminating=direction == "auto")


def orient_partial(equations) -> tuple[TRS, list[tuple[Term, Term]]]:
    """Orient what can be oriented, collecting the rest.  The resulting
    system is terminating but only usable for joins, not refutations,
    whenever the skipped list is nonempty."""
    rules = []
    skipped = []
    for l, r in equations:
        try:
            rule = orient_equation(l, r)
        except OrientError:
            skipped.append((l, r))
            continue
        if rule is not None and rule not in rules:
            rules.append(rule)
    return TRS(tuple(rules), terminating=True), skipped


def canonical_rule(rule: "Rule") -> "Rule":
    """Rename variables in first-occurrence order so structurally equal
    rules compare equal regardless of where their names came from."""
    names: dict[str, str] = {}

    def walk(t: Term) -> Term:
        if is_var(t):
            return ("var", names.setdefault(t[1], f"v{len(names)}"))
        return ("app", t[1], tuple(walk(a) for a in t[2]))

    return Rule(walk(rule.lhs), walk(rule.rhs))


def complete(trs: TRS, max_rules: int = 256, max_steps: int = 10_000,
             max_rounds: int = 50) -> Optional[TRS]:
    """Basic completion: orient each unjoined critical pair into a new rule
    until every pair joins.  Added rules are equational consequences of the
    originals, so the result decides the same theory.  None when some pair
    cannot be oriented or a budget runs out."""
    rules = [canonical_rule(r) for r in trs.rules]
    seen = {(r.lhs, r.rhs) for r in rules}
    deferred: list[tuple[Term, Term]] = []
    for _ in range(max_rounds):
        cur = TRS(tuple(rules), terminating=True)
        fresh: list[Rule] = []

        def consider(a: Term, b: Term) -> None:
            na, nb = normalize(cur, a, max_steps), normalize(cur, b, max_steps)
            if na == nb:
                return
            try:
                rule = orient_equation(na, nb)
            except OrientError:
                # Neither side decreases yet; later rules may join it.
                deferred.append((na, nb))
                return
            rule = canonical_rule(rule)
            key = (rule.lhs, rule.rhs)
            if key not in seen:
                seen.add(key)
                fresh.append(rule)

        try:
            retry, deferred = deferred, []
            for a, b in retry:
                consider(a, b)
            for a, b in critical_pairs(cur.rules):
                consider(a, b)
        except StepBound:
            return None
        if not fresh:
            return cur if not deferred else None
        rules.extend(fresh)
        if len(rules) > max_rules:
            return None
    return None


def critical_pairs(rules) -> list[tuple[Term, Term]]:
    """All critical pairs, excluding every rule's trivial root overlap with
    itself."""
    out = []
    for i, r1 in enumerate(rules):
        for j, r2x in enumerate(rules):
            r2 = r2x.renamed("#2")
            for pos, sub in positions(r1.lhs):
                if is_var(sub):
                    continue
                if i == j and pos == ():
                    continue
                sigma = unify(sub, r2.lhs)
                if sigma is None:
                    continue
                peak_a = subst_term(r1.rhs, sigma)
                peak_b = subst_term(replace_at(r1.lhs, pos, r2.rhs), sigma)
                if peak_a != peak_b:
                    out.append((peak_a, peak_b))
    return out


# ---------------------------------------------------------------------------
# Normalization
# ---------------------------------------------------------------------------


class StepBound(Exception):
    """Normalization did not finish within the step budget."""


def _rewrite_innermost(rules, t: Term) -> Optional[Term]:
    """One leftmost-innermost step, or None when t is a normal form."""
    if is_var(t):
        return None
    new_args = None
    for i, a in enumerate(t[2]):
        stepped = _rewrite_innermost(rules, a)
        if stepped is not None:
            new_args = t[2][:i] + (stepped,) + t[2][i + 1:]
            return ("app", t[1], new_args)
    for rule in rules:
        sigma = match(rule.lhs, t)
        if sigma is not None:
            return subst_term(rule.rhs, sigma)
    return None


def normalize(trs: TRS, t: Term, max_steps: int = 10_000) -> Term:
    for _ in range(max_steps):
        nxt = _rewrite_innermost(trs.rules, t)
        if nxt is None:
            return t
        t = nxt
    raise StepBound(f"no normal form within {max_steps} steps")


def certify_convergent(trs: TRS, max_steps: int = 10_000) -> bool:
    """Certify convergence: the system must be terminating by the ordering,
    and every critical pair must join.  The result is cached on the TRS."""
    if trs.convergent is not None:
        return trs.convergent
    ok = trs.terminating
    if ok:
        try:
            for a, b in trs.critical:
                if normalize(trs, a, max_steps) != normalize(trs, b, max_steps):
                    ok = False
                    break
        except StepBound:
            ok = False
    trs.convergent = ok
    return ok


def _successors(rules, t: Term) -> Iterator[Term]:
    for pos, sub in positions(t):
        if is_var(sub):
            continue
        for rule in rules:
            sigma = match(rule.lhs, sub)
            if sigma is not None:
                yield replace_at(t, pos, subst_term(rule.rhs, sigma))


def random_normalize(trs: TRS, t: Term, rng, max_steps: int = 10_000) -> Term:
    """Normalize by picking a random redex at every step.  On a confluent
    terminating system this must agree with ``normalize``."""
    for _ in range(max_steps):
        succs = list(_successors(trs.rules, t))
        if not succs:
            return t
        t = rng.choice(succs)
    raise StepBound(f"no normal form within {max_steps} steps")


def ground_equal(trs: TRS, t1: Term, t2: Term, max_steps: int = 10_000,
                 search_budget: int = 2_000,
                 extra: tuple[tuple[Term, Term], ...] = ()) -> Optional[bool]:
    """Decide (or half-decide) whether two terms are equal in the theory.

    With a certified convergent system (and nothing in ``extra``) the
    answer is exact: equal normal forms.  Otherwise a bounded
    bidirectional search looks for a conversion; ``extra`` holds
    unorientable equations applied in both directions during the search.
    The search can affirm equality but never refute it (None)."""
    if t1 == t2:
        return True
    if certify_convergent(trs, max_steps):
        try:
            n1 = normalize(trs, t1, max_steps)
            n2 = normalize(trs, t2, max_steps)
        except StepBound:
            return None
        if n1 == n2:
            return True
        if not extra:
            return False
        t1, t2 = n1, n2
    steps = list(trs.rules)
    for l, r in extra:
        # Only a direction that introduces no new variables keeps the
        # search inside ground terms.
        if set(term_vars(r)) <= set(term_vars(l)):
            steps.append(Rule(l, r))
        if set(term_vars(l)) <= set(term_vars(r)):
            steps.append(Rule(r, l))
    seen1, seen2 = {t1}, {t2}
    frontier1, frontier2 = deque([t1]), deque([t2])
    budget = search_budget
    while budget > 0 and (frontier1 or frontier2):
        for seen, frontier, other in ((seen1, frontier1, seen2),
                                      (seen2, frontier2, seen1)):
            if not frontier:
                continue
            cur = frontier.popleft()
            for nxt in _successors(steps, cur):
                budget -= 1
                if nxt in other:
                    return True
                if nxt not in seen:
                    seen.add(nxt)
                    frontier.append(nxt)
                if budget <= 0:
                    break
    if seen1 & seen2:
        return True
    return None
