"""Reduction pipeline: counting sentences down to universal two-variable CNF.

compile_problem rewrites any supported sentence (counting quantifiers,
cardinality atoms, arbitrary nesting) into a CompiledProblem: a purely
universal clause set over {x, y}, an extended weight map that may contain -1
weights, a cardinality condition, and a list of symbolic multiplier factors
evaluated per domain size.

The pipeline is a worklist over conjuncts.  Each conjunct is normalized
(bounded counting expanded, negations pushed), then dispatched: cardinality
parts are split off, whole-conjunct counting shapes get their dedicated
encodings, residual counting subformulas are extracted via fresh predicates,
and what remains is Skolemized (fresh predicates with weight pair (1, -1)
make missing witnesses cancel in the signed sum) and clausified.

Guard merging: conjuncts (g1 | E) and (g2 | E) with the same counting
disjunct E are combined into ((g1 & g2) | E) before the guarded encoding, so
one application serves all guards.  This collapses the predicate count of
the standard iff-splitting pattern; a flag restores one application per
guard.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterable, Union

from .logic import (
    And,
    Atom,
    Bottom,
    CardinalityAtom,
    CountExists,
    Equality,
    Exists,
    FALSE,
    Forall,
    Formula,
    FreshNames,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
    Top,
    TRUE,
    Vocabulary,
    WeightMap,
    children,
    conjoin,
    disjoin,
    flatten_and,
    flatten_or,
    formula_size,
    free_variables,
    rebuild,
    swap_xy,
    walk,
)
from .rationals import ONE, Rat, binomial, factorial, ipow, rat

# -- multiplier factors -------------------------------------------------------


@dataclass(frozen=True)
class FactorialFactor:
    """Contributes factorial(k) ** (-n) at domain size n."""

    k: int


@dataclass(frozen=True)
class BinomialFactor:
    """Contributes binomial(n, k) ** (-1) at domain size n."""

    k: int


@dataclass(frozen=True)
class ConstFactor:
    value: Rat


Factor = Union[FactorialFactor, BinomialFactor, ConstFactor]


class MultiplierUndefined(Exception):
    """A factor divides by zero at this domain size (k exceeds n)."""


def evaluate_multiplier(factors: Iterable[Factor], n: int) -> Rat:
    out = ONE
    for f in factors:
        if isinstance(f, FactorialFactor):
            out /= ipow(rat(factorial(f.k)), n)
        elif isinstance(f, BinomialFactor):
            b = binomial(n, f.k)
            if b == 0:
                raise MultiplierUndefined(f"binomial({n}, {f.k}) = 0")
            out /= rat(b)
        else:
            out *= f.value
    return out


def format_factor(f: Factor) -> str:
    if isinstance(f, FactorialFactor):
        return f"factorial({f.k}) ^ -n"
    if isinstance(f, BinomialFactor):
        return f"binomial(n, {f.k}) ^ -1"
    return str(f.value)


# -- clauses ------------------------------------------------------------------


@dataclass(frozen=True)
class Literal:
    positive: bool
    atom: Formula  # Atom or Equality

    def negated(self) -> "Literal":
        return Literal(not self.positive, self.atom)


@dataclass(frozen=True)
class Clause:
    """Disjunction of literals, implicitly universal over its variables."""

    literals: tuple[Literal, ...]

    def variables(self) -> frozenset[str]:
        out: frozenset[str] = frozenset()
        for lit in self.literals:
            out |= free_variables(lit.atom)
        return out


def clause_to_formula(c: Clause) -> Formula:
    return disjoin([lit.atom if lit.positive else Not(lit.atom) for lit in c.literals])


def cnf_to_sentence(cnf: Iterable[Clause]) -> Formula:
    """Universal closure of the clause set, for oracle cross-checks."""
    parts = []
    for c in cnf:
        f = clause_to_formula(c)
        for v in sorted(c.variables(), reverse=True):  # x outermost
            f = Forall(v, f)
        parts.append(f)
    return conjoin(parts)


# -- trace --------------------------------------------------------------------


@dataclass(frozen=True)
class TraceStep:
    rule: str
    detail: str
    new_preds: tuple[str, ...] = ()
    factor: str | None = None


@dataclass
class RewriteTrace:
    steps: list[TraceStep] = field(default_factory=list)

    def add(self, rule: str, detail: str, new_preds: tuple[str, ...] = (), factor: str | None = None) -> None:
        self.steps.append(TraceStep(rule, detail, new_preds, factor))

    def render(self) -> str:
        lines = []
        for i, s in enumerate(self.steps, 1):
            line = f"{i:3d}. {s.rule}: {s.detail}"
            if s.new_preds:
                line += f"  [new: {', '.join(s.new_preds)}]"
            if s.factor:
                line += f"  [factor: {s.factor}]"
            lines.append(line)
        return "\n".join(lines)


# -- compiled problem ---------------------------------------------------------


@dataclass
class CompiledProblem:
    cnf: list[Clause]
    vocab: Vocabulary
    weights: WeightMap
    card_condition: Formula  # boolean over CardinalityAtom, TRUE when absent
    psi: tuple[str, ...]  # predicates mentioned by card_condition, in order
    factors: tuple[Factor, ...]
    trace: RewriteTrace
    source_sentence: Formula
    source_vocab: Vocabulary
    source_weights: WeightMap
    flags: dict

    def needs_specialization(self, n: int) -> bool:
        return any(isinstance(f, BinomialFactor) and f.k > n for f in self.factors)


# -- formula normalization ----------------------------------------------------


def eliminate_bounded_counting(f: Formula) -> Formula:
    """Lower every bounded counting quantifier to exact-count form.

    <=k becomes the (k+1)-way disjunction (none | exactly 1 | ... | exactly
    k); >=k becomes the negated <=(k-1) expansion, except >=1 which is plain
    exists; =0 and <=0 become a universal negation; >=0 is vacuous.
    """
    kids = children(f)
    if kids:
        f = rebuild(f, tuple(eliminate_bounded_counting(c) for c in kids))
    if not isinstance(f, CountExists):
        return f
    v, body, k = f.var, f.body, f.k
    if f.comparator == "=":
        if k == 0:
            return Forall(v, Not(body))
        return f
    if f.comparator == "<=":
        if k == 0:
            return Forall(v, Not(body))
        parts: list[Formula] = [Forall(v, Not(body))]
        parts += [CountExists("=", i, v, body) for i in range(1, k + 1)]
        return disjoin(parts)
    # >= k
    if k == 0:
        return TRUE
    if k == 1:
        return Exists(v, body)
    return Not(eliminate_bounded_counting(CountExists("<=", k - 1, v, body)))


def negate_cardinality(a: CardinalityAtom) -> Formula:
    if a.comparator == "<=":
        return CardinalityAtom(a.pred, ">", a.coeff, a.offset)
    if a.comparator == ">=":
        return CardinalityAtom(a.pred, "<", a.coeff, a.offset)
    if a.comparator == "<":
        return CardinalityAtom(a.pred, ">=", a.coeff, a.offset)
    if a.comparator == ">":
        return CardinalityAtom(a.pred, "<=", a.coeff, a.offset)
    return Or(
        CardinalityAtom(a.pred, "<", a.coeff, a.offset),
        CardinalityAtom(a.pred, ">", a.coeff, a.offset),
    )


def simplify_nnf(f: Formula) -> Formula:
    """Push negations to atoms and fold constants.

    Negation stops at counting quantifiers (their removal is a weighted
    rewrite, not a syntactic one) and is absorbed into cardinality atoms by
    flipping the comparator.
    """
    if isinstance(f, Not):
        s = f.sub
        if isinstance(s, Not):
            return simplify_nnf(s.sub)
        if isinstance(s, Top):
            return FALSE
        if isinstance(s, Bottom):
            return TRUE
        if isinstance(s, And):
            return _mk_or(simplify_nnf(Not(s.left)), simplify_nnf(Not(s.right)))
        if isinstance(s, Or):
            return _mk_and(simplify_nnf(Not(s.left)), simplify_nnf(Not(s.right)))
        if isinstance(s, Implies):
            return _mk_and(simplify_nnf(s.left), simplify_nnf(Not(s.right)))
        if isinstance(s, Iff):
            return _mk_iff(simplify_nnf(s.left), simplify_nnf(Not(s.right)))
        if isinstance(s, Forall):
            return Exists(s.var, simplify_nnf(Not(s.body)))
        if isinstance(s, Exists):
            return Forall(s.var, simplify_nnf(Not(s.body)))
        if isinstance(s, CardinalityAtom):
            return negate_cardinality(s)
        if isinstance(s, CountExists):
            inner = simplify_nnf(s)
            if isinstance(inner, CountExists):
                return Not(inner)
            return simplify_nnf(Not(inner))
        return Not(simplify_nnf(s))
    if isinstance(f, And):
        return _mk_and(simplify_nnf(f.left), simplify_nnf(f.right))
    if isinstance(f, Or):
        return _mk_or(simplify_nnf(f.left), simplify_nnf(f.right))
    if isinstance(f, Implies):
        return _mk_or(simplify_nnf(Not(f.left)), simplify_nnf(f.right))
    if isinstance(f, Iff):
        return _mk_iff(simplify_nnf(f.left), simplify_nnf(f.right))
    if isinstance(f, Forall):
        b = simplify_nnf(f.body)
        if isinstance(b, (Top, Bottom)):
            return b
        return Forall(f.var, b)
    if isinstance(f, Exists):
        b = simplify_nnf(f.body)
        if isinstance(b, (Top, Bottom)):
            return b
        return Exists(f.var, b)
    if isinstance(f, CountExists):
        b = simplify_nnf(f.body)
        if isinstance(b, Bottom):  # zero witnesses, always
            if f.comparator == "<=":
                return TRUE
            return TRUE if f.k == 0 else FALSE
        return CountExists(f.comparator, f.k, f.var, b)
    return f


def _mk_and(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Bottom) or isinstance(b, Bottom):
        return FALSE
    if isinstance(a, Top):
        return b
    if isinstance(b, Top):
        return a
    return And(a, b)


def _mk_or(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Top) or isinstance(b, Top):
        return TRUE
    if isinstance(a, Bottom):
        return b
    if isinstance(b, Bottom):
        return a
    return Or(a, b)


def _mk_iff(a: Formula, b: Formula) -> Formula:
    if isinstance(a, Top):
        return b
    if isinstance(b, Top):
        return a
    if isinstance(a, Bottom):
        return simplify_nnf(Not(b))
    if isinstance(b, Bottom):
        return simplify_nnf(Not(a))
    return Iff(a, b)


def specialize_sentence(f: Formula, n: int) -> Formula:
    """Resolve counting quantifiers whose k exceeds what n elements allow."""
    kids = children(f)
    if kids:
        f = rebuild(f, tuple(specialize_sentence(c, n) for c in kids))
    if isinstance(f, CountExists):
        if f.comparator == "=" and f.k > n:
            return FALSE
        if f.comparator == ">=" and f.k > n:
            return FALSE
        if f.comparator == "<=" and f.k >= n:
            return TRUE
    return f


# -- structure predicates -----------------------------------------------------


def _contains(f: Formula, cls) -> bool:
    return any(isinstance(node, cls) for node in walk(f))


def _is_quantifier_free(f: Formula) -> bool:
    return not _contains(f, (Forall, Exists, CountExists))


def _is_pure_card(f: Formula) -> bool:
    """Boolean combination of cardinality atoms and constants only."""
    if isinstance(f, (CardinalityAtom, Top, Bottom)):
        return True
    if isinstance(f, (And, Or, Not, Implies, Iff)):
        return all(_is_pure_card(c) for c in children(f))
    return False


def _substitute(f: Formula, target: Formula, replacement: Formula) -> Formula:
    if f == target:
        return replacement
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(_substitute(c, target, replacement) for c in kids))


def _subst_var(f: Formula, old: str, new: str) -> Formula:
    """Rename a free variable; binders for old shadow as usual."""

    def term(t: str) -> str:
        return new if t == old else t

    if isinstance(f, Atom):
        return Atom(f.pred, tuple(term(a) for a in f.args))
    if isinstance(f, Equality):
        return Equality(term(f.left), term(f.right))
    if isinstance(f, (Forall, Exists, CountExists)):
        if f.var == old:
            return f
        return rebuild(f, (_subst_var(f.body, old, new),))
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(_subst_var(c, old, new) for c in kids))


# -- pipeline state -----------------------------------------------------------


@dataclass
class TransformState:
    vocab_preds: dict[str, Pred]
    weights: dict[str, tuple[Rat, Rat]]
    fresh: FreshNames
    trace: RewriteTrace = field(default_factory=RewriteTrace)
    factors: list[Factor] = field(default_factory=list)
    card_parts: list[Formula] = field(default_factory=list)
    universal: list[Formula] = field(default_factory=list)
    queue: deque = field(default_factory=deque)
    guarded: dict[tuple[str, bool, int], list[Formula]] = field(default_factory=dict)
    body_names: dict[Formula, str] = field(default_factory=dict)
    count_names: dict[tuple[str, bool, int], str] = field(default_factory=dict)
    closed_block_names: dict[Formula, str] = field(default_factory=dict)
    atomic_fastpath: bool = True
    merge_guards: bool = True
    tseitin_limit: int = 64
    unsat: bool = False

    @classmethod
    def for_vocab(cls, vocab: Vocabulary, weights: WeightMap, **flags) -> "TransformState":
        wd = {name: pair for name, pair in weights.items()}
        st = cls(
            vocab_preds={p.name: p for p in vocab.predicates},
            weights=wd,
            fresh=FreshNames(p.name for p in vocab.predicates),
        )
        for key, val in flags.items():
            setattr(st, key, val)
        return st

    def new_pred(self, base: str, arity: int, w: Rat = ONE, wb: Rat = ONE) -> str:
        name = self.fresh.fresh(base)
        self.vocab_preds[name] = Pred(name, arity)
        if w != ONE or wb != ONE:
            self.weights[name] = (rat(w), rat(wb))
        return name

    def vocabulary(self) -> Vocabulary:
        return Vocabulary(tuple(self.vocab_preds.values()))

    def weight_map(self) -> WeightMap:
        return WeightMap(self.weights)


def _fmt(f: Formula) -> str:
    from .parser import print_formula

    return print_formula(f)


# -- named rewrite operations -------------------------------------------------


def remove_negation(host: Formula, neg_target: Formula, state: TransformState) -> Formula:
    """Replace one negated subformula by a fresh atom with a cancelling pair.

    neg_target is the formula under the negation (the Not node wrapping it is
    what gets replaced).  Adds the three guarded conjuncts over fresh @c, @d
    with weights (1,1) and (1,-1) to the queue, so worlds where the fresh
    atom disagrees with the negation cancel in the signed sum.
    """
    fv = sorted(free_variables(neg_target))
    a_name = state.new_pred("c", len(fv))
    b_name = state.new_pred("d", len(fv), ONE, rat(-1))
    a_atom = Atom(a_name, tuple(fv))
    b_atom = Atom(b_name, tuple(fv))
    new_host = _substitute(host, Not(neg_target), a_atom)
    parts = [
        Or(neg_target, a_atom),
        Or(a_atom, b_atom),
        Or(neg_target, b_atom),
    ]
    for p in parts:
        q: Formula = p
        for v in reversed(fv):
            q = Forall(v, q)
        state.queue.append(q)
    state.trace.add(
        "remove-negation",
        f"~({_fmt(neg_target)}) -> {a_name}{tuple(fv) if fv else ''}",
        (a_name, b_name),
    )
    return new_host


def _oriented(r_pred: str, rev: bool) -> Atom:
    """R(x, y), or R(y, x) when the counting body was the reversed atom."""
    return Atom(r_pred, ("y", "x") if rev else ("x", "y"))


def encode_forall_exact(r_pred: str, k: int, state: TransformState, rev: bool = False) -> None:
    """Encode the conjunct (forall x. exists[=k] y. R(x, y)).

    k = 1: totality plus the cardinality atom |R| = n, no factor.  k >= 2: k
    fresh binary predicates partition R's rows, each total, pairwise
    disjoint, with |R| = k*n and factor factorial(k)^-n to cancel the
    deliberate overcount of ordered partitions.  rev counts over R(y, x)
    instead; the cardinality side is unchanged because summing per-element
    counts of the reversed relation still totals |R|.
    """
    if k < 1:
        raise ValueError("encode_forall_exact requires k >= 1")
    r_atom = _oriented(r_pred, rev)
    shown = f"{r_pred}(y, x)" if rev else f"{r_pred}(x, y)"
    if k == 1:
        state.queue.append(Forall("x", Exists("y", r_atom)))
        state.card_parts.append(CardinalityAtom(r_pred, "=", 1, 0))
        state.trace.add("functionality", f"forall x. exists[=1] y. {shown} -> totality + |{r_pred}| = n")
        return
    fs = [state.new_pred("f", 2) for _ in range(k)]
    for name in fs:
        state.queue.append(Forall("x", Exists("y", Atom(name, ("x", "y")))))
    for i in range(k):
        for j in range(i + 1, k):
            state.universal.append(
                Forall("x", Forall("y", Or(Not(Atom(fs[i], ("x", "y"))), Not(Atom(fs[j], ("x", "y"))))))
            )
    cover = disjoin([Atom(name, ("x", "y")) for name in fs])
    state.universal.append(Forall("x", Forall("y", Iff(r_atom, cover))))
    state.card_parts.append(CardinalityAtom(r_pred, "=", k, 0))
    state.factors.append(FactorialFactor(k))
    state.trace.add(
        "forall-exact",
        f"forall x. exists[={k}] y. {shown} -> partition into {k} functions, |{r_pred}| = {k}*n",
        tuple(fs),
        format_factor(FactorialFactor(k)),
    )


def encode_functionality(r_pred: str, state: TransformState) -> None:
    """k = 1 fast path of encode_forall_exact."""
    encode_forall_exact(r_pred, 1, state)


def encode_exact_forall(r_pred: str, k: int, state: TransformState, rev: bool = False) -> None:
    """Encode the conjunct (exists[=k] x. forall y. R(x, y)).

    Fresh unary @u marks the all-row elements: |@u| = k, @u(x) implies every
    R(x, y), and every non-@u element must miss some y (Skolemized later).
    """
    u_name = state.new_pred("u", 1)
    u_atom = Atom(u_name, ("x",))
    r_atom = _oriented(r_pred, rev)
    state.card_parts.append(CardinalityAtom(u_name, "=", 0, k))
    state.universal.append(Forall("x", Forall("y", Or(Not(u_atom), r_atom))))
    state.queue.append(Forall("x", Or(u_atom, Exists("y", Not(r_atom)))))
    state.trace.add(
        "exact-forall",
        f"exists[={k}] x. forall y. {r_pred}(x, y) -> |{u_name}| = {k} marking full rows",
        (u_name,),
    )


def encode_guarded_counting(guard: Formula, r_pred: str, k: int, state: TransformState, rev: bool = False) -> None:
    """Encode the conjunct (forall x. guard(x) | exists[=k] y. R(x, y)).

    Fresh @u (the k designated targets) and @bk: guarded elements point at
    exactly the designated targets through @bk, unguarded elements copy R
    into @bk, and @bk itself is forced to be exactly-k everywhere; dividing
    by binomial(n, k) cancels the free choice of the designated set.  Valid
    for an arbitrary y-free guard formula: the argument only needs the guard
    to be a fixed per-element condition.
    """
    if k < 1:
        raise ValueError("encode_guarded_counting requires k >= 1")
    u_name = state.new_pred("u", 1)
    bk_name = state.new_pred("bk", 2)
    u_y = Atom(u_name, ("y",))
    bk_atom = Atom(bk_name, ("x", "y"))
    r_atom = _oriented(r_pred, rev)
    state.card_parts.append(CardinalityAtom(u_name, "=", 0, k))
    state.universal.append(
        Forall("x", Forall("y", Implies(And(guard, bk_atom), u_y)))
    )
    state.universal.append(
        Forall("x", Forall("y", Implies(simplify_nnf(Not(guard)), Iff(r_atom, bk_atom))))
    )
    state.factors.append(BinomialFactor(k))
    state.trace.add(
        "guarded-counting",
        f"forall x. ({_fmt(guard)}) | exists[={k}] y. {r_pred}(x, y) -> designated set {u_name} via {bk_name}",
        (u_name, bk_name),
        format_factor(BinomialFactor(k)),
    )
    encode_forall_exact(bk_name, k, state)


def split_iff_counting(a_pred: str, r_pred: str, k: int, state: TransformState, rev: bool = False) -> None:
    """Split (forall x. A(x) <-> exists[=k] y. R(x, y)) into two directions.

    Forward: A(x) <-> ~@g(x) plus the guarded conjunct (@g(x) | exactly-k).
    Backward: A(x) | ~exactly-k, routed through remove_negation.
    """
    a_atom = Atom(a_pred, ("x",))
    count = CountExists("=", k, "y", _oriented(r_pred, rev))
    g_name = state.new_pred("g", 1)
    g_atom = Atom(g_name, ("x",))
    state.universal.append(Forall("x", Iff(a_atom, Not(g_atom))))
    state.queue.append(Forall("x", Or(g_atom, count)))
    state.trace.add(
        "split-iff-forward",
        f"{a_pred}(x) <-> exists[={k}] y. {r_pred}(x, y): forward via complement {g_name}",
        (g_name,),
    )
    backward = remove_negation(Forall("x", Or(a_atom, Not(count))), count, state)
    state.queue.append(backward)


def _name_body(psi: Formula, state: TransformState) -> tuple[str, bool]:
    """Name a quantifier-free two-variable body with a fresh binary predicate.

    psi must be in canonical orientation (counting variable y, free variable
    x).  Shared across uses: the same body gets the same name.  The atomic
    fast path skips naming when psi is already a positive atom over both
    variables; a reversed atom R(y, x) is used directly with the returned
    flag set, so counting over the reversed relation never introduces a
    second binary predicate (and its cardinality stays on R itself).
    """
    if state.atomic_fastpath and isinstance(psi, Atom):
        if psi.args == ("x", "y"):
            return psi.pred, False
        if psi.args == ("y", "x"):
            return psi.pred, True
    existing = state.body_names.get(psi)
    if existing is not None:
        return existing, False
    b_name = state.new_pred("b", 2)
    state.body_names[psi] = b_name
    state.universal.append(Forall("x", Forall("y", Iff(Atom(b_name, ("x", "y")), psi))))
    state.trace.add("name-body", f"{b_name}(x, y) <-> {_fmt(psi)}", (b_name,))
    return b_name, False


def extract_exact_counting(conjunct: Formula, state: TransformState) -> Formula:
    """Replace the first innermost one-free-variable exact-count subformula.

    The subformula exists[=k] v. psi(u, v) becomes @a(u); definitions tie
    @a to the count through a named body and the iff split.  One @a per
    (body, k) pair, shared across occurrences and conjuncts.
    """
    target: CountExists | None = None
    for node in walk(conjunct):
        if isinstance(node, CountExists) and node.comparator == "=" and len(free_variables(node)) == 1:
            target = node
            break
    if target is None:
        return conjunct
    (u,) = free_variables(target)
    psi = target.body if (u, target.var) == ("x", "y") else swap_xy(target.body)
    b_name, rev = _name_body(psi, state)
    key = (b_name, rev, target.k)
    a_name = state.count_names.get(key)
    if a_name is None:
        a_name = state.new_pred("a", 1)
        state.count_names[key] = a_name
        shown = f"{b_name}(y, x)" if rev else f"{b_name}(x, y)"
        state.trace.add(
            "extract-counting",
            f"exists[={target.k}] y. {shown} -> {a_name}(x)",
            (a_name,),
        )
        split_iff_counting(a_name, b_name, target.k, state, rev)
    rewritten = _substitute(conjunct, target, Atom(a_name, (u,)))
    mirror = CountExists("=", target.k, "x" if target.var == "y" else "y", swap_xy(target.body))
    rewritten = _substitute(rewritten, mirror, Atom(a_name, ("y" if u == "x" else "x",)))
    return rewritten


# -- Skolemization ------------------------------------------------------------


def _other_var(v: str) -> str:
    return "y" if v == "x" else "x"


def skolemize(conjunct: Formula, state: TransformState) -> None:
    """Reduce a counting-free conjunct to universal formulas in the state.

    Allowed end shapes: quantifier-free (ground), forall-x, forall-x-forall-y,
    forall-x-exists-y, sentence-level exists.  Existentials are removed by
    replacing the whole conjunct with forall-forall (@sk(x) | ~body) where
    @sk carries weight pair (1, -1): worlds that cheat (atom set but no
    witness) appear once positively and once negatively and cancel.  Anything
    else is brought to an allowed shape by naming quantified subformulas with
    fresh predicates and definitional equivalences.
    """
    sub = deque([conjunct])
    while sub:
        f = simplify_nnf(sub.popleft())
        if isinstance(f, Top):
            continue
        if isinstance(f, Bottom):
            state.unsat = True
            continue
        if isinstance(f, And):
            sub.extend(flatten_and(f))
            continue
        if _is_quantifier_free(f):
            state.universal.append(f)
            continue
        if isinstance(f, Forall):
            u, body = f.var, f.body
            if isinstance(body, And):
                sub.extend(Forall(u, part) for part in flatten_and(body))
                continue
            if _is_quantifier_free(body):
                state.universal.append(f)
                continue
            if isinstance(body, Forall):
                if isinstance(body.body, And):
                    sub.extend(Forall(u, Forall(body.var, part)) for part in flatten_and(body.body))
                elif _is_quantifier_free(body.body):
                    state.universal.append(f)
                else:
                    sub.append(_name_quantified_sub(f, state))
                continue
            if isinstance(body, Exists) and _is_quantifier_free(body.body):
                _skolem_clause(u, body.var, body.body, state)
                continue
            rewritten = _miniscope(u, body)
            if rewritten is not None:
                sub.append(rewritten)
                continue
            sub.append(_name_quantified_sub(f, state))
            continue
        if isinstance(f, Exists):
            v, body = f.var, f.body
            if _is_quantifier_free(body):
                _skolem_sentence(v, body, state)
                continue
            sub.append(_name_quantified_sub(f, state))
            continue
        # closed boolean combination with quantified parts inside
        if isinstance(f, Or):
            pulled = _closed_or_pull(f)
            if pulled is not None:
                sub.append(pulled)
                continue
        sub.append(_name_quantified_sub(f, state))


def _skolem_clause(u: str, v: str, body: Formula, state: TransformState) -> None:
    """forall u. exists v. body  ->  forall u. forall v. (@sk(u) | ~body)."""
    sk = state.new_pred("sk", 1, ONE, rat(-1))
    sk_atom = Atom(sk, (u,))
    state.universal.append(Forall(u, Forall(v, Or(sk_atom, simplify_nnf(Not(body))))))
    state.trace.add("skolemize", f"forall {u}. exists {v}. {_fmt(body)} via {sk}", (sk,))


def _skolem_sentence(v: str, body: Formula, state: TransformState) -> None:
    """exists v. body  ->  forall v. (@sk | ~body) with nullary @sk."""
    sk = state.new_pred("sk", 0, ONE, rat(-1))
    sk_atom = Atom(sk, ())
    state.universal.append(Forall(v, Or(sk_atom, simplify_nnf(Not(body)))))
    state.trace.add("skolemize", f"exists {v}. {_fmt(body)} via nullary {sk}", (sk,))


def _miniscope(u: str, body: Formula) -> Formula | None:
    """Try to pull a single quantifier out of a disjunctive body.

    Returns the rewritten forall-conjunct, or None when the body mixes
    quantifier kinds and needs naming instead.
    """
    disjuncts = flatten_or(body)
    ex_parts: list[Formula] = []
    fa_parts: list[Formula] = []
    plain: list[Formula] = []
    for d in disjuncts:
        if isinstance(d, Exists) and _is_quantifier_free(d.body):
            ex_parts.append(d)
        elif isinstance(d, Forall) and _is_quantifier_free(d.body):
            fa_parts.append(d)
        elif _is_quantifier_free(d):
            plain.append(d)
        else:
            return None
    if ex_parts and not fa_parts:
        v = ex_parts[0].var
        if any(p.var != v for p in ex_parts):
            return None
        if any(v in free_variables(p) for p in plain):
            return None
        merged = disjoin([p.body for p in ex_parts] + plain)
        return Forall(u, Exists(v, merged))
    if len(fa_parts) == 1 and not ex_parts:
        v = fa_parts[0].var
        if any(v in free_variables(p) for p in plain):
            return None
        return Forall(u, Forall(v, disjoin([fa_parts[0].body] + plain)))
    return None


def _closed_or_pull(f: Or) -> Formula | None:
    """Push a closed disjunction under one quantifier when shapes allow.

    Every disjunct is a sentence, so exists-disjuncts merge after renaming
    to a shared variable and a lone forall-disjunct absorbs the rest.  This
    keeps naming from looping on its own definitional conjuncts.
    """
    ex_parts: list[Exists] = []
    fa_parts: list[Forall] = []
    plain: list[Formula] = []
    for d in flatten_or(f):
        if isinstance(d, Exists) and _is_quantifier_free(d.body):
            ex_parts.append(d)
        elif isinstance(d, Forall) and _is_quantifier_free(d.body):
            fa_parts.append(d)
        elif _is_quantifier_free(d):
            plain.append(d)
        else:
            return None
    if ex_parts and not fa_parts:
        v = ex_parts[0].var
        bodies = [p.body if p.var == v else swap_xy(p.body) for p in ex_parts]
        return Exists(v, disjoin(bodies + plain))
    if len(fa_parts) == 1 and not ex_parts:
        return Forall(fa_parts[0].var, disjoin([fa_parts[0].body] + plain))
    return None


def _name_quantified_sub(f: Formula, state: TransformState) -> Formula:
    """Name one innermost quantified subformula with a fresh predicate.

    The definition is split into two implication conjuncts and requeued, so
    repeated application terminates with allowed shapes only.
    """
    target: Formula | None = None
    for node in walk(f):
        if isinstance(node, (Forall, Exists)) and node is not f and _is_quantifier_free(node.body):
            target = node
            break
    if target is None:
        raise AssertionError(f"no nameable subformula in {_fmt(f)}")
    fv = sorted(free_variables(target))
    p_name = state.new_pred("p", len(fv))
    p_atom = Atom(p_name, tuple(fv))
    replaced = _substitute(f, target, p_atom)
    state.trace.add("name-subformula", f"{p_name}{tuple(fv) if fv else ''} <-> {_fmt(target)}", (p_name,))
    forward = Implies(p_atom, target)
    backward = Implies(target, p_atom)
    out: list[Formula] = []
    for d in (forward, backward):
        g: Formula = d
        for v in reversed(fv):
            g = Forall(v, g)
        out.append(g)
    skolemize(out[0], state)
    skolemize(out[1], state)
    return replaced


# -- CNF ----------------------------------------------------------------------


class _Blowup(Exception):
    pass


def _expand_iff(f: Formula) -> Formula:
    """NNF with Iff and Implies expanded to and/or over literals."""
    f = simplify_nnf(f)
    if isinstance(f, Iff):
        a, b = _expand_iff(f.left), _expand_iff(f.right)
        na, nb = _expand_iff(simplify_nnf(Not(f.left))), _expand_iff(simplify_nnf(Not(f.right)))
        return _mk_and(_mk_or(na, b), _mk_or(a, nb))
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(_expand_iff(c) for c in kids))


def _distribute(f: Formula, limit: int) -> list[frozenset[Literal]]:
    if isinstance(f, Top):
        return []
    if isinstance(f, Bottom):
        return [frozenset()]
    if isinstance(f, And):
        return _merge_clause_sets(_distribute(f.left, limit), _distribute(f.right, limit), limit)
    if isinstance(f, Or):
        left = _distribute(f.left, limit)
        right = _distribute(f.right, limit)
        out: list[frozenset[Literal]] = []
        seen: set[frozenset[Literal]] = set()
        for a in left:
            for b in right:
                c = a | b
                if _is_tautology(c) or c in seen:
                    continue
                seen.add(c)
                out.append(c)
                if len(out) > limit:
                    raise _Blowup
        return out
    lit = _as_literal(f)
    return [frozenset([lit])]


def _merge_clause_sets(
    a: list[frozenset[Literal]], b: list[frozenset[Literal]], limit: int
) -> list[frozenset[Literal]]:
    # conjunction unions clause sets; only disjunctive products are limited
    out = list(a)
    seen = set(a)
    for c in b:
        if c not in seen:
            seen.add(c)
            out.append(c)
    return out


def _as_literal(f: Formula) -> Literal:
    if isinstance(f, Not):
        if isinstance(f.sub, (Atom, Equality)):
            return Literal(False, f.sub)
        raise AssertionError(f"unexpected negation in clause body: {_fmt(f)}")
    if isinstance(f, (Atom, Equality)):
        return Literal(True, f)
    raise AssertionError(f"unexpected node in clause body: {_fmt(f)}")


def _is_tautology(c: frozenset[Literal]) -> bool:
    for lit in c:
        if Literal(not lit.positive, lit.atom) in c:
            return True
        if lit.positive and isinstance(lit.atom, Equality) and lit.atom.left == lit.atom.right:
            return True
    return False


def _simplify_clause(c: frozenset[Literal]) -> frozenset[Literal] | None:
    """Drop trivially false literals; None when the clause is satisfied."""
    kept = []
    for lit in c:
        if isinstance(lit.atom, Equality) and lit.atom.left == lit.atom.right:
            if lit.positive:
                return None
            continue  # x != x is false, drop the literal
        kept.append(lit)
    return frozenset(kept)


def to_universal_cnf(f: Formula, state: TransformState) -> list[Clause]:
    """Clausify one universal formula (forall prefix with a boolean body).

    Iff and Implies expand by polarity; if distribution would exceed the
    clause limit, an inner subformula is named with a fresh predicate of
    matching arity (weights (1, 1): the definition is a conservative
    extension) and clausification restarts.
    """
    prefix: list[str] = []
    body = f
    while isinstance(body, Forall):
        prefix.append(body.var)
        body = body.body
    # definitions go on their own worklist so a named body never gets
    # re-expanded; every naming strictly shrinks the formula in hand
    pending = deque([body])
    raw: list[frozenset[Literal]] = []
    while pending:
        piece = pending.popleft()
        while True:
            expanded = _expand_iff(piece)
            try:
                raw.extend(_distribute(expanded, state.tseitin_limit))
                break
            except _Blowup:
                piece, definition = _tseitin_name(piece, state)
                pending.append(definition)
    out: list[Clause] = []
    seen: set[frozenset[Literal]] = set()
    for c in raw:
        s = _simplify_clause(c)
        if s is None or s in seen:
            continue
        seen.add(s)
        out.append(Clause(tuple(sorted(s, key=_literal_key))))
    return out


def _literal_key(lit: Literal) -> tuple:
    if isinstance(lit.atom, Atom):
        return (0, lit.atom.pred, lit.atom.args, lit.positive)
    return (1, lit.atom.left, lit.atom.right, lit.positive)


def _literalish(f: Formula) -> bool:
    if isinstance(f, Not):
        return _literalish(f.sub)
    return isinstance(f, (Atom, Equality, Top, Bottom))


def _tseitin_name(body: Formula, state: TransformState) -> tuple[Formula, Formula]:
    """Name an innermost proper connective subformula to curb distribution.

    Naming a connective whose operands are already literals removes one
    connective from the body per round and yields a definition that always
    distributes within any limit >= 2, so the naming loop terminates.
    """
    best: Formula | None = None
    for node in walk(body):
        if node is body:
            continue
        if isinstance(node, (And, Or, Iff, Implies)) and _literalish(node.left) and _literalish(node.right):
            best = node
            break
    if best is None:
        raise AssertionError("clause blowup with no nameable subformula")
    fv = sorted(free_variables(best))
    t_name = state.new_pred("t", len(fv))
    t_atom = Atom(t_name, tuple(fv))
    state.trace.add("tseitin", f"{t_name}{tuple(fv) if fv else ''} <-> {_fmt(best)}", (t_name,))
    replaced = _substitute(body, best, t_atom)
    return replaced, Iff(t_atom, best)


# -- cardinality separation ---------------------------------------------------


def _card_under_quantifier(f: Formula, inside: bool = False) -> CardinalityAtom | None:
    if isinstance(f, CardinalityAtom):
        return f if inside else None
    if isinstance(f, (Forall, Exists, CountExists)):
        return _card_under_quantifier(f.body, True)
    for c in children(f):
        found = _card_under_quantifier(c, inside)
        if found is not None:
            return found
    return None


def _split_mixed_card(conjunct: Formula, state: TransformState) -> None:
    """Turn a conjunct mixing cardinality atoms and logic into a pure
    cardinality condition plus queued definitions.

    Cardinality atoms are world-level constants, so one trapped under a
    quantifier is hoisted by branching on its truth value.  Maximal
    cardinality-free blocks are then closed sentences; each is named by a
    fresh nullary predicate whose truth is re-expressed as |@p| = 1.
    """
    work = conjunct
    while True:
        trapped = _card_under_quantifier(work)
        if trapped is None:
            break
        work = Or(
            And(trapped, _substitute(work, trapped, TRUE)),
            And(negate_cardinality(trapped), _substitute(work, trapped, FALSE)),
        )
        work = simplify_nnf(work)

    def rec(node: Formula) -> Formula:
        if isinstance(node, (CardinalityAtom, Top, Bottom)):
            return node
        if not _contains(node, CardinalityAtom):
            if isinstance(node, Atom) and not node.args:
                return CardinalityAtom(node.pred, "=", 0, 1)
            if isinstance(node, Not) and isinstance(node.sub, Atom) and not node.sub.args:
                return CardinalityAtom(node.sub.pred, "=", 0, 0)
            p_name = state.closed_block_names.get(node)
            if p_name is None:
                p_name = state.new_pred("p", 0)
                state.closed_block_names[node] = p_name
                p_atom = Atom(p_name, ())
                state.trace.add("name-closed-block", f"{p_name} <-> {_fmt(node)}", (p_name,))
                state.queue.append(Implies(p_atom, node))
                state.queue.append(Implies(node, p_atom))
            return CardinalityAtom(p_name, "=", 0, 1)
        if isinstance(node, (And, Or, Not, Implies, Iff)):
            return rebuild(node, tuple(rec(c) for c in children(node)))
        raise AssertionError(f"cardinality atom below a non-boolean node: {_fmt(node)}")

    state.card_parts.append(rec(work))


# -- closed counting subformulas ----------------------------------------------


def _find_closed_count(f: Formula) -> CountExists | None:
    for node in walk(f):
        if isinstance(node, CountExists) and node.comparator == "=" and not free_variables(node):
            return node
    return None


def _replace_closed_count(conjunct: Formula, target: CountExists, state: TransformState) -> Formula:
    """Closed exists[=k] v. body becomes the cardinality atom |@xi| = k."""
    body = target.body if target.var == "x" else swap_xy(target.body)
    xi_name = state.new_pred("xi", 1)
    state.queue.append(Forall("x", Iff(Atom(xi_name, ("x",)), body)))
    state.trace.add(
        "closed-counting",
        f"exists[={target.k}] {target.var}. {_fmt(target.body)} -> |{xi_name}| = {target.k}",
        (xi_name,),
    )
    replacement = CardinalityAtom(xi_name, "=", 0, target.k)
    out = _substitute(conjunct, target, replacement)
    mirror = CountExists("=", target.k, _other_var(target.var), swap_xy(target.body))
    return _substitute(out, mirror, replacement)


# -- guarded-shape recognition --------------------------------------------------


def _match_forall_exact(c: Formula) -> tuple[int, Formula] | None:
    """forall x. exists[=k] y. psi  ->  (k, psi in canonical orientation)."""
    if not isinstance(c, Forall):
        return None
    body = c.body
    if not isinstance(body, CountExists) or body.comparator != "=":
        return None
    if body.var == c.var:
        return None
    if not _is_quantifier_free(body.body):
        return None
    psi = body.body if (c.var, body.var) == ("x", "y") else swap_xy(body.body)
    return body.k, psi


def _match_exact_forall(c: Formula) -> tuple[int, Formula] | None:
    """exists[=k] x. forall y. psi  ->  (k, psi in canonical orientation)."""
    if not isinstance(c, CountExists) or c.comparator != "=":
        return None
    body = c.body
    if not isinstance(body, Forall) or body.var == c.var:
        return None
    if not _is_quantifier_free(body.body):
        return None
    psi = body.body if (c.var, body.var) == ("x", "y") else swap_xy(body.body)
    return c.k, psi


def _match_guarded(c: Formula) -> tuple[Formula, int, Formula] | None:
    """forall x. (guard | exists[=k] y. psi) -> (guard, k, canonical psi).

    Exactly one counting disjunct; the guard disjuncts must be free of
    counting and of the counting variable.
    """
    if not isinstance(c, Forall):
        return None
    disjuncts = flatten_or(c.body)
    counts = [d for d in disjuncts if isinstance(d, CountExists)]
    if len(counts) != 1 or counts[0].comparator != "=":
        return None
    ce = counts[0]
    if ce.var == c.var or not _is_quantifier_free(ce.body):
        return None
    rest = [d for d in disjuncts if d is not ce]
    if not rest:
        return None
    for d in rest:
        if _contains(d, CountExists):
            return None
        if ce.var in free_variables(d):
            return None
    guard = disjoin(rest)
    if (c.var, ce.var) == ("x", "y"):
        return guard, ce.k, ce.body
    return swap_xy(guard), ce.k, swap_xy(ce.body)


# -- the compiler ---------------------------------------------------------------


def compile_problem(
    sentence: Formula,
    vocab: Vocabulary,
    weights: WeightMap,
    *,
    atomic_fastpath: bool = True,
    merge_guards: bool = True,
    tseitin_limit: int = 64,
) -> CompiledProblem:
    from .logic import validate_c2

    if tseitin_limit < 2:
        raise ValueError("tseitin_limit must be at least 2")
    report = validate_c2(sentence, vocab, allow_generated=True)
    if not report.ok:
        raise ValueError(f"invalid sentence: {report}")

    state = TransformState.for_vocab(
        vocab,
        weights,
        atomic_fastpath=atomic_fastpath,
        merge_guards=merge_guards,
        tseitin_limit=tseitin_limit,
    )
    state.queue.extend(flatten_and(sentence))

    while state.queue or state.guarded:
        if not state.queue:
            _flush_guarded(state)
            continue
        c = state.queue.popleft()
        c = simplify_nnf(eliminate_bounded_counting(simplify_nnf(c)))
        if isinstance(c, Top):
            continue
        if isinstance(c, Bottom):
            state.unsat = True
            continue
        if isinstance(c, And):
            state.queue.extend(flatten_and(c))
            continue
        if _contains(c, CardinalityAtom):
            if _is_pure_card(c):
                state.card_parts.append(c)
            else:
                _split_mixed_card(c, state)
            continue
        if not _contains(c, CountExists):
            skolemize(c, state)
            continue
        # counting present: canonicalize outer variable, split conjunctions
        if isinstance(c, Forall):
            if c.var == "y":
                c = swap_xy(c)
            if isinstance(c.body, And):
                state.queue.extend(Forall(c.var, part) for part in flatten_and(c.body))
                continue
        m_fe = _match_forall_exact(c)
        if m_fe is not None:
            k, psi = m_fe
            r_name, rev = _name_body(psi, state)
            encode_forall_exact(r_name, k, state, rev)
            continue
        m_ef = _match_exact_forall(c)
        if m_ef is not None:
            k, psi = m_ef
            r_name, rev = _name_body(psi, state)
            encode_exact_forall(r_name, k, state, rev)
            continue
        m_g = _match_guarded(c)
        if m_g is not None:
            guard, k, psi = m_g
            r_name, rev = _name_body(psi, state)
            guard = _prepare_guard(guard, state)
            if state.merge_guards:
                state.guarded.setdefault((r_name, rev, k), []).append(guard)
            else:
                encode_guarded_counting(guard, r_name, k, state, rev)
            continue
        closed = _find_closed_count(c)
        if closed is not None:
            state.queue.append(_replace_closed_count(c, closed, state))
            continue
        neg = _find_negated_count(c)
        if neg is not None:
            state.queue.append(remove_negation(c, neg, state))
            continue
        rewritten = extract_exact_counting(c, state)
        if rewritten == c:
            raise AssertionError(f"no rule applies to conjunct: {_fmt(c)}")
        state.queue.append(rewritten)

    cnf: list[Clause] = []
    if state.unsat:
        cnf.append(Clause(()))
    seen: set[Clause] = set()
    for uf in state.universal:
        for clause in to_universal_cnf(uf, state):
            if clause not in seen:
                seen.add(clause)
                cnf.append(clause)

    card_condition = conjoin(state.card_parts) if state.card_parts else TRUE
    psi: list[str] = []
    for node in walk(card_condition):
        if isinstance(node, CardinalityAtom) and node.pred not in psi:
            psi.append(node.pred)

    return CompiledProblem(
        cnf=cnf,
        vocab=state.vocabulary(),
        weights=state.weight_map(),
        card_condition=card_condition,
        psi=tuple(psi),
        factors=tuple(state.factors),
        trace=state.trace,
        source_sentence=sentence,
        source_vocab=vocab,
        source_weights=weights,
        flags={
            "atomic_fastpath": atomic_fastpath,
            "merge_guards": merge_guards,
            "tseitin_limit": tseitin_limit,
        },
    )


def _find_negated_count(f: Formula) -> Formula | None:
    """The body of an innermost Not(CountExists(...)), if any."""
    for node in walk(f):
        if isinstance(node, Not) and isinstance(node.sub, CountExists):
            return node.sub
    return None


def _flush_guarded(state: TransformState) -> None:
    """Encode pooled guarded conjuncts, one application per (R, orientation, k) group."""
    (r_name, rev, k), guards = next(iter(state.guarded.items()))
    del state.guarded[(r_name, rev, k)]
    merged = conjoin(guards) if len(guards) > 1 else guards[0]
    if len(guards) > 1:
        shown = f"{r_name}(y, x)" if rev else f"{r_name}(x, y)"
        state.trace.add(
            "merge-guards",
            f"{len(guards)} guards for exists[={k}] y. {shown} merged conjunctively",
        )
    encode_guarded_counting(merged, r_name, k, state, rev)


def _prepare_guard(guard: Formula, state: TransformState) -> Formula:
    """Guards must be per-element conditions; name quantified guards."""
    if _is_quantifier_free(guard):
        return guard
    g_name = state.new_pred("g", 1)
    g_atom = Atom(g_name, ("x",))
    state.trace.add("name-guard", f"{g_name}(x) <-> {_fmt(guard)}", (g_name,))
    state.queue.append(Forall("x", Implies(g_atom, guard)))
    state.queue.append(Forall("x", Implies(guard, g_atom)))
    return g_atom


def compile_file(problem, **flags) -> CompiledProblem:
    """Compile a parsed problem file (validates the user sentence first)."""
    from .logic import validate_c2

    sentence = problem.sentence()
    report = validate_c2(sentence, problem.vocab, allow_generated=False)
    if not report.ok:
        raise ValueError(f"invalid sentence: {report}")
    return compile_problem(sentence, problem.vocab, problem.weights, **flags)
