"""Shared test machinery.

Three independent sources of truth live here: a seeded generator of small
C2 problems (at most two unary and one binary predicate, counting bounds
k <= 2), a world evaluator that expands counting quantifiers into explicit
subset disjunctions (so it shares no code path with the oracle's counting
logic), and a ground-enumeration reference for the Markov logic reading
where a world's weight is the product of per-grounding multipliers.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass

import pytest

from wfomc2.logic import (
    And,
    Atom,
    Bottom,
    CardinalityAtom,
    CountExists,
    Equality,
    Exists,
    Forall,
    Formula,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
    Top,
    Vocabulary,
    WeightMap,
    children,
    conjoin,
    disjoin,
    free_variables,
    rebuild,
)
from wfomc2.oracle import domain_elements, ground_atoms, satisfies
from wfomc2.rationals import ONE, Rat, rat

SEED = 20260819

# (w, wbar) choices; the (1, -1) pair exercises signed counting.
WEIGHT_POOL: list[tuple[Rat, Rat]] = [
    (rat(1), rat(1)),
    (rat(2), rat(1)),
    (rat(1), rat(-1)),
    (rat(1) / 2, rat(1)),
    (rat(3), rat(2)),
    (rat(-1), rat(1)),
    (rat(2) / 3, rat(1)),
]


@dataclass(frozen=True)
class Instance:
    label: str
    sentence: Formula
    vocab: Vocabulary
    weights: WeightMap
    psi: tuple[str, ...]


# -- random C2 sentences ---------------------------------------------------


def _qf(rng: random.Random, vars_: tuple[str, ...], unary: list[Pred], binary: list[Pred]) -> Formula:
    atoms: list[Formula] = []
    for p in unary:
        atoms.extend(Atom(p.name, (v,)) for v in vars_)
    for p in binary:
        if len(vars_) == 2:
            atoms.append(Atom(p.name, ("x", "y")))
            atoms.append(Atom(p.name, ("y", "x")))
        atoms.extend(Atom(p.name, (v, v)) for v in vars_)
    if len(vars_) == 2 and rng.random() < 0.25:
        atoms.append(Equality("x", "y"))
    if not atoms:
        return Top()

    def leaf() -> Formula:
        a = rng.choice(atoms)
        return Not(a) if rng.random() < 0.4 else a

    def build(depth: int) -> Formula:
        if depth == 0 or rng.random() < 0.3:
            return leaf()
        op = rng.choice([And, Or, Implies, Iff])
        return op(build(depth - 1), build(depth - 1))

    return build(rng.randint(1, 2))


def _comparator(rng: random.Random) -> tuple[str, int]:
    cmp_ = rng.choice(["=", "=", "=", "<=", ">="])
    if cmp_ == "=":
        k = rng.choice([0, 1, 1, 2])
    elif cmp_ == "<=":
        k = rng.choice([1, 2])
    else:
        k = rng.choice([1, 2, 2])
    return cmp_, k


def _count_body(rng: random.Random, unary: list[Pred], binary: list[Pred]) -> Formula:
    r = binary[0]
    pick = rng.random()
    if pick < 0.45:
        return Atom(r.name, ("x", "y"))
    if pick < 0.7:
        return Atom(r.name, ("y", "x"))
    return _qf(rng, ("x", "y"), unary, binary)


def _part(rng: random.Random, unary: list[Pred], binary: list[Pred]) -> Formula:
    shapes = ["aa", "ae"]
    if binary:
        shapes += ["count", "count", "rev_count", "guard", "iff"]
    if unary:
        shapes += ["sent_count", "closed_e"]
    shape = rng.choice(shapes)
    if shape == "aa":
        return Forall("x", Forall("y", _qf(rng, ("x", "y"), unary, binary)))
    if shape == "ae":
        return Forall("x", Exists("y", _qf(rng, ("x", "y"), unary, binary)))
    if shape == "count":
        cmp_, k = _comparator(rng)
        return Forall("x", CountExists(cmp_, k, "y", _count_body(rng, unary, binary)))
    if shape == "rev_count":
        cmp_, k = _comparator(rng)
        return Forall("y", CountExists(cmp_, k, "x", Atom(binary[0].name, ("x", "y"))))
    if shape == "guard":
        cmp_, k = _comparator(rng)
        guard = _qf(rng, ("x",), unary, binary) if unary else Not(Atom(binary[0].name, ("x", "x")))
        return Forall("x", Or(guard, CountExists(cmp_, k, "y", _count_body(rng, unary, binary))))
    if shape == "iff":
        u = rng.choice(unary) if unary and rng.random() < 0.7 else None
        lhs = Atom(u.name, ("x",)) if u else Atom(binary[0].name, ("x", "x"))
        cmp_, k = _comparator(rng)
        return Forall("x", Iff(lhs, CountExists(cmp_, k, "y", _count_body(rng, unary, binary))))
    if shape == "sent_count":
        cmp_, k = _comparator(rng)
        return CountExists(cmp_, k, "x", _qf(rng, ("x",), unary, binary))
    return Exists("x", _qf(rng, ("x",), unary, binary))


def make_instance(rng: random.Random, idx: int, *, allow_cardinality: bool = True) -> Instance:
    n_unary = rng.randint(0, 2)
    unary = [Pred(name, 1) for name in ("a", "b")[:n_unary]]
    binary = [Pred("r", 2)] if (rng.random() < 0.85 or not unary) else []
    preds = unary + binary
    parts = [_part(rng, unary, binary) for _ in range(rng.randint(1, 2))]
    if allow_cardinality and binary and rng.random() < 0.3:
        bound_kind = rng.random()
        if bound_kind < 0.5:
            parts.append(CardinalityAtom("r", rng.choice(["=", "<=", ">="]), 0, rng.randint(0, 3)))
        else:
            parts.append(CardinalityAtom("r", "=", 1, 0))  # |r| = n
    weights = WeightMap({p.name: rng.choice(WEIGHT_POOL) for p in preds})
    return Instance(
        label=f"gen{idx}",
        sentence=conjoin(parts),
        vocab=Vocabulary(tuple(preds)),
        weights=weights,
        psi=tuple(p.name for p in preds),
    )


def build_corpus(count: int, *, seed: int = SEED, allow_cardinality: bool = True) -> list[Instance]:
    """Generate instances, keeping those whose compiled vocabulary stays
    inside the engine's cell-enumeration budget (a stack of k=2 constraints
    can introduce enough fresh predicates to blow past it)."""
    from wfomc2.transform import compile_problem

    rng = random.Random(seed)
    out: list[Instance] = []
    idx = 0
    while len(out) < count:
        inst = make_instance(rng, idx, allow_cardinality=allow_cardinality)
        idx += 1
        cp = compile_problem(inst.sentence, inst.vocab, inst.weights)
        arities = [p.arity for p in cp.vocab.predicates]
        if arities.count(1) + arities.count(2) > 10 or arities.count(2) > 4:
            continue
        out.append(inst)
    return out


@pytest.fixture(scope="session")
def corpus() -> list[Instance]:
    """The main generated corpus; size comfortably above the 100 floor."""
    return build_corpus(110)


# -- independent evaluator: counting via subset expansion -------------------


def _subst(f: Formula, var: str, const: str) -> Formula:
    if isinstance(f, (Forall, Exists)) and f.var == var:
        return f
    if isinstance(f, CountExists) and f.var == var:
        return f
    if isinstance(f, Atom):
        return Atom(f.pred, tuple(const if a == var else a for a in f.args))
    if isinstance(f, Equality):
        left = const if f.left == var else f.left
        right = const if f.right == var else f.right
        return Equality(left, right)
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(_subst(c, var, const) for c in kids))


def expand_counting(f: Formula, domain: tuple[str, ...]) -> Formula:
    """Rewrite every counting quantifier into a disjunction over the exact
    subsets of the domain that witness it."""
    if isinstance(f, CountExists):
        body = expand_counting(f.body, domain)
        grounded = [_subst(body, f.var, e) for e in domain]
        options: list[Formula] = []
        for chosen in itertools.product((False, True), repeat=len(domain)):
            got = sum(chosen)
            if f.comparator == "=" and got != f.k:
                continue
            if f.comparator == "<=" and got > f.k:
                continue
            if f.comparator == ">=" and got < f.k:
                continue
            options.append(conjoin([g if c else Not(g) for g, c in zip(grounded, chosen)]))
        return disjoin(options) if options else Bottom()
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(expand_counting(c, domain) for c in kids))


# -- multiplicative-weight Markov logic reference ---------------------------


def mln_reference_z(
    formulas: list[tuple[Rat | None, Formula]], vocab: Vocabulary, n: int
) -> Rat:
    """Z by direct enumeration: each world contributes the product over soft
    formulas of multiplier^(number of satisfied groundings), and hard
    formulas must hold for every grounding."""
    domain = domain_elements(n)
    atoms = ground_atoms(vocab, domain)
    prepared = []
    for mult, f in formulas:
        fv = sorted(free_variables(f))
        combos = list(itertools.product(domain, repeat=len(fv)))
        prepared.append((mult, f, fv, combos))
    z = rat(0)
    for bits in range(1 << len(atoms)):
        world = frozenset(a for i, a in enumerate(atoms) if bits >> i & 1)
        weight = ONE
        alive = True
        for mult, f, fv, combos in prepared:
            sat = sum(1 for combo in combos if satisfies(f, world, domain, dict(zip(fv, combo))))
            if mult is None:
                if sat != len(combos):
                    alive = False
                    break
            else:
                weight *= mult**sat
        if alive:
            z += weight
    return z
