"""Brute-force ground-truth engine over tiny domains.

Enumerates every world (truth assignment to all ground atoms), evaluates the
sentence directly, and sums exact world weights.  Two evaluators: a plain
recursive one that is the semantic reference, and a vectorized one that
processes worlds as numpy bitmask chunks and aggregates weight-equivalence
classes with bincount, so domains up to the atom cap stay fast.  Tests keep
both and cross-check them.

Worlds are indexed by bitmask over a fixed ground-atom order: predicates in
vocabulary order, argument tuples in lexicographic product order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .logic import (
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
    Top,
    Vocabulary,
    WeightMap,
    constants_in,
    is_variable,
)
from .rationals import ONE, Rat, ZERO, ipow

GroundAtom = tuple[str, tuple[str, ...]]

DEFAULT_ATOM_CAP = 24
_CHUNK_BITS = 20


class OracleCapExceeded(Exception):
    """The ground-atom count is above the enumeration cap."""


def domain_elements(n: int) -> tuple[str, ...]:
    if n < 1:
        raise ValueError("domain size must be >= 1")
    return tuple(f"e{i}" for i in range(1, n + 1))


def ground_atoms(vocab: Vocabulary, domain: tuple[str, ...]) -> list[GroundAtom]:
    atoms: list[GroundAtom] = []
    for p in vocab.predicates:
        for args in itertools.product(domain, repeat=p.arity):
            atoms.append((p.name, args))
    return atoms


def _resolve(term: str, env: dict[str, str], domain: tuple[str, ...]) -> str:
    if is_variable(term):
        try:
            return env[term]
        except KeyError:
            raise ValueError(f"unbound variable {term!r}") from None
    if term not in domain:
        raise ValueError(f"constant {term!r} is not a domain element")
    return term


def satisfies(
    f: Formula,
    world: frozenset[GroundAtom] | set[GroundAtom],
    domain: tuple[str, ...],
    env: dict[str, str] | None = None,
) -> bool:
    """Reference evaluator: direct recursion over the formula."""
    env = env or {}
    if isinstance(f, Top):
        return True
    if isinstance(f, Bottom):
        return False
    if isinstance(f, Atom):
        args = tuple(_resolve(a, env, domain) for a in f.args)
        return (f.pred, args) in world
    if isinstance(f, Equality):
        return _resolve(f.left, env, domain) == _resolve(f.right, env, domain)
    if isinstance(f, Not):
        return not satisfies(f.sub, world, domain, env)
    if isinstance(f, And):
        return satisfies(f.left, world, domain, env) and satisfies(f.right, world, domain, env)
    if isinstance(f, Or):
        return satisfies(f.left, world, domain, env) or satisfies(f.right, world, domain, env)
    if isinstance(f, Implies):
        return (not satisfies(f.left, world, domain, env)) or satisfies(f.right, world, domain, env)
    if isinstance(f, Iff):
        return satisfies(f.left, world, domain, env) == satisfies(f.right, world, domain, env)
    if isinstance(f, Forall):
        return all(satisfies(f.body, world, domain, {**env, f.var: d}) for d in domain)
    if isinstance(f, Exists):
        return any(satisfies(f.body, world, domain, {**env, f.var: d}) for d in domain)
    if isinstance(f, CountExists):
        c = sum(1 for d in domain if satisfies(f.body, world, domain, {**env, f.var: d}))
        if f.comparator == "=":
            return c == f.k
        if f.comparator == "<=":
            return c <= f.k
        return c >= f.k
    if isinstance(f, CardinalityAtom):
        c = cardinality(world, f.pred)
        return f.holds(c, len(domain))
    raise TypeError(f"cannot evaluate {type(f).__name__}")


def cardinality(world: frozenset[GroundAtom] | set[GroundAtom], pred: str) -> int:
    return sum(1 for (p, _) in world if p == pred)


def world_weight(
    world: frozenset[GroundAtom] | set[GroundAtom],
    vocab: Vocabulary,
    weights: WeightMap,
    n: int,
) -> Rat:
    total = ONE
    for p in vocab.predicates:
        w, wb = weights.get(p.name)
        true_count = cardinality(world, p.name)
        m = n ** p.arity
        total *= ipow(w, true_count) * ipow(wb, m - true_count)
    return total


def enumerate_worlds(vocab: Vocabulary, n: int):
    """Yield every world as a frozenset of ground atoms (reference order)."""
    domain = domain_elements(n)
    atoms = ground_atoms(vocab, domain)
    if len(atoms) > DEFAULT_ATOM_CAP:
        raise OracleCapExceeded(f"{len(atoms)} ground atoms exceeds cap {DEFAULT_ATOM_CAP}")
    for mask in range(1 << len(atoms)):
        yield frozenset(a for i, a in enumerate(atoms) if mask >> i & 1)


# -- vectorized evaluation ----------------------------------------------------


@dataclass
class _Grid:
    domain: tuple[str, ...]
    atom_index: dict[GroundAtom, int]
    pred_masks: dict[str, int]


def _build_grid(vocab: Vocabulary, n: int) -> _Grid:
    domain = domain_elements(n)
    atoms = ground_atoms(vocab, domain)
    atom_index = {a: i for i, a in enumerate(atoms)}
    pred_masks: dict[str, int] = {p.name: 0 for p in vocab.predicates}
    for (pred, _), i in atom_index.items():
        pred_masks[pred] |= 1 << i
    return _Grid(domain, atom_index, pred_masks)


def _eval_vec(f: Formula, grid: _Grid, masks: np.ndarray, env: dict[str, str], n: int) -> np.ndarray:
    if isinstance(f, Top):
        return np.ones(masks.shape, dtype=bool)
    if isinstance(f, Bottom):
        return np.zeros(masks.shape, dtype=bool)
    if isinstance(f, Atom):
        args = tuple(_resolve(a, env, grid.domain) for a in f.args)
        i = grid.atom_index[(f.pred, args)]
        return (masks >> i & 1).astype(bool)
    if isinstance(f, Equality):
        same = _resolve(f.left, env, grid.domain) == _resolve(f.right, env, grid.domain)
        return np.full(masks.shape, same, dtype=bool)
    if isinstance(f, Not):
        return ~_eval_vec(f.sub, grid, masks, env, n)
    if isinstance(f, And):
        return _eval_vec(f.left, grid, masks, env, n) & _eval_vec(f.right, grid, masks, env, n)
    if isinstance(f, Or):
        return _eval_vec(f.left, grid, masks, env, n) | _eval_vec(f.right, grid, masks, env, n)
    if isinstance(f, Implies):
        return ~_eval_vec(f.left, grid, masks, env, n) | _eval_vec(f.right, grid, masks, env, n)
    if isinstance(f, Iff):
        return _eval_vec(f.left, grid, masks, env, n) == _eval_vec(f.right, grid, masks, env, n)
    if isinstance(f, Forall):
        out = np.ones(masks.shape, dtype=bool)
        for d in grid.domain:
            out &= _eval_vec(f.body, grid, masks, {**env, f.var: d}, n)
        return out
    if isinstance(f, Exists):
        out = np.zeros(masks.shape, dtype=bool)
        for d in grid.domain:
            out |= _eval_vec(f.body, grid, masks, {**env, f.var: d}, n)
        return out
    if isinstance(f, CountExists):
        counts = np.zeros(masks.shape, dtype=np.int16)
        for d in grid.domain:
            counts += _eval_vec(f.body, grid, masks, {**env, f.var: d}, n)
        if f.comparator == "=":
            return counts == f.k
        if f.comparator == "<=":
            return counts <= f.k
        return counts >= f.k
    if isinstance(f, CardinalityAtom):
        counts = np.bitwise_count(masks & grid.pred_masks[f.pred])
        bound = f.bound(n)
        return {
            "=": counts == bound,
            "<=": counts <= bound,
            ">=": counts >= bound,
            "<": counts < bound,
            ">": counts > bound,
        }[f.comparator]
    raise TypeError(f"cannot evaluate {type(f).__name__}")


def _class_weight(
    counts: tuple[int, ...], preds: list[tuple[str, int]], weights: WeightMap
) -> Rat:
    total = ONE
    for (name, m), c in zip(preds, counts):
        w, wb = weights.get(name)
        total *= ipow(w, c) * ipow(wb, m - c)
    return total


def _aggregate(
    sentence: Formula,
    vocab: Vocabulary,
    weights: WeightMap,
    n: int,
    key_preds: list[str],
    atom_cap: int,
) -> dict[tuple[int, ...], Rat]:
    """Sum world weights over satisfying worlds, grouped by key-pred counts.

    key_preds lists the predicates whose true-atom counts form the grouping
    key; predicates with non-default weights are always folded into the
    weight of each class so the per-world product never materializes.
    """
    grid = _build_grid(vocab, n)
    total_atoms = len(grid.atom_index)
    if total_atoms > atom_cap:
        raise OracleCapExceeded(f"{total_atoms} ground atoms exceeds cap {atom_cap}")

    weighted = [p.name for p in vocab.predicates if not weights.is_default(p.name)]
    class_preds = list(dict.fromkeys(key_preds + weighted))  # ordered union
    sizes = [n ** vocab.arity(p) for p in class_preds]
    strides = []
    s = 1
    for m in sizes:
        strides.append(s)
        s *= m + 1
    pred_info = [(p, n ** vocab.arity(p)) for p in class_preds]

    accum: dict[tuple[int, ...], int] = {}
    total_worlds = 1 << total_atoms
    chunk = 1 << min(_CHUNK_BITS, total_atoms)
    for start in range(0, total_worlds, chunk):
        masks = np.arange(start, min(start + chunk, total_worlds), dtype=np.uint64)
        sat = _eval_vec(sentence, grid, masks, {}, n)
        if not sat.any():
            continue
        good = masks[sat]
        if class_preds:
            keys = np.zeros(good.shape, dtype=np.int64)
            for (p, _), stride in zip(pred_info, strides):
                keys += np.bitwise_count(good & np.uint64(grid.pred_masks[p])).astype(np.int64) * stride
            binc = np.bincount(keys)
            for key_val in np.nonzero(binc)[0]:
                counts = []
                kv = int(key_val)
                for m in sizes:
                    counts.append(kv % (m + 1))
                    kv //= m + 1
                tup = tuple(counts)
                accum[tup] = accum.get(tup, 0) + int(binc[key_val])
        else:
            accum[()] = accum.get((), 0) + int(good.size)

    out: dict[tuple[int, ...], Rat] = {}
    k = len(key_preds)
    for counts, mult in accum.items():
        weight = _class_weight(counts, pred_info, weights) * mult
        key = counts[:k]
        out[key] = out.get(key, ZERO) + weight
    return out


def brute_wfomc(
    sentence: Formula,
    vocab: Vocabulary,
    weights: WeightMap,
    n: int,
    *,
    mode: str = "vector",
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> Rat:
    """Exact weighted count of models of sentence over n elements."""
    for c in constants_in(sentence):
        if c not in domain_elements(n):
            raise ValueError(f"constant {c!r} is not a domain element")
    if mode == "vector":
        table = _aggregate(sentence, vocab, weights, n, [], atom_cap)
        return table.get((), ZERO)
    if mode != "naive":
        raise ValueError(f"unknown oracle mode {mode!r}")
    domain = domain_elements(n)
    atoms = ground_atoms(vocab, domain)
    if len(atoms) > atom_cap:
        raise OracleCapExceeded(f"{len(atoms)} ground atoms exceeds cap {atom_cap}")
    total = ZERO
    for mask in range(1 << len(atoms)):
        world = frozenset(a for i, a in enumerate(atoms) if mask >> i & 1)
        if satisfies(sentence, world, domain):
            total += world_weight(world, vocab, weights, n)
    return total


def brute_wmc_table(
    sentence: Formula,
    vocab: Vocabulary,
    weights: WeightMap,
    n: int,
    psi: list[str],
    *,
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> dict[tuple[int, ...], Rat]:
    """Map psi cardinality vectors to exact weighted counts (zeros omitted)."""
    for p in psi:
        if not vocab.has(p):
            raise ValueError(f"psi predicate {p!r} is not declared")
    table = _aggregate(sentence, vocab, weights, n, list(psi), atom_cap)
    return {k: v for k, v in table.items() if v != 0}
