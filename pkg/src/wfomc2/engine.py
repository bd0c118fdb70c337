"""Lifted counting core for universally quantified two-variable CNF.

The count is assembled from cells (complete atom assignments about one
element) and pair tables (assignments about an ordered pair of distinct
elements).  Summing over how many of the n elements land in each cell
gives the total in time polynomial in n:

    sum over (n_1..n_p), sum n_i = n:
        multinomial(n; n_1..n_p)
        * prod_i cellw_i^{n_i}
        * prod_{i<j} r_ij^{n_i n_j}
        * prod_i r_ii^{binom(n_i, 2)}

Predicates listed in `marked` contribute a symbolic variable per true
ground atom instead of their weight pair; evaluate() then substitutes
numbers (exact rationals or complex roots of unity) for those variables.
Marked predicates of arity <= 1 never need substitution at all: their
counts are fixed by the nullary branch and the cell composition (pair
assignments only touch non-reflexive binary atoms), so evaluate_by_count()
returns results split by those counts and only the arity-2 axes remain
symbolic.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .logic import VARIABLE_LETTERS, Atom, Equality, Pred, Vocabulary, WeightMap
from .rationals import ONE, Rat, ZERO, binomial
from .transform import Clause

MAX_CELL_BITS = 20
MAX_PAIR_BITS = 20
MAX_NULLARY = 16

Scalar = object  # Rat for exact evaluation, complex for root-of-unity probes


class EngineLimit(Exception):
    """Raised when the vocabulary is too large for cell enumeration."""


@dataclass(frozen=True)
class CellEntry:
    """Weight of one cell: rational constant times marked variables."""

    const: Rat
    expo: tuple[int, ...]


PairPoly = tuple[tuple[Rat, tuple[int, ...]], ...]


class _Branch:
    """Cell and pair data for one assignment of the nullary atoms."""

    def __init__(
        self,
        clauses: Sequence[Clause],
        unary: Sequence[Pred],
        binary: Sequence[Pred],
        weights: WeightMap,
        marked_index: dict[str, int],
    ) -> None:
        self.cells: list[CellEntry] = []
        self.pairs: dict[tuple[int, int], PairPoly] = {}
        u, b = len(unary), len(binary)
        if u + b > MAX_CELL_BITS or 2 * b > MAX_PAIR_BITS:
            raise EngineLimit(f"{u} unary and {b} binary predicates exceed the cell enumeration limit")
        cell_bit = {p.name: i for i, p in enumerate(unary)}
        for j, p in enumerate(binary):
            cell_bit[p.name] = u + j
        masks = self._valid_cells(clauses, cell_bit, u + b)
        m = len(marked_index)
        for mask in masks:
            const, expo = ONE, [0] * m
            for p in unary + binary:
                true = bool(mask >> cell_bit[p.name] & 1)
                idx = marked_index.get(p.name)
                if idx is not None:
                    expo[idx] += int(true)
                else:
                    w, wbar = weights.get(p.name)
                    const *= w if true else wbar
            self.cells.append(CellEntry(const, tuple(expo)))
        self._fill_pairs(clauses, masks, cell_bit, binary, weights, marked_index)

    @staticmethod
    def _valid_cells(clauses: Sequence[Clause], cell_bit: dict[str, int], nbits: int) -> list[int]:
        masks = list(range(1 << nbits))
        keep = []
        for mask in masks:
            ok = True
            for clause in clauses:
                sat = False
                for lit in clause.literals:
                    if isinstance(lit.atom, Equality):
                        if lit.positive:  # x = y holds on the diagonal
                            sat = True
                            break
                        continue
                    value = bool(mask >> cell_bit[lit.atom.pred] & 1)
                    if value == lit.positive:
                        sat = True
                        break
                if not sat:
                    ok = False
                    break
            if ok:
                keep.append(mask)
        return keep

    def _fill_pairs(
        self,
        clauses: Sequence[Clause],
        masks: list[int],
        cell_bit: dict[str, int],
        binary: Sequence[Pred],
        weights: WeightMap,
        marked_index: dict[str, int],
    ) -> None:
        p, b = len(masks), len(binary)
        q = 1 << (2 * b)
        pair_clauses = [c for c in clauses if c.variables() == {"x", "y"}]
        binary_index = {bp.name: j for j, bp in enumerate(binary)}
        valid = np.ones((p, p, q), dtype=bool)
        cell_bits = np.array(masks, dtype=np.int64)
        pair_ids = np.arange(q, dtype=np.int64)
        # bit j is R_j(a,b), bit b+j is R_j(b,a) for the ordered pair (a, b)
        for clause in pair_clauses:
            for swap in (False, True):
                sat = np.zeros((p, p, q), dtype=bool)
                for lit in clause.literals:
                    if isinstance(lit.atom, Equality):
                        if not lit.positive:  # x != y holds off the diagonal
                            sat |= True
                        continue
                    name = lit.atom.pred
                    args = lit.atom.args
                    if len(args) == 1 or args[0] == args[1]:
                        on_a = args[0] == ("y" if swap else "x")
                        bits = (cell_bits >> cell_bit[name] & 1).astype(bool)
                        term = bits[:, None, None] if on_a else bits[None, :, None]
                    else:
                        forward = args == ("x", "y")
                        if swap:
                            forward = not forward
                        j = binary_index[name]
                        bit = j if forward else b + j
                        term = (pair_ids >> bit & 1).astype(bool)[None, None, :]
                    sat |= term if lit.positive else ~term
                valid &= sat
        entries: list[tuple[Rat, tuple[int, ...]]] = []
        m = len(marked_index)
        for pid in range(q):
            const, expo = ONE, [0] * m
            for j, bp in enumerate(binary):
                idx = marked_index.get(bp.name)
                for bit in (j, b + j):
                    true = bool(pid >> bit & 1)
                    if idx is not None:
                        expo[idx] += int(true)
                    else:
                        w, wbar = weights.get(bp.name)
                        const *= w if true else wbar
            entries.append((const, tuple(expo)))
        for i in range(p):
            for j in range(i, p):
                acc: dict[tuple[int, ...], Rat] = {}
                for pid in np.nonzero(valid[i, j])[0]:
                    const, expo = entries[pid]
                    acc[expo] = acc.get(expo, ZERO) + const
                self.pairs[(i, j)] = tuple((c, e) for e, c in sorted(acc.items()) if c != 0)
        self._merge_interchangeable()

    def _pair(self, i: int, j: int) -> PairPoly:
        return self.pairs[(i, j) if i <= j else (j, i)]

    def _merge_interchangeable(self) -> None:
        """Collapse cells that the pair tables cannot tell apart.

        A group of g mutually interchangeable cells acts like one cell whose
        constant carries the factor g: elements split among the members in
        g^c ways and every split yields identical weight.
        """
        p = len(self.cells)
        if p > 400:
            return
        parent = list(range(p))

        def find(i: int) -> int:
            while parent[i] != i:
                parent[i] = parent[parent[i]]
                i = parent[i]
            return i

        for i in range(p):
            for j in range(i + 1, p):
                if find(i) == find(j):
                    continue
                if self.cells[i] != self.cells[j]:
                    continue
                rii = self._pair(i, i)
                if rii != self._pair(j, j) or rii != self._pair(i, j):
                    continue
                if all(self._pair(i, k) == self._pair(j, k) for k in range(p) if k != i and k != j):
                    parent[find(j)] = find(i)
        roots = sorted({find(i) for i in range(p)})
        if len(roots) == p:
            return
        index = {r: a for a, r in enumerate(roots)}
        sizes = [0] * len(roots)
        for i in range(p):
            sizes[index[find(i)]] += 1
        cells = []
        for r in roots:
            entry = self.cells[r]
            cells.append(CellEntry(entry.const * sizes[index[r]], entry.expo))
        pairs = {}
        for a, r in enumerate(roots):
            for b in range(a, len(roots)):
                pairs[(a, b)] = self._pair(r, roots[b])
        self.cells = cells
        self.pairs = pairs


class CellGraph:
    """Cells, pair tables and nullary branches for one compiled problem.

    Built once per clause set; evaluate() is then cheap enough to call at
    every interpolation node.
    """

    def __init__(
        self,
        clauses: Iterable[Clause],
        vocab: Vocabulary,
        weights: WeightMap,
        marked: Sequence[str] = (),
    ) -> None:
        clause_list = list(clauses)
        self.marked = tuple(marked)
        self.vocab = vocab
        # structural axes are counted directly; spectral axes need substitution
        self.structural = tuple(i for i, name in enumerate(self.marked) if vocab.arity(name) <= 1)
        self.spectral = tuple(i for i, name in enumerate(self.marked) if vocab.arity(name) == 2)
        marked_index = {name: i for i, name in enumerate(self.marked)}
        nullary = [p for p in vocab.predicates if p.arity == 0]
        unary = [p for p in vocab.predicates if p.arity == 1]
        binary = [p for p in vocab.predicates if p.arity == 2]
        if len(nullary) > MAX_NULLARY:
            raise EngineLimit(f"{len(nullary)} nullary predicates exceed the branching limit")
        for clause in clause_list:
            for lit in clause.literals:
                if isinstance(lit.atom, Atom):
                    for arg in lit.atom.args:
                        if not (len(arg) == 1 and arg in VARIABLE_LETTERS):
                            raise EngineLimit(f"constant {arg!r} is not supported by the lifted engine")
        # branches: (const, expo, branch) per consistent nullary assignment
        self.branches: list[tuple[Rat, tuple[int, ...], _Branch]] = []
        if any(not c.literals for c in clause_list):  # empty clause: no models
            return
        cache: dict[frozenset[Clause], _Branch] = {}
        for combo in range(1 << len(nullary)):
            assign = {p.name: bool(combo >> i & 1) for i, p in enumerate(nullary)}
            reduced = _reduce_clauses(clause_list, assign)
            if reduced is None:
                continue
            const, expo = ONE, [0] * len(self.marked)
            for p in nullary:
                idx = marked_index.get(p.name)
                if idx is not None:
                    expo[idx] += int(assign[p.name])
                else:
                    w, wbar = weights.get(p.name)
                    const *= w if assign[p.name] else wbar
            key = frozenset(reduced)
            branch = cache.get(key)
            if branch is None:
                branch = _Branch(reduced, unary, binary, weights, marked_index)
                cache[key] = branch
            self.branches.append((const, tuple(expo), branch))

    @property
    def cell_count(self) -> int:
        return max((len(br.cells) for _, _, br in self.branches), default=0)

    def evaluate(self, n: int, values: Sequence[Scalar] = ()) -> Scalar:
        """Count at domain size n with numbers substituted for marked variables."""
        if len(values) != len(self.marked):
            raise ValueError(f"expected {len(self.marked)} values, got {len(values)}")
        vals = tuple(values)
        exact = not any(isinstance(v, complex) for v in vals)
        if not exact:
            vals = tuple(complex(v) for v in vals)
        by_count = self.evaluate_by_count(n, _project(vals, self.spectral))
        struct_vals = _project(vals, self.structural)
        total: Scalar = ZERO if exact else complex(0.0)
        for key, value in by_count.items():
            term = value
            for e, v in zip(key, struct_vals):
                if e:
                    term = term * v**e
            total = total + term
        return total

    def evaluate_by_count(self, n: int, values: Sequence[Scalar] = ()) -> dict[tuple[int, ...], Scalar]:
        """Count at size n, split by the counts of the arity <= 1 marked axes.

        values substitutes numbers for the arity-2 axes only, aligned with
        self.spectral; keys follow self.structural order.  Absent keys are
        exact zeros.
        """
        if len(values) != len(self.spectral):
            raise ValueError(f"expected {len(self.spectral)} values, got {len(values)}")
        exact = not any(isinstance(v, complex) for v in values)
        zero: Scalar = ZERO if exact else complex(0.0)
        out: dict[tuple[int, ...], Scalar] = {}
        for const, expo, branch in self.branches:
            factor = _scaled(const, _project(expo, self.spectral), values, exact)
            if factor == 0:
                continue
            base = _project(expo, self.structural)
            _branch_sum_by_count(branch, n, values, exact, self.structural, self.spectral, factor, base, out, zero)
        return out


def _reduce_clauses(clauses: Sequence[Clause], assign: dict[str, bool]) -> list[Clause] | None:
    """Apply a nullary assignment; None when some clause becomes empty."""
    out = []
    for clause in clauses:
        lits = []
        sat = False
        for lit in clause.literals:
            if not isinstance(lit.atom, Equality) and lit.atom.pred in assign:
                if assign[lit.atom.pred] == lit.positive:
                    sat = True
                    break
                continue
            lits.append(lit)
        if sat:
            continue
        if not lits:
            return None
        out.append(Clause(tuple(lits)))
    return out


def _project(expo: tuple[int, ...], axes: tuple[int, ...]) -> tuple[int, ...]:
    return tuple(expo[i] for i in axes)


def _scaled(const: Rat, expo: tuple[int, ...], values: Sequence[Scalar], exact: bool) -> Scalar:
    base: Scalar = const if exact else float(const)
    for e, v in zip(expo, values):
        if e:
            base = base * v**e
    return base


def _branch_sum_by_count(
    branch: _Branch,
    n: int,
    values: Sequence[Scalar],
    exact: bool,
    struct_axes: tuple[int, ...],
    spec_axes: tuple[int, ...],
    outer: Scalar,
    base: tuple[int, ...],
    out: dict[tuple[int, ...], Scalar],
    zero: Scalar,
) -> None:
    one: Scalar = ONE if exact else complex(1.0)
    if n == 0:  # universal clauses are vacuous on the empty domain
        out[base] = out.get(base, zero) + outer
        return
    cellw = [_scaled(c.const, _project(c.expo, spec_axes), values, exact) for c in branch.cells]
    live = [i for i, w in enumerate(cellw) if w != 0]
    if not live:
        return
    weights = [cellw[i] for i in live]
    counts = [_project(branch.cells[i].expo, struct_axes) for i in live]
    rmat = [
        [_poly_value(branch.pairs[(min(a, b), max(a, b))], values, spec_axes, exact) for b in live]
        for a in live
    ]
    _composition_sum_by_count(weights, counts, rmat, n, one, zero, outer, base, out)


def _poly_value(poly: PairPoly, values: Sequence[Scalar], spec_axes: tuple[int, ...], exact: bool) -> Scalar:
    # pair entries never touch arity <= 1 axes, so projecting loses nothing
    total: Scalar = ZERO if exact else complex(0.0)
    for const, expo in poly:
        total = total + _scaled(const, _project(expo, spec_axes), values, exact)
    return total


def _composition_sum_by_count(
    cellw: list[Scalar],
    cellu: list[tuple[int, ...]],
    rmat: list[list[Scalar]],
    n: int,
    one: Scalar,
    zero: Scalar,
    outer: Scalar,
    base: tuple[int, ...],
    out: dict[tuple[int, ...], Scalar],
) -> None:
    """Distribute n elements among the cells, bucketing by structural counts."""
    p = len(cellw)

    def bump(key: tuple[int, ...], vec: tuple[int, ...], c: int) -> tuple[int, ...]:
        return tuple(a + c * b for a, b in zip(key, vec))

    def rec(i: int, remaining: int, acc: Scalar, key: tuple[int, ...], inter: list[Scalar]) -> None:
        if i == p - 1:
            c = remaining
            f = acc * cellw[i] ** c * inter[i] ** c * rmat[i][i] ** (c * (c - 1) // 2)
            if f != 0:
                full = bump(key, cellu[i], c) if c else key
                out[full] = out.get(full, zero) + outer * f
            return
        for c in range(remaining + 1):
            f = acc
            nkey = key
            if c:
                f = f * int(binomial(remaining, c)) * cellw[i] ** c * inter[i] ** c
                f = f * rmat[i][i] ** (c * (c - 1) // 2)
                if f == 0:
                    continue
                nkey = bump(key, cellu[i], c)
            nxt = inter
            if c:
                nxt = inter.copy()
                for k in range(i + 1, p):
                    nxt[k] = nxt[k] * rmat[i][k] ** c
            rec(i + 1, remaining - c, f, nkey, nxt)

    rec(0, n, one, base, [one] * p)


def wfomc_fo2(clauses: Iterable[Clause], vocab: Vocabulary, weights: WeightMap, n: int) -> Rat:
    """Exact weighted count of the universal CNF at domain size n."""
    graph = CellGraph(clauses, vocab, weights)
    return graph.evaluate(n)
