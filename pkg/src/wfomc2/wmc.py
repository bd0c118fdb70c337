"""Tables of counts split by relation cardinalities.

The count with symbolic weights for the tracked predicates is a polynomial
whose coefficient at exponent vector (n_1..n_m) is the weighted count of
worlds realizing exactly those cardinalities.  Coefficients are recovered
exactly by evaluating at integer nodes and interpolating; the dft backend
trades exactness for float arithmetic at roots of unity.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from math import gcd
from typing import Iterable, Sequence

import numpy as np

from .engine import CellGraph
from .logic import And, Bottom, CardinalityAtom, Formula, Not, Or, Top, Vocabulary, WeightMap
from .rationals import ONE, Rat, ZERO, factorial, rat
from .transform import (
    Clause,
    CompiledProblem,
    compile_problem,
    evaluate_multiplier,
    specialize_sentence,
)


class InterpolationCheckFailed(Exception):
    """The reconstructed polynomial disagrees with a held-out evaluation."""


class TableError(Exception):
    pass


@dataclass(frozen=True)
class WmcTable:
    """Counts indexed by cardinality vectors over the tracked predicates."""

    preds: tuple[str, ...]
    bounds: tuple[int, ...]
    entries: dict[tuple[int, ...], Rat]

    def get(self, key: tuple[int, ...]) -> Rat:
        return self.entries.get(key, ZERO)

    def rows(self) -> Iterable[tuple[tuple[int, ...], Rat]]:
        """Full grid in lexicographic order, zeros included."""
        for key in itertools.product(*(range(b + 1) for b in self.bounds)):
            yield key, self.get(key)

    def to_csv(self) -> str:
        header = ",".join(f"n_{p}" for p in self.preds) + ",value_num,value_den"
        lines = [header]
        for key, value in self.rows():
            q = rat(value)
            lines.append(",".join(str(k) for k in key) + f",{q.numerator},{q.denominator}")
        return "\n".join(lines) + "\n"


def lagrange_interpolate(xs: Sequence[int], ys: Sequence[Rat]) -> list[Rat]:
    """Exact coefficients (constant term first) through the given points."""
    d = len(xs) - 1
    if len(set(xs)) != len(xs):
        raise ValueError("interpolation nodes must be distinct")
    if len(ys) != d + 1:
        raise ValueError("one value per node required")
    master = [1]  # prod (X - x_i), integer coefficients, low to high
    for x in xs:
        nxt = [0] * (len(master) + 1)
        for j, c in enumerate(master):
            nxt[j + 1] += c
            nxt[j] -= x * c
        master = nxt
    consecutive = list(xs) == list(range(xs[0], xs[0] + d + 1))
    denoms = []
    for i, x in enumerate(xs):
        if consecutive:
            sign = -1 if (d - i) % 2 else 1
            denoms.append(sign * factorial(i) * factorial(d - i))
        else:
            prod = 1
            for j, other in enumerate(xs):
                if j != i:
                    prod *= x - other
            denoms.append(prod)
    # common-denominator accumulation keeps the inner loop in integers
    lcm = 1
    for y in ys:
        lcm = lcm * rat(y).denominator // _gcd(lcm, rat(y).denominator)
    acc = [0] * (d + 1)
    dlcm = 1
    for den in denoms:
        dlcm = dlcm * abs(den) // _gcd(dlcm, den)
    for x, y, den in zip(xs, ys, denoms):
        # quotient of master by (X - x), by synthetic division from the top
        q = [0] * (d + 1)
        carry = master[d + 1]
        for j in range(d, -1, -1):
            q[j] = carry
            carry = master[j] + x * carry
        scale = (rat(y).numerator * (lcm // rat(y).denominator)) * (dlcm // den)
        for j in range(d + 1):
            if q[j]:
                acc[j] += scale * q[j]
    return [rat(a) / rat(lcm * dlcm) for a in acc]


def _gcd(a: int, b: int) -> int:
    return gcd(int(a), int(b))


def _poly_eval(coeffs: Sequence[Rat], x: Rat) -> Rat:
    total = ZERO
    for c in reversed(coeffs):
        total = total * x + c
    return total


def wmc_table(
    clauses: Iterable[Clause],
    vocab: Vocabulary,
    weights: WeightMap,
    psi: Sequence[str],
    n: int,
    *,
    backend: str = "interpolation",
    check: bool = True,
    graph: CellGraph | None = None,
) -> WmcTable:
    """Exact count per cardinality vector of the psi predicates at size n."""
    if n < 1:
        raise TableError("domain size must be at least 1")
    preds = tuple(psi)
    for name in preds:
        if not vocab.has(name):
            raise TableError(f"unknown predicate {name!r} in psi")
    bounds = tuple(n ** vocab.arity(name) for name in preds)
    if graph is None:
        graph = CellGraph(clauses, vocab, weights, marked=preds)
    if backend == "interpolation":
        raw = _univariate_entries(graph, bounds, n, check)
    elif backend == "multivariate":
        raw = _multivariate_entries(graph, bounds, n, check)
    else:
        raise TableError(f"unknown backend {backend!r}")
    entries: dict[tuple[int, ...], Rat] = {}
    for key, value in raw.items():
        if value == 0:
            continue
        scale = ONE
        for name, count, bound in zip(preds, key, bounds):
            w, wbar = weights.get(name)
            scale *= w**count * wbar ** (bound - count)
        if scale != 0:
            entries[key] = value * scale
    return WmcTable(preds, bounds, entries)


def _assemble(m: int, struct: tuple[int, ...], bucket: tuple[int, ...], spec: tuple[int, ...], counts: Sequence[int]) -> tuple[int, ...]:
    full = [0] * m
    for j, axis in enumerate(struct):
        full[axis] = bucket[j]
    for i, axis in enumerate(spec):
        full[axis] = counts[i]
    return tuple(full)


def _univariate_entries(
    graph: CellGraph, bounds: tuple[int, ...], n: int, check: bool
) -> dict[tuple[int, ...], Rat]:
    spec, struct = graph.spectral, graph.structural
    strides = []
    radix = 1
    for axis in spec:
        strides.append(radix)
        radix *= bounds[axis] + 1
    degree = radix - 1
    xs = list(range(1, degree + 2))
    tables = [graph.evaluate_by_count(n, tuple(rat(t) ** s for s in strides)) for t in xs]
    heldout = graph.evaluate_by_count(n, tuple(rat(degree + 2) ** s for s in strides)) if check else {}
    buckets = set().union(*tables) if tables else set()
    out: dict[tuple[int, ...], Rat] = {}
    for bucket in sorted(buckets):
        ys = [t.get(bucket, ZERO) for t in tables]
        coeffs = lagrange_interpolate(xs, ys)
        if check and _poly_eval(coeffs, rat(degree + 2)) != heldout.get(bucket, ZERO):
            raise InterpolationCheckFailed(f"held-out node {degree + 2} disagrees")
        for e, c in enumerate(coeffs):
            if c == 0:
                continue
            counts = []
            rest = e
            for axis in spec:
                counts.append(rest % (bounds[axis] + 1))
                rest //= bounds[axis] + 1
            out[_assemble(len(bounds), struct, bucket, spec, counts)] = c
    if check and any(heldout.get(b, ZERO) != 0 for b in heldout if b not in buckets):
        raise InterpolationCheckFailed("held-out node realizes an unseen count vector")
    return out


def _multivariate_entries(
    graph: CellGraph, bounds: tuple[int, ...], n: int, check: bool
) -> dict[tuple[int, ...], Rat]:
    spec, struct = graph.spectral, graph.structural
    shape = tuple(bounds[axis] + 1 for axis in spec)
    nodes = list(itertools.product(*(range(s) for s in shape)))
    tables = {idx: graph.evaluate_by_count(n, tuple(rat(k + 1) for k in idx)) for idx in nodes}
    probes = tuple(rat(s + 1) for s in shape)
    heldout = graph.evaluate_by_count(n, probes) if check else {}
    buckets = set().union(*tables.values()) if tables else set()
    out: dict[tuple[int, ...], Rat] = {}
    for bucket in sorted(buckets):
        grid = np.empty(shape, dtype=object)
        for idx in nodes:
            grid[idx] = tables[idx].get(bucket, ZERO)
        for axis in range(len(shape)):
            work = np.moveaxis(grid, axis, -1).copy()
            xs = list(range(1, shape[axis] + 1))
            flat = work.reshape(-1, shape[axis])
            for row in range(flat.shape[0]):
                flat[row, :] = lagrange_interpolate(xs, list(flat[row, :]))
            grid = np.moveaxis(work, -1, axis)
        if check:
            total = ZERO
            for idx in nodes:
                c = grid[idx]
                if c == 0:
                    continue
                term = c
                for k, t in zip(idx, probes):
                    term = term * t**k
                total += term
            if total != heldout.get(bucket, ZERO):
                raise InterpolationCheckFailed("held-out grid node disagrees")
        for idx in nodes:
            if grid[idx] != 0:
                out[_assemble(len(bounds), struct, bucket, spec, idx)] = grid[idx]
    if check and any(heldout.get(b, ZERO) != 0 for b in heldout if b not in buckets):
        raise InterpolationCheckFailed("held-out grid node realizes an unseen count vector")
    return out


def dft_wmc_table(
    clauses: Iterable[Clause],
    vocab: Vocabulary,
    weights: WeightMap,
    psi: Sequence[str],
    n: int,
    *,
    tol: float = 1e-6,
) -> tuple[dict[tuple[int, ...], float], float]:
    """Float table via roots of unity; returns (entries, max imaginary residue).

    Only the arity-2 axes go through the transform; arity <= 1 axes are
    counted exactly, so rounding error cannot leak across buckets.
    """
    preds = tuple(psi)
    bounds = tuple(n ** vocab.arity(name) for name in preds)
    graph = CellGraph(clauses, vocab, weights, marked=preds)
    spec, struct = graph.spectral, graph.structural
    shape = tuple(bounds[axis] + 1 for axis in spec)
    if not shape:  # every axis is exact, nothing to transform
        exact = graph.evaluate_by_count(n, ())
        flat = {}
        for bucket, value in exact.items():
            key = _assemble(len(bounds), struct, bucket, spec, ())
            scale = 1.0
            for name, count, bound in zip(preds, key, bounds):
                w, wbar = weights.get(name)
                scale *= float(w) ** count * float(wbar) ** (bound - count)
            flat[key] = float(value) * scale
        return flat, 0.0
    nodes = list(itertools.product(*(range(s) for s in shape)))
    tables = {}
    for idx in nodes:
        values = tuple(complex(np.exp(-2j * np.pi * k / s)) for k, s in zip(idx, shape))
        tables[idx] = graph.evaluate_by_count(n, values)
    buckets = sorted(set().union(*tables.values())) if tables else []
    residue = 0.0
    entries: dict[tuple[int, ...], float] = {}
    for bucket in buckets:
        grid = np.zeros(shape, dtype=complex)
        for idx in nodes:
            grid[idx] = tables[idx].get(bucket, 0.0)
        coeffs = np.fft.ifftn(grid)
        if coeffs.size:
            residue = max(residue, float(np.abs(coeffs.imag).max()))
        for idx in nodes:
            key = _assemble(len(bounds), struct, bucket, spec, idx)
            value = float(coeffs[idx].real)
            scale = 1.0
            for name, count, bound in zip(preds, key, bounds):
                w, wbar = weights.get(name)
                scale *= float(w) ** count * float(wbar) ** (bound - count)
            entries[key] = value * scale
    if residue > tol:
        raise InterpolationCheckFailed(f"imaginary residue {residue:.3e} exceeds {tol:.1e}")
    return entries, residue


def condition_holds(cond: Formula, counts: dict[str, int], n: int) -> bool:
    """Truth of a boolean combination of cardinality atoms."""
    if isinstance(cond, Top):
        return True
    if isinstance(cond, Bottom):
        return False
    if isinstance(cond, CardinalityAtom):
        return cond.holds(counts[cond.pred], n)
    if isinstance(cond, Not):
        return not condition_holds(cond.body, counts, n)
    if isinstance(cond, And):
        return all(condition_holds(p, counts, n) for p in (cond.left, cond.right))
    if isinstance(cond, Or):
        return any(condition_holds(p, counts, n) for p in (cond.left, cond.right))
    raise TableError(f"not a cardinality condition: {cond!r}")


def filtered_sum(table: WmcTable, cond: Formula, n: int) -> Rat:
    total = ZERO
    for key, value in table.entries.items():
        counts = dict(zip(table.preds, key))
        if condition_holds(cond, counts, n):
            total += value
    return total


def project(table: WmcTable, keep: Sequence[str]) -> WmcTable:
    """Sum out every axis not listed in keep."""
    pos = [table.preds.index(name) for name in keep]
    bounds = tuple(table.bounds[i] for i in pos)
    out: dict[tuple[int, ...], Rat] = {}
    for key, value in table.entries.items():
        sub = tuple(key[i] for i in pos)
        out[sub] = out.get(sub, ZERO) + value
    return WmcTable(tuple(keep), bounds, {k: v for k, v in out.items() if v != 0})


@dataclass(frozen=True)
class CountBreakdown:
    raw: Rat
    multiplier: Rat
    value: Rat


def _specialized(cp: CompiledProblem, n: int) -> CompiledProblem:
    narrowed = specialize_sentence(cp.source_sentence, n)
    return compile_problem(narrowed, cp.source_vocab, cp.source_weights, **cp.flags)


class LiftedCounter:
    """Counts one compiled problem at many sizes, reusing cell graphs.

    Cell graphs do not depend on the domain size, so a size range costs one
    graph per marking plus the per-size evaluations.  Problems whose counting
    bounds exceed n are recompiled against a narrowed sentence for that size
    alone (small n only) and bypass the cache.
    """

    def __init__(self, cp: CompiledProblem, *, backend: str = "interpolation") -> None:
        self.cp = cp
        self.backend = backend
        self._graphs: dict[tuple[str, ...], CellGraph] = {}

    def graph(self, marked: tuple[str, ...] = ()) -> CellGraph:
        g = self._graphs.get(marked)
        if g is None:
            g = CellGraph(self.cp.cnf, self.cp.vocab, self.cp.weights, marked=marked)
            self._graphs[marked] = g
        return g

    def count_detailed(self, n: int) -> CountBreakdown:
        if n < 1:
            raise TableError("domain size must be at least 1")
        if self.cp.needs_specialization(n):
            return LiftedCounter(_specialized(self.cp, n), backend=self.backend).count_detailed(n)
        multiplier = evaluate_multiplier(self.cp.factors, n)
        if isinstance(self.cp.card_condition, Top):
            raw = self.graph().evaluate(n)
        else:
            table = wmc_table(
                self.cp.cnf, self.cp.vocab, self.cp.weights, self.cp.psi, n,
                backend=self.backend, graph=self.graph(self.cp.psi),
            )
            raw = filtered_sum(table, self.cp.card_condition, n)
        return CountBreakdown(raw, multiplier, raw * multiplier)

    def count(self, n: int) -> Rat:
        return self.count_detailed(n).value

    def table(self, user_psi: Sequence[str], n: int) -> WmcTable:
        """Table over the user's predicates among worlds meeting the compiled condition."""
        if not user_psi:
            raise TableError("psi must list at least one predicate")
        if n < 1:
            raise TableError("domain size must be at least 1")
        cp = self.cp
        if cp.needs_specialization(n):
            return LiftedCounter(_specialized(cp, n), backend=self.backend).table(user_psi, n)
        marked = tuple(dict.fromkeys(tuple(user_psi) + cp.psi))
        table = wmc_table(
            cp.cnf, cp.vocab, cp.weights, marked, n,
            backend=self.backend, graph=self.graph(marked),
        )
        multiplier = evaluate_multiplier(cp.factors, n)
        kept: dict[tuple[int, ...], Rat] = {}
        for key, value in table.entries.items():
            counts = dict(zip(table.preds, key))
            if condition_holds(cp.card_condition, counts, n):
                sub = tuple(counts[name] for name in user_psi)
                kept[sub] = kept.get(sub, ZERO) + value * multiplier
        bounds = tuple(n ** cp.vocab.arity(name) for name in user_psi)
        return WmcTable(tuple(user_psi), bounds, {k: v for k, v in kept.items() if v != 0})


def count_detailed(cp: CompiledProblem, n: int, *, backend: str = "interpolation") -> CountBreakdown:
    return LiftedCounter(cp, backend=backend).count_detailed(n)


def count(cp: CompiledProblem, n: int, *, backend: str = "interpolation") -> Rat:
    return LiftedCounter(cp, backend=backend).count_detailed(n).value


def joint_table(
    cp: CompiledProblem, user_psi: Sequence[str], n: int, *, backend: str = "interpolation"
) -> WmcTable:
    return LiftedCounter(cp, backend=backend).table(user_psi, n)
