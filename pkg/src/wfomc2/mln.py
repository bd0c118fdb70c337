"""Markov logic front-end: partition functions and marginals as counts.

A weighted formula (alpha, phi) with free variables v1..vk becomes a fresh
definitional predicate: forall v1..vk (@xi(v1..vk) <-> alpha), with weight
pair (phi, 1) on @xi.  Every world then picks up phi once per satisfied
grounding of alpha, so the weighted count of the encoded theory is the
partition function Z, and the probability of a sentence q is the ratio of
the q-constrained count to Z.  Hard formulas are universally closed and
conjoined instead of weighted.

Multipliers are exact rationals, read multiplicatively (phi plays the role
of e^w); exp_multiplier() converts a real-valued exponent to a nearby
rational for callers who insist on additive weights.

Hard-formula caveat: under the exponential-family reading a hard formula is
a limit of ever-larger finite weights, which normalizes over the worlds
maximizing the number of satisfied groundings even when no world satisfies
all of them.  Conjoining the closure instead gives those worlds probability
zero; when the hard constraints are unsatisfiable at size n this front-end
reports Z = 0 and refuses to produce marginals rather than renormalizing
over constraint-violating worlds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .logic import (
    And,
    Atom,
    Forall,
    Formula,
    Iff,
    Pred,
    Vocabulary,
    WeightMap,
    conjoin,
    constants_in,
    free_variables,
    validate_c2,
)
from .oracle import DEFAULT_ATOM_CAP, brute_wfomc
from .parser import ProblemFile
from .rationals import ONE, Rat, rat
from .transform import compile_problem
from .wmc import count


class MlnError(Exception):
    pass


@dataclass(frozen=True)
class MlnFormula:
    """One weighted formula; multiplier None marks a hard constraint."""

    formula: Formula
    multiplier: Rat | None

    def is_hard(self) -> bool:
        return self.multiplier is None


def exp_multiplier(w: float, max_denominator: int = 10**12) -> Rat:
    """Rational stand-in for e^w: the nearest IEEE double, then the closest
    fraction with denominator bounded by max_denominator."""
    if max_denominator < 1:
        raise MlnError("max_denominator must be positive")
    fr = Fraction(math.exp(w)).limit_denominator(max_denominator)
    return rat(fr.numerator) / rat(fr.denominator)


def encode_mln(
    formulas: Sequence[MlnFormula],
    vocab: Vocabulary,
    weights: WeightMap | None = None,
) -> tuple[Formula, Vocabulary, WeightMap]:
    """Encode weighted formulas; returns (sentence, extended vocab, weights).

    Soft formulas get one fresh @xi each; hard formulas are closed and kept
    as plain conjuncts.  Declared weights on user predicates pass through
    unchanged (the textbook reading leaves them all at (1, 1)).
    """
    parts: list[Formula] = []
    preds = list(vocab.predicates)
    wm = weights if weights is not None else WeightMap()
    fresh = 0
    for mf in formulas:
        body = mf.formula
        closure = sorted(free_variables(body))  # x before y
        report = validate_c2(
            _closed(body, closure), vocab, allow_generated=False, allow_cardinality=False
        )
        if not report.ok:
            raise MlnError(f"invalid mln formula: {report}")
        if mf.multiplier is None:
            parts.append(_closed(body, closure))
            continue
        if mf.multiplier <= 0:
            raise MlnError("mln multiplier must be positive")
        fresh += 1
        name = f"@xi{fresh}"
        preds.append(Pred(name, len(closure)))
        parts.append(_closed(Iff(Atom(name, tuple(closure)), body), closure))
        wm = wm.with_weight(name, mf.multiplier, ONE)
    return conjoin(parts), Vocabulary(tuple(preds)), wm


def _closed(f: Formula, closure: Sequence[str]) -> Formula:
    for v in reversed(closure):
        f = Forall(v, f)
    return f


def encode_problem(problem: ProblemFile) -> tuple[Formula, Vocabulary, WeightMap]:
    """Whole-file encoding: sentence and cardinality statements are hard."""
    formulas = [MlnFormula(d.formula, d.multiplier) for d in problem.mln]
    sentence, vocab, weights = encode_mln(formulas, problem.vocab, problem.weights)
    return conjoin([sentence, *problem.sentences, *problem.cardinality]), vocab, weights


def partition_function(problem: ProblemFile, n: int, *, backend: str = "interpolation") -> Rat:
    sentence, vocab, weights = encode_problem(problem)
    cp = compile_problem(sentence, vocab, weights)
    return count(cp, n, backend=backend)


def marginal(
    problem: ProblemFile,
    query: Formula,
    n: int,
    *,
    backend: str = "interpolation",
    atom_cap: int = DEFAULT_ATOM_CAP,
) -> Rat:
    """P[query] = Z_q / Z, exact.

    Constant-free queries run through the lifted pipeline; ground queries
    (domain elements e1..eN) fall back to world enumeration, subject to the
    oracle's atom cap.
    """
    report = validate_c2(query, problem.vocab, allow_generated=False)
    if not report.ok:
        raise MlnError(f"invalid query: {report}")
    sentence, vocab, weights = encode_problem(problem)
    if constants_in(query):
        z = brute_wfomc(sentence, vocab, weights, n, atom_cap=atom_cap)
        zq = brute_wfomc(And(sentence, query), vocab, weights, n, atom_cap=atom_cap)
    else:
        z = count(compile_problem(sentence, vocab, weights), n, backend=backend)
        zq = count(compile_problem(And(sentence, query), vocab, weights), n, backend=backend)
    if z == 0:
        raise MlnError("partition function is zero: the distribution is undefined")
    return zq / z
