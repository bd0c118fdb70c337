"""Surface syntax: problem files, formula text, printing, error positions."""

import random

import pytest

from conftest import build_corpus
from wfomc2.logic import (
    And,
    Atom,
    CardinalityAtom,
    CountExists,
    Equality,
    Forall,
    Iff,
    Implies,
    Not,
    Or,
    Pred,
)
from wfomc2.parser import ParseError, parse_formula_text, parse_problem, print_formula
from wfomc2.rationals import rat

HEADS_TAILS = """\
domain 2
predicate heads/1
predicate tails/1
weight heads 2
sentence forall x. ((heads(x) | tails(x)) & (~heads(x) | ~tails(x)))
psi heads, tails
"""


class TestProblemFiles:
    def test_heads_tails_round(self):
        pf = parse_problem(HEADS_TAILS)
        assert pf.domain_size == 2
        assert {p.name: p.arity for p in pf.vocab.predicates} == {"heads": 1, "tails": 1}
        assert pf.weights.get("heads") == (rat(2), rat(1))
        assert pf.weights.is_default("tails")
        assert pf.psi == ["heads", "tails"]
        expected = Forall(
            "x",
            And(
                Or(Atom("heads", ("x",)), Atom("tails", ("x",))),
                Or(Not(Atom("heads", ("x",))), Not(Atom("tails", ("x",)))),
            ),
        )
        assert pf.sentences == [expected]

    def test_counting_quantifier(self):
        pf = parse_problem("domain 3\npredicate e/2\nsentence forall x. exists[=2] y. e(x, y)\n")
        (s,) = pf.sentences
        assert isinstance(s, Forall)
        assert s.body == CountExists("=", 2, "y", Atom("e", ("x", "y")))

    def test_counting_bounds(self):
        pf = parse_problem("domain 3\npredicate e/2\nsentence forall x. exists[<=1] y. e(x, y)\n")
        (s,) = pf.sentences
        assert s.body.comparator == "<=" and s.body.k == 1
        pf = parse_problem("domain 3\npredicate e/2\nsentence forall x. exists[>=2] y. e(x, y)\n")
        assert pf.sentences[0].body.comparator == ">="

    def test_plain_exists(self):
        pf = parse_problem("domain 3\npredicate e/2\nsentence forall x. exists y. e(x, y)\n")
        body = pf.sentences[0].body
        assert type(body).__name__ == "Exists"

    def test_cardinality_forms(self):
        pf = parse_problem("domain 3\npredicate xi/2\ncardinality |xi| = 2*n\n")
        assert pf.cardinality == [CardinalityAtom("xi", "=", 2, 0)]
        pf = parse_problem("domain 3\npredicate r/2\ncardinality |r| <= 3\n")
        assert pf.cardinality == [CardinalityAtom("r", "<=", 0, 3)]
        pf = parse_problem("domain 3\npredicate r/2\ncardinality |r| >= n + 1\n")
        assert pf.cardinality == [CardinalityAtom("r", ">=", 1, 1)]

    def test_weight_pair_and_fraction(self):
        pf = parse_problem("domain 2\npredicate a/1\nweight a 1/2 -3\n")
        assert pf.weights.get("a") == (rat(1, 2), rat(-3))

    def test_mln_declarations(self):
        pf = parse_problem("domain 3\npredicate sm/1\npredicate fr/2\nmln 2: sm(x)\nmln hard: ~fr(x, x)\n")
        assert pf.has_mln()
        soft, hard = pf.mln
        assert soft.multiplier == rat(2) and soft.formula == Atom("sm", ("x",))
        assert hard.multiplier is None
        assert hard.formula == Not(Atom("fr", ("x", "x")))

    def test_comments_and_blank_lines(self):
        pf = parse_problem("# a coin\n\ndomain 2\npredicate a/1  # trailing\nsentence forall x. a(x)\n")
        assert pf.domain_size == 2 and len(pf.sentences) == 1

    def test_equality_and_constants(self):
        pf = parse_problem("domain 2\npredicate e/2\nsentence forall x. forall y. (x = y | e(x, y))\n")
        body = pf.sentences[0].body.body
        assert body.left == Equality("x", "y")


class TestRejections:
    def test_undeclared_predicate(self):
        with pytest.raises(ParseError):
            parse_problem("domain 2\nsentence forall x. ghost(x)\n")

    def test_arity_mismatch(self):
        with pytest.raises(ParseError):
            parse_problem("domain 2\npredicate a/1\nsentence forall x. forall y. a(x, y)\n")

    def test_nonpositive_mln_multiplier(self):
        with pytest.raises(ParseError, match="positive"):
            parse_problem("domain 2\npredicate a/1\nmln -1: a(x)\n")
        with pytest.raises(ParseError):
            parse_problem("domain 2\npredicate a/1\nmln 0: a(x)\n")

    def test_reserved_predicate_name(self):
        with pytest.raises(ParseError):
            parse_problem("domain 2\npredicate @sk1/1\n")

    def test_error_position(self):
        with pytest.raises(ParseError) as exc:
            parse_problem("domain 2\npredicate a/1\nbadline here\n")
        assert exc.value.line == 3 and exc.value.col == 1

    def test_formula_error_position(self):
        with pytest.raises(ParseError) as exc:
            parse_formula_text("a(x) &", None)
        assert exc.value.line == 1 and exc.value.col == 7

    def test_missing_domain_leaves_size_unset(self):
        # size then comes from the command line
        pf = parse_problem("predicate a/1\nsentence forall x. a(x)\n")
        assert pf.domain_size is None

    def test_duplicate_domain(self):
        with pytest.raises(ParseError):
            parse_problem("domain 2\ndomain 3\npredicate a/1\n")


class TestPrecedence:
    def test_tower(self):
        f = parse_formula_text("~a(x) & b(x) | c(x) -> d(x) <-> e(x)", None)
        assert isinstance(f, Iff)
        assert isinstance(f.left, Implies)
        assert isinstance(f.left.left, Or)
        assert isinstance(f.left.left.left, And)
        assert isinstance(f.left.left.left.left, Not)

    def test_implies_right_associative(self):
        f = parse_formula_text("a(x) -> b(x) -> c(x)", None)
        assert f == Implies(Atom("a", ("x",)), Implies(Atom("b", ("x",)), Atom("c", ("x",))))

    def test_and_left_associative(self):
        f = parse_formula_text("a(x) & b(x) & c(x)", None)
        assert f == And(And(Atom("a", ("x",)), Atom("b", ("x",))), Atom("c", ("x",)))

    def test_parens_override(self):
        f = parse_formula_text("a(x) & (b(x) | c(x))", None)
        assert isinstance(f, And) and isinstance(f.right, Or)


class TestPrinting:
    def test_examples(self):
        cases = [
            "forall x. ~e(x, x)",
            "forall x. exists[=2] y. e(x, y)",
            "forall x. forall y. e(x, y) -> e(y, x)",
            "forall x. a(x) <-> ~b(x)",
        ]
        for text in cases:
            f = parse_formula_text(text, None)
            assert print_formula(f) == text

    def test_cardinality_print(self):
        assert print_formula(CardinalityAtom("f", "=", 2, 0)) == "|f| = 2*n"
        assert print_formula(CardinalityAtom("f", "<=", 0, 3)) == "|f| <= 3"
        assert print_formula(CardinalityAtom("f", ">=", 1, 1)) == "|f| >= n + 1"


def _random_formula(rng: random.Random, depth: int):
    if depth == 0 or rng.random() < 0.3:
        pick = rng.random()
        if pick < 0.4:
            return Atom(rng.choice(["a", "b"]), (rng.choice(["x", "y"]),))
        if pick < 0.8:
            u, v = rng.choice([("x", "y"), ("y", "x"), ("x", "x")])
            return Atom("r", (u, v))
        return Equality("x", "y")
    op = rng.randrange(5)
    lhs = _random_formula(rng, depth - 1)
    rhs = _random_formula(rng, depth - 1)
    if op == 0:
        return Not(lhs)
    return [And, Or, Implies, Iff][op - 1](lhs, rhs)


class TestRoundTrip:
    def test_print_parse_identity_random(self):
        # 1000 random quantifier-free shapes plus quantified wrappers
        rng = random.Random(7)
        for i in range(1000):
            f = _random_formula(rng, rng.randrange(1, 5))
            if i % 3 == 0:
                f = Forall("x", Forall("y", f))
            elif i % 3 == 1:
                f = Forall("x", CountExists(rng.choice(["=", "<=", ">="]), rng.randrange(4), "y", f))
            assert parse_formula_text(print_formula(f), None) == f

    def test_print_parse_identity_corpus(self):
        for inst in build_corpus(40, seed=11):
            text = print_formula(inst.sentence)
            assert parse_formula_text(text, inst.vocab) == inst.sentence
