"""Brute-force model counting used as the reference for everything lifted."""

import itertools
import math
import random

import pytest

from conftest import build_corpus, expand_counting
from wfomc2.logic import (
    And,
    Atom,
    Bottom,
    CardinalityAtom,
    CountExists,
    Exists,
    Forall,
    Implies,
    Not,
    Or,
    Pred,
    Top,
    Vocabulary,
    WeightMap,
)
from wfomc2.oracle import (
    OracleCapExceeded,
    brute_wfomc,
    brute_wmc_table,
    cardinality,
    domain_elements,
    enumerate_worlds,
    ground_atoms,
    satisfies,
    world_weight,
)
from wfomc2.parser import parse_formula_text
from wfomc2.rationals import rat

SM_FR = Vocabulary((Pred("sm", 1), Pred("fr", 2)))
HT = Vocabulary((Pred("heads", 1), Pred("tails", 1)))

EXACTLY_ONE = parse_formula_text(
    "forall x. ((heads(x) | tails(x)) & (~heads(x) | ~tails(x)))", HT
)


class TestWorldBasics:
    def test_cardinality_counts_one_predicate(self):
        world = {("fr", ("e1", "e2")), ("fr", ("e2", "e1")), ("sm", ("e1",))}
        assert cardinality(world, "fr") == 2
        assert cardinality(world, "sm") == 1
        assert cardinality(world, "heads") == 0

    def test_cardinality_empty_world(self):
        assert cardinality(frozenset(), "fr") == 0

    def test_ground_atom_count(self):
        d = domain_elements(3)
        assert len(ground_atoms(SM_FR, d)) == 3 + 9

    def test_enumerate_worlds_count(self):
        worlds = list(enumerate_worlds(Vocabulary((Pred("a", 1),)), 2))
        assert len(worlds) == 4

    def test_enumerate_cap(self):
        with pytest.raises(OracleCapExceeded):
            list(enumerate_worlds(SM_FR, 5))


class TestSatisfies:
    WORLD = frozenset({("sm", ("e2",))})
    D = domain_elements(2)

    def test_exists_true(self):
        assert satisfies(Exists("x", Atom("sm", ("x",))), self.WORLD, self.D)

    def test_forall_false(self):
        assert not satisfies(Forall("x", Atom("sm", ("x",))), self.WORLD, self.D)

    def test_env_binds_free_variable(self):
        f = Atom("sm", ("x",))
        assert satisfies(f, self.WORLD, self.D, {"x": "e2"})
        assert not satisfies(f, self.WORLD, self.D, {"x": "e1"})

    def test_equality(self):
        f = Forall("x", Forall("y", Implies(Atom("fr", ("x", "y")), Not(Top()))))
        world = frozenset()
        assert satisfies(f, world, self.D)

    def test_count_zero_matches_negated_forall(self):
        # exists[=0] y. fr(x,y)  <=>  forall y. ~fr(x,y), on every world
        v = SM_FR
        count_form = Forall("x", CountExists("=", 0, "y", Atom("fr", ("x", "y"))))
        neg_form = Forall("x", Forall("y", Not(Atom("fr", ("x", "y")))))
        d = domain_elements(2)
        seen = 0
        for world in enumerate_worlds(v, 2):
            assert satisfies(count_form, world, d) == satisfies(neg_form, world, d)
            seen += 1
        assert seen == 2 ** (2 + 4)

    def test_count_comparators(self):
        d = domain_elements(3)
        world = frozenset({("fr", ("e1", "e1")), ("fr", ("e1", "e2"))})
        body = Atom("fr", ("x", "y"))
        env = {"x": "e1"}
        assert satisfies(CountExists("=", 2, "y", body), world, d, env)
        assert satisfies(CountExists("<=", 2, "y", body), world, d, env)
        assert satisfies(CountExists(">=", 2, "y", body), world, d, env)
        assert not satisfies(CountExists("=", 1, "y", body), world, d, env)
        assert not satisfies(CountExists(">=", 3, "y", body), world, d, env)

    def test_cardinality_atom_semantics(self):
        d = domain_elements(2)
        world = frozenset({("fr", ("e1", "e2")), ("fr", ("e2", "e1"))})
        assert satisfies(CardinalityAtom("fr", "=", 1, 0), world, d)  # 2 == 1*n
        assert not satisfies(CardinalityAtom("fr", "=", 0, 3), world, d)


class TestExpandCounting:
    """The quantifier expansion is an independent third evaluator."""

    def test_expansion_shape(self):
        f = CountExists("=", 1, "y", Atom("fr", ("x", "y")))
        g = expand_counting(f, ("e1", "e2"))
        # picks each singleton witness set: two disjuncts
        assert satisfies(g, frozenset({("fr", ("e1", "e1"))}), ("e1", "e2"), {"x": "e1"})
        assert not satisfies(g, frozenset(), ("e1", "e2"), {"x": "e1"})

    def test_unsatisfiable_count_is_bottom(self):
        f = CountExists("=", 3, "y", Atom("fr", ("x", "y")))
        g = expand_counting(f, ("e1",))
        assert g == Bottom() or not satisfies(g, frozenset({("fr", ("e1", "e1"))}), ("e1",), {"x": "e1"})

    def test_corpus_agreement_small(self, corpus):
        for inst in corpus:
            for n in (1, 2):
                d = domain_elements(n)
                expanded = expand_counting(inst.sentence, d)
                for world in enumerate_worlds(inst.vocab, n):
                    assert satisfies(inst.sentence, world, d) == satisfies(expanded, world, d), inst.label

    def test_corpus_agreement_sampled_n3(self, corpus):
        rng = random.Random(3)
        d = domain_elements(3)
        for inst in corpus[:40]:
            expanded = expand_counting(inst.sentence, d)
            atoms = ground_atoms(inst.vocab, d)
            for _ in range(8):
                world = frozenset(a for a in atoms if rng.random() < 0.5)
                assert satisfies(inst.sentence, world, d) == satisfies(expanded, world, d), inst.label


class TestWorldWeight:
    def test_unit_weights(self):
        assert world_weight(frozenset({("sm", ("e1",))}), SM_FR, WeightMap(), 2) == rat(1)

    def test_positive_occurrences(self):
        w = WeightMap({"heads": (rat(2), rat(1))})
        world = frozenset({("heads", ("e1",)), ("heads", ("e2",))})
        assert world_weight(world, HT, w, 2) == rat(4)

    def test_negative_occurrences_use_second_weight(self):
        w = WeightMap({"heads": (rat(1), rat(3))})
        world = frozenset({("heads", ("e1",))})
        # one true atom, one false atom at n=2
        assert world_weight(world, HT, w, 2) == rat(3)

    def test_sign_carries(self):
        w = WeightMap({"sm": (rat(1), rat(-1))})
        assert world_weight(frozenset(), SM_FR, w, 1) == rat(-1)

    def test_binary_exponent(self):
        w = WeightMap({"fr": (rat(1), rat(2))})
        # n=2: 4 possible fr atoms, none true
        assert world_weight(frozenset(), SM_FR, w, 2) == rat(16)


class TestBruteWfomc:
    def test_exactly_one_weighted(self):
        w = WeightMap({"heads": (rat(2), rat(1))})
        assert brute_wfomc(EXACTLY_ONE, HT, w, 2) == rat(9)

    def test_bottom_counts_zero(self):
        assert brute_wfomc(Bottom(), HT, WeightMap(), 2) == rat(0)

    def test_top_counts_all_worlds(self):
        v = Vocabulary((Pred("a", 1),))
        assert brute_wfomc(Top(), v, WeightMap(), 3) == rat(8)

    def test_modes_agree(self):
        w = WeightMap({"heads": (rat(2), rat(-1))})
        for n in (1, 2, 3):
            assert brute_wfomc(EXACTLY_ONE, HT, w, n, mode="naive") == brute_wfomc(
                EXACTLY_ONE, HT, w, n, mode="vector"
            )

    def test_modes_agree_on_corpus(self, corpus):
        for inst in corpus[:25]:
            a = brute_wfomc(inst.sentence, inst.vocab, inst.weights, 2, mode="naive")
            b = brute_wfomc(inst.sentence, inst.vocab, inst.weights, 2, mode="vector")
            assert a == b, inst.label

    def test_cap_enforced(self):
        with pytest.raises(OracleCapExceeded):
            brute_wfomc(Top(), SM_FR, WeightMap(), 5)

    def test_cap_override(self):
        v = Vocabulary((Pred("a", 1),))
        assert brute_wfomc(Top(), v, WeightMap(), 25, atom_cap=25) == rat(2) ** 25


class TestBruteTable:
    def test_unit_weight_regression(self):
        # at n=4 exactly one heads forces three tails; (0,0) never happens
        table = brute_wmc_table(EXACTLY_ONE, HT, WeightMap(), 4, ["heads", "tails"])
        assert table[(1, 3)] == rat(4)
        assert (0, 0) not in table
        assert table[(2, 2)] == rat(6)
        assert sum(table.values(), rat(0)) == rat(16)

    def test_small_domain_keys(self):
        table = brute_wmc_table(EXACTLY_ONE, HT, WeightMap(), 2, ["heads", "tails"])
        assert table == {(2, 0): rat(1), (1, 1): rat(2), (0, 2): rat(1)}

    def test_table_sums_to_wfomc(self, corpus):
        for inst in corpus[:20]:
            psi = inst.psi
            if not psi:
                continue
            table = brute_wmc_table(inst.sentence, inst.vocab, inst.weights, 2, list(psi))
            total = sum(table.values(), rat(0))
            assert total == brute_wfomc(inst.sentence, inst.vocab, inst.weights, 2), inst.label

    def test_bounds_respected(self, corpus):
        for inst in corpus[:20]:
            psi = list(inst.psi)
            if not psi:
                continue
            n = 2
            table = brute_wmc_table(inst.sentence, inst.vocab, inst.weights, n, psi)
            bounds = [n ** inst.vocab.arity(p) for p in psi]
            for key in table:
                assert all(0 <= k <= b for k, b in zip(key, bounds))

    def test_cap_applies(self):
        with pytest.raises(OracleCapExceeded):
            brute_wmc_table(Top(), SM_FR, WeightMap(), 5, ["fr"])
