"""Formula plumbing: free variables, validation, naming, weight maps."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wfomc2.logic import (
    And,
    Atom,
    CardinalityAtom,
    CountExists,
    Equality,
    Exists,
    Forall,
    FreshNames,
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
    free_variables,
    rebuild,
    swap_xy,
    validate_c2,
    walk,
)
from wfomc2.rationals import rat


def v2(*preds: Pred) -> Vocabulary:
    return Vocabulary(tuple(preds))


F = Pred("f", 2)
E = Pred("e", 2)
A = Pred("a", 1)


class TestFreeVariables:
    def test_reflexive_atom(self):
        assert free_variables(Atom("f", ("x", "x"))) == {"x"}

    def test_universal_closure_is_sentence(self):
        assert free_variables(Forall("x", Not(Atom("f", ("x", "x"))))) == frozenset()

    def test_counting_binds_its_variable(self):
        f = CountExists("=", 2, "y", Atom("e", ("x", "y")))
        assert free_variables(f) == {"x"}

    def test_equality(self):
        assert free_variables(Equality("x", "y")) == {"x", "y"}


class TestValidation:
    def test_accepts_two_variable_implication(self):
        f = Forall("x", Forall("y", Implies(And(Atom("a", ("x",)), Atom("e", ("x", "y"))), Atom("a", ("y",)))))
        assert validate_c2(f, v2(A, E)).ok

    def test_rejects_third_variable(self):
        f = Forall("x", Forall("z", Atom("e", ("x", "z"))))
        assert not validate_c2(f, v2(E)).ok

    def test_rejects_arity_mismatch(self):
        f = Forall("x", Forall("y", Atom("e", ("x", "y", "x"))))
        assert not validate_c2(f, v2(E)).ok

    def test_rejects_reserved_prefix_in_user_input(self):
        f = Forall("x", Atom("@sk1", ("x",)))
        report = validate_c2(f, v2(Pred("@sk1", 1)), allow_generated=False)
        assert not report.ok

    def test_allows_reserved_prefix_when_generated(self):
        f = Forall("x", Atom("@sk1", ("x",)))
        assert validate_c2(f, v2(Pred("@sk1", 1)), allow_generated=True).ok

    def test_rejects_shadowing(self):
        f = Forall("x", Exists("x", Atom("a", ("x",))))
        assert not validate_c2(f, v2(A)).ok

    def test_rejects_undeclared_predicate(self):
        f = Forall("x", Atom("ghost", ("x",)))
        assert not validate_c2(f, v2(A)).ok

    def test_cardinality_gated(self):
        f = CardinalityAtom("e", "=", 1, 0)
        assert validate_c2(f, v2(E), allow_cardinality=True).ok
        assert not validate_c2(f, v2(E), allow_cardinality=False).ok

    def test_issues_carry_location_and_reason(self):
        f = Forall("z", Atom("a", ("z",)))
        report = validate_c2(f, v2(A))
        assert not report.ok
        assert report.issues and str(report.issues[0])


class TestFreshNames:
    def test_first_and_second(self):
        fn = FreshNames()
        assert fn.fresh("sk") == "@sk1"
        assert fn.fresh("sk") == "@sk2"

    def test_collision_skips(self):
        fn = FreshNames(["@sk1"])
        assert fn.fresh("sk") == "@sk2"

    def test_bases_are_independent(self):
        fn = FreshNames()
        assert fn.fresh("sk") == "@sk1"
        assert fn.fresh("f") == "@f1"


class TestWeightMap:
    def test_default_pair(self):
        wm = WeightMap()
        assert wm.get("anything") == (rat(1), rat(1))
        assert wm.is_default("anything")

    def test_with_weight_is_persistent_copy(self):
        wm = WeightMap()
        wm2 = wm.with_weight("a", rat(2), rat(-1))
        assert wm.is_default("a")
        assert wm2.get("a") == (rat(2), rat(-1))

    @given(st.integers(-40, 40), st.integers(1, 40))
    def test_lowest_terms_positive_denominator(self, num, den):
        w, _ = WeightMap({"p": (rat(num) / rat(den), rat(1))}).get("p")
        from math import gcd

        assert w.denominator > 0
        assert gcd(int(w.numerator), int(w.denominator)) == 1


class TestStructuralHelpers:
    def test_children_and_rebuild_roundtrip(self):
        f = Forall("x", Or(Atom("a", ("x",)), Not(Atom("f", ("x", "x")))))
        assert rebuild(f, children(f)) == f

    def test_walk_visits_all_nodes(self):
        f = And(Atom("a", ("x",)), Not(Top()))
        kinds = [type(g).__name__ for g in walk(f)]
        assert kinds.count("Atom") == 1 and "Top" in kinds

    def test_swap_xy_involution(self):
        f = Forall("x", Exists("y", And(Atom("e", ("x", "y")), Atom("a", ("x",)))))
        assert swap_xy(swap_xy(f)) == f

    def test_conjoin_empty_is_top(self):
        assert isinstance(conjoin([]), Top)


class TestVocabulary:
    def test_lookup(self):
        vocab = v2(A, E)
        assert vocab.arity("e") == 2
        assert vocab.has("a") and not vocab.has("ghost")

    def test_rejects_duplicate_names(self):
        with pytest.raises(Exception):
            v2(A, Pred("a", 2))
