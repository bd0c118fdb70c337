"""Formula AST for two-variable logic with counting quantifiers.

Nodes are frozen dataclasses with structural equality so they can be used as
dict keys and compared in tests.  Terms are plain strings: the single letters
u,v,w,x,y,z are variables, anything else is a domain constant.  The validator
only admits {x,y} so that a stray third variable is reported instead of being
silently read as a constant.

Predicate names starting with "@" are reserved for machinery introduced by
the transform pipeline and are rejected in user input.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Union

VARIABLE_LETTERS = frozenset("uvwxyz")
RESERVED_PREFIX = "@"

COUNT_COMPARATORS = ("=", "<=", ">=")
CARD_COMPARATORS = ("=", "<=", ">=", "<", ">")


def is_variable(term: str) -> bool:
    return len(term) == 1 and term in VARIABLE_LETTERS


@dataclass(frozen=True)
class Pred:
    name: str
    arity: int

    def __post_init__(self) -> None:
        if self.arity not in (0, 1, 2):
            raise ValueError(f"predicate {self.name}: arity {self.arity} not in 0..2")


class Formula:
    """Marker base class; concrete nodes are the dataclasses below."""

    __slots__ = ()


@dataclass(frozen=True)
class Top(Formula):
    pass


@dataclass(frozen=True)
class Bottom(Formula):
    pass


TRUE = Top()
FALSE = Bottom()


@dataclass(frozen=True)
class Atom(Formula):
    pred: str
    args: tuple[str, ...] = ()


@dataclass(frozen=True)
class Equality(Formula):
    left: str
    right: str


@dataclass(frozen=True)
class Not(Formula):
    sub: Formula


@dataclass(frozen=True)
class And(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Iff(Formula):
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Forall(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class Exists(Formula):
    var: str
    body: Formula


@dataclass(frozen=True)
class CountExists(Formula):
    """Counting quantifier: exactly / at most / at least k witnesses."""

    comparator: str
    k: int
    var: str
    body: Formula

    def __post_init__(self) -> None:
        if self.comparator not in COUNT_COMPARATORS:
            raise ValueError(f"bad counting comparator {self.comparator!r}")
        if self.k < 0:
            raise ValueError("counting parameter k must be >= 0")


@dataclass(frozen=True)
class CardinalityAtom(Formula):
    """|pred| <comparator> coeff*n + offset, n being the domain size."""

    pred: str
    comparator: str
    coeff: int = 0
    offset: int = 0

    def __post_init__(self) -> None:
        if self.comparator not in CARD_COMPARATORS:
            raise ValueError(f"bad cardinality comparator {self.comparator!r}")

    def bound(self, n: int) -> int:
        return self.coeff * n + self.offset

    def holds(self, value: int, n: int) -> bool:
        b = self.bound(n)
        return {
            "=": value == b,
            "<=": value <= b,
            ">=": value >= b,
            "<": value < b,
            ">": value > b,
        }[self.comparator]


BINARY_NODES = (And, Or, Implies, Iff)
QUANT_NODES = (Forall, Exists, CountExists)


def children(f: Formula) -> tuple[Formula, ...]:
    if isinstance(f, Not):
        return (f.sub,)
    if isinstance(f, BINARY_NODES):
        return (f.left, f.right)
    if isinstance(f, QUANT_NODES):
        return (f.body,)
    return ()


def rebuild(f: Formula, new_children: tuple[Formula, ...]) -> Formula:
    if isinstance(f, Not):
        return Not(new_children[0])
    if isinstance(f, And):
        return And(*new_children)
    if isinstance(f, Or):
        return Or(*new_children)
    if isinstance(f, Implies):
        return Implies(*new_children)
    if isinstance(f, Iff):
        return Iff(*new_children)
    if isinstance(f, Forall):
        return Forall(f.var, new_children[0])
    if isinstance(f, Exists):
        return Exists(f.var, new_children[0])
    if isinstance(f, CountExists):
        return CountExists(f.comparator, f.k, f.var, new_children[0])
    return f


def walk(f: Formula) -> Iterator[Formula]:
    yield f
    for c in children(f):
        yield from walk(c)


def formula_size(f: Formula) -> int:
    return sum(1 for _ in walk(f))


def free_variables(f: Formula) -> frozenset[str]:
    if isinstance(f, Atom):
        return frozenset(a for a in f.args if is_variable(a))
    if isinstance(f, Equality):
        return frozenset(t for t in (f.left, f.right) if is_variable(t))
    if isinstance(f, QUANT_NODES):
        return free_variables(f.body) - {f.var}
    out: frozenset[str] = frozenset()
    for c in children(f):
        out |= free_variables(c)
    return out


def predicates_in(f: Formula) -> list[tuple[str, int]]:
    """(name, arity) pairs in first-occurrence order; cardinality atoms count."""
    seen: dict[str, int] = {}
    for node in walk(f):
        if isinstance(node, Atom) and node.pred not in seen:
            seen[node.pred] = len(node.args)
        elif isinstance(node, CardinalityAtom) and node.pred not in seen:
            seen[node.pred] = -1  # arity unknown from the atom itself
    return list(seen.items())


def constants_in(f: Formula) -> list[str]:
    seen: list[str] = []
    for node in walk(f):
        terms: tuple[str, ...] = ()
        if isinstance(node, Atom):
            terms = node.args
        elif isinstance(node, Equality):
            terms = (node.left, node.right)
        for t in terms:
            if not is_variable(t) and t not in seen:
                seen.append(t)
    return seen


def swap_xy(f: Formula) -> Formula:
    """Exchange the variables x and y everywhere, binders included."""

    def sw(t: str) -> str:
        return {"x": "y", "y": "x"}.get(t, t)

    if isinstance(f, Atom):
        return Atom(f.pred, tuple(sw(a) for a in f.args))
    if isinstance(f, Equality):
        return Equality(sw(f.left), sw(f.right))
    if isinstance(f, Forall):
        return Forall(sw(f.var), swap_xy(f.body))
    if isinstance(f, Exists):
        return Exists(sw(f.var), swap_xy(f.body))
    if isinstance(f, CountExists):
        return CountExists(f.comparator, f.k, sw(f.var), swap_xy(f.body))
    kids = children(f)
    if not kids:
        return f
    return rebuild(f, tuple(swap_xy(c) for c in kids))


def conjoin(parts: Iterable[Formula]) -> Formula:
    out: Formula | None = None
    for p in parts:
        if isinstance(p, Top):
            continue
        out = p if out is None else And(out, p)
    return TRUE if out is None else out


def disjoin(parts: Iterable[Formula]) -> Formula:
    out: Formula | None = None
    for p in parts:
        if isinstance(p, Bottom):
            continue
        out = p if out is None else Or(out, p)
    return FALSE if out is None else out


def flatten_and(f: Formula) -> list[Formula]:
    if isinstance(f, And):
        return flatten_and(f.left) + flatten_and(f.right)
    if isinstance(f, Top):
        return []
    return [f]


def flatten_or(f: Formula) -> list[Formula]:
    if isinstance(f, Or):
        return flatten_or(f.left) + flatten_or(f.right)
    if isinstance(f, Bottom):
        return []
    return [f]


@dataclass(frozen=True)
class Vocabulary:
    predicates: tuple[Pred, ...]
    constants: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        names = [p.name for p in self.predicates]
        dupes = {n for n in names if names.count(n) > 1}
        if dupes:
            raise ValueError(f"duplicate predicate declarations: {sorted(dupes)}")

    def by_name(self) -> dict[str, Pred]:
        return {p.name: p for p in self.predicates}

    def has(self, name: str) -> bool:
        return any(p.name == name for p in self.predicates)

    def arity(self, name: str) -> int:
        for p in self.predicates:
            if p.name == name:
                return p.arity
        raise KeyError(name)

    def with_predicates(self, extra: Iterable[Pred]) -> "Vocabulary":
        current = {p.name for p in self.predicates}
        added = tuple(p for p in extra if p.name not in current)
        return Vocabulary(self.predicates + added, self.constants)

    def pred_names(self) -> tuple[str, ...]:
        return tuple(p.name for p in self.predicates)


class WeightMap:
    """Predicate name -> (w, w̄) with default (1, 1); values exact rationals."""

    def __init__(self, entries: dict[str, tuple] | None = None) -> None:
        from .rationals import rat

        self._entries: dict[str, tuple] = {}
        for name, (w, wb) in (entries or {}).items():
            self._entries[name] = (rat(w), rat(wb))

    def get(self, name: str):
        from .rationals import ONE

        return self._entries.get(name, (ONE, ONE))

    def is_default(self, name: str) -> bool:
        return name not in self._entries

    def with_weight(self, name: str, w, wb) -> "WeightMap":
        out = WeightMap()
        out._entries = dict(self._entries)
        from .rationals import rat

        out._entries[name] = (rat(w), rat(wb))
        return out

    def items(self):
        return self._entries.items()

    def copy(self) -> "WeightMap":
        out = WeightMap()
        out._entries = dict(self._entries)
        return out

    def __contains__(self, name: str) -> bool:
        return name in self._entries

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightMap) and self._entries == other._entries

    def __repr__(self) -> str:
        inner = ", ".join(f"{k}: ({w},{wb})" for k, (w, wb) in self._entries.items())
        return f"WeightMap({inner})"


class FreshNames:
    """Deterministic fresh-predicate naming: "@<base><n>", skipping collisions."""

    def __init__(self, taken: Iterable[str] = ()) -> None:
        self._taken = set(taken)
        self._counters: dict[str, int] = {}

    def fresh(self, base: str) -> str:
        i = self._counters.get(base, 0)
        while True:
            i += 1
            name = f"{RESERVED_PREFIX}{base}{i}"
            if name not in self._taken:
                self._counters[base] = i
                self._taken.add(name)
                return name

    def reserve(self, name: str) -> None:
        self._taken.add(name)


@dataclass(frozen=True)
class ValidationIssue:
    location: str
    reason: str

    def __str__(self) -> str:
        return f"{self.location}: {self.reason}"


@dataclass
class ValidationReport:
    issues: list[ValidationIssue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.issues

    def add(self, location: str, reason: str) -> None:
        self.issues.append(ValidationIssue(location, reason))

    def __str__(self) -> str:
        if self.ok:
            return "ok"
        return "; ".join(str(i) for i in self.issues)


def validate_c2(
    f: Formula,
    vocab: Vocabulary,
    *,
    allow_generated: bool = False,
    allow_cardinality: bool = True,
) -> ValidationReport:
    """Check that f is a sentence of the supported fragment.

    Reports every problem with a location path instead of raising: sentences
    must be closed, use only the variables x and y without shadowing, and
    mention only declared predicates of arity <= 2.  Reserved "@" names are
    rejected unless allow_generated is set (the transform pipeline's own
    output uses them and must validate).
    """

    report = ValidationReport()
    by_name = vocab.by_name()

    free = free_variables(f)
    if free:
        report.add("root", f"not a sentence: free variables {sorted(free)}")

    def check_pred(name: str, arity: int | None, loc: str) -> None:
        if name.startswith(RESERVED_PREFIX) and not allow_generated:
            report.add(loc, f"reserved predicate name {name!r}")
            return
        p = by_name.get(name)
        if p is None:
            report.add(loc, f"undeclared predicate {name!r}")
            return
        if arity is not None and p.arity != arity:
            report.add(loc, f"predicate {name}/{p.arity} used with {arity} arguments")

    def visit(node: Formula, bound: frozenset[str], loc: str) -> None:
        if isinstance(node, Atom):
            check_pred(node.pred, len(node.args), loc)
            for a in node.args:
                if is_variable(a):
                    if a not in ("x", "y"):
                        report.add(loc, f"variable {a!r} is not in {{x, y}}")
                    elif a not in bound:
                        pass  # free-variable reporting handled at root
            return
        if isinstance(node, Equality):
            for t in (node.left, node.right):
                if is_variable(t) and t not in ("x", "y"):
                    report.add(loc, f"variable {t!r} is not in {{x, y}}")
            return
        if isinstance(node, CardinalityAtom):
            if not allow_cardinality:
                report.add(loc, "cardinality atom not allowed here")
            check_pred(node.pred, None, loc)
            return
        if isinstance(node, QUANT_NODES):
            v = node.var
            tag = {Forall: "forall", Exists: "exists", CountExists: "count"}[type(node)]
            inner = f"{loc}.{tag}[{v}]"
            if v not in ("x", "y"):
                report.add(inner, f"quantified variable {v!r} is not in {{x, y}}")
            if v in bound:
                report.add(inner, f"variable {v!r} is already bound (shadowing)")
            visit(node.body, bound | {v}, inner)
            return
        for i, c in enumerate(children(node)):
            tag = type(node).__name__.lower()
            visit(c, bound, f"{loc}.{tag}[{i}]")

    visit(f, frozenset(), "root")
    return report


FormulaLike = Union[Formula]

__all__ = [
    "Pred",
    "Formula",
    "Top",
    "Bottom",
    "TRUE",
    "FALSE",
    "Atom",
    "Equality",
    "Not",
    "And",
    "Or",
    "Implies",
    "Iff",
    "Forall",
    "Exists",
    "CountExists",
    "CardinalityAtom",
    "Vocabulary",
    "WeightMap",
    "FreshNames",
    "ValidationIssue",
    "ValidationReport",
    "validate_c2",
    "is_variable",
    "children",
    "rebuild",
    "walk",
    "formula_size",
    "free_variables",
    "predicates_in",
    "constants_in",
    "swap_xy",
    "conjoin",
    "disjoin",
    "flatten_and",
    "flatten_or",
    "VARIABLE_LETTERS",
    "RESERVED_PREFIX",
    "COUNT_COMPARATORS",
    "CARD_COMPARATORS",
]
